#include <doctest.h>

#include "helpers.hpp"
#include "pgm/pca.hpp"

using namespace pgm;
using pgm::test::covariance_eigen_oracle;
using pgm::test::max_principal_angle;
using pgm::test::random_matrix;
using pgm::test::singular_values_oracle;

TEST_CASE("first component of collinear data") {
  Eigen::MatrixXd values(3, 2);
  values << -1, -1, 0, 0, 2, 2;
  std::mt19937_64 rng(1);
  const PrincipalComponent pc =
      fit_first_component(DataMatrix::complete(values), rng);
  CHECK(pc.converged);
  CHECK(pc.direction.isApprox(Eigen::Vector2d(1, 1).normalized(), 1e-9));
  CHECK_FALSE(pc.near_degenerate);
}

TEST_CASE("isotropic data converges and is flagged near-degenerate") {
  Eigen::MatrixXd values(4, 2);
  values << 1, 0, -1, 0, 0, 1, 0, -1;
  std::mt19937_64 rng(2);
  const PrincipalComponent pc =
      fit_first_component(DataMatrix::complete(values), rng);
  CHECK(pc.converged);
  CHECK(pc.direction.norm() == doctest::Approx(1.0));
  CHECK(pc.near_degenerate);
}

TEST_CASE("first component matches the dense eigensolver oracle") {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd values = random_matrix(50, 5, rng);
  values.col(0) *= 3.0;  // separate the top eigenvalue
  const auto oracle = covariance_eigen_oracle(values);
  std::mt19937_64 fit_rng(4);
  const PrincipalComponent pc =
      fit_first_component(DataMatrix::complete(values), fit_rng);
  CHECK(pc.converged);
  const double cosine = std::abs(pc.direction.dot(oracle.eigenvectors.col(0)));
  CHECK(std::acos(std::min(1.0, cosine)) < 1e-6);
  CHECK(pc.eigenvalue == doctest::Approx(oracle.eigenvalues(0)).epsilon(1e-8));
}

TEST_CASE("deflation collapses collinear data") {
  Eigen::MatrixXd values(4, 3);
  for (int i = 0; i < 4; ++i)
    values.row(i) = static_cast<double>(i) * Eigen::RowVector3d(1, 2, -1);
  std::mt19937_64 rng(5);
  const DataMatrix X = DataMatrix::complete(values);
  const PrincipalComponent pc = fit_first_component(X, rng);
  const DataMatrix residual = deflate(X, pc);
  CHECK(residual.values().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("deflated rows are orthogonal to the removed direction") {
  std::mt19937_64 rng(6);
  const DataMatrix X = pgm::test::random_dataset(30, 4, rng);
  const PrincipalComponent pc = fit_first_component(X, rng);
  const DataMatrix residual = deflate(X, pc);
  for (Eigen::Index i = 0; i < residual.rows(); ++i)
    CHECK(std::abs(residual.values().row(i).dot(pc.direction.transpose())) < 1e-10);
}

TEST_CASE("second fit on deflated data recovers the second eigenvector") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd values = random_matrix(200, 2, rng);
  values.col(0) *= 4.0;
  values.col(1) *= 1.5;
  const auto oracle = covariance_eigen_oracle(values);
  const DataMatrix X = DataMatrix::complete(values);
  std::mt19937_64 fit_rng(8);
  const PrincipalComponent first = fit_first_component(X, fit_rng);
  const PrincipalComponent second = fit_first_component(deflate(X, first), fit_rng);
  const double cosine = std::abs(second.direction.dot(oracle.eigenvectors.col(1)));
  CHECK(std::acos(std::min(1.0, cosine)) < 1e-6);
}

TEST_CASE("full basis captures the covariance trace") {
  std::mt19937_64 rng(9);
  Eigen::MatrixXd values = random_matrix(40, 4, rng);
  const auto oracle = covariance_eigen_oracle(values);
  std::mt19937_64 fit_rng(10);
  const PcaBasis basis = fit_components(DataMatrix::complete(values), 4, fit_rng);
  CHECK(basis.complete);
  CHECK(basis.eigenvalues.sum() ==
        doctest::Approx(oracle.eigenvalues.sum()).epsilon(1e-8));
}

TEST_CASE("eigenvalues match singular values") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd values = random_matrix(25, 5, rng);
    const Eigen::VectorXd sv = singular_values_oracle(values);
    std::mt19937_64 fit_rng(100 + static_cast<unsigned>(t));
    const PcaBasis basis = fit_components(DataMatrix::complete(values), 3, fit_rng);
    for (int l = 0; l < 3; ++l) {
      const double expected = sv(l) * sv(l) / 24.0;
      CHECK(basis.eigenvalues(l) == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("basis orthonormality") {
  std::mt19937_64 rng(12);
  const DataMatrix X = pgm::test::random_dataset(30, 6, rng);
  const PcaBasis basis = fit_components(X, 4, rng);
  const Eigen::MatrixXd gram = basis.components.transpose() * basis.components;
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficiency stops the fit early with a flag") {
  Eigen::MatrixXd values(5, 3);
  for (int i = 0; i < 5; ++i)
    values.row(i) = static_cast<double>(i) * Eigen::RowVector3d(1, 0, 1);
  std::mt19937_64 rng(13);
  const PcaBasis basis = fit_components(DataMatrix::complete(values), 3, rng);
  CHECK_FALSE(basis.complete);
  CHECK(basis.count() < 3);
  CHECK_THROWS_AS(fit_components(DataMatrix::complete(values), 4, rng), Error);
}

TEST_CASE("projection of the origin is zero") {
  std::mt19937_64 rng(14);
  const DataMatrix X = pgm::test::random_dataset(20, 3, rng);
  const PcaBasis basis = fit_components(X, 2, rng);
  DataMatrix origin = DataMatrix::complete(basis.origin.transpose());
  const Eigen::MatrixXd coords = project_to_basis(origin, basis);
  CHECK(coords.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projection reproduces signed distances on a line") {
  Eigen::MatrixXd values(3, 2);
  values << -1, -1, 0, 0, 2, 2;
  std::mt19937_64 rng(15);
  const DataMatrix X = DataMatrix::complete(values);
  const PcaBasis basis = fit_components(X, 1, rng);
  const Eigen::MatrixXd coords = project_to_basis(X, basis);
  const Eigen::VectorXd mean = mean_point(X);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double signed_dist =
        (values.row(i).transpose() - mean).dot(basis.components.col(0));
    CHECK(coords(i, 0) == doctest::Approx(signed_dist).epsilon(1e-12));
  }
}

TEST_CASE("coordinates are uncorrelated across basis axes") {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd values = random_matrix(80, 4, rng);
  values.col(0) *= 3.0;
  values.col(1) *= 2.0;
  const DataMatrix X = DataMatrix::complete(values);
  const PcaBasis basis = fit_components(X, 3, rng);
  const Eigen::MatrixXd coords = project_to_basis(X, basis);
  const Eigen::RowVectorXd mean = coords.colwise().mean();
  const Eigen::MatrixXd centered = coords.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / 79.0;
  const double scale = cov.trace();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) CHECK(std::abs(cov(a, b)) < 1e-8 * scale);
}

TEST_CASE("per-axis coordinate variance equals the eigenvalues") {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd values = random_matrix(60, 5, rng);
  const DataMatrix X = DataMatrix::complete(values);
  const PcaBasis basis = fit_components(X, 3, rng);
  const Eigen::MatrixXd coords = project_to_basis(X, basis);
  for (int a = 0; a < 3; ++a) {
    const double mean = coords.col(a).mean();
    const double var = (coords.col(a).array() - mean).square().sum() / 59.0;
    CHECK(var == doctest::Approx(basis.eigenvalues(a)).epsilon(1e-8));
  }
}

namespace {

Eigen::MatrixXd random_orthonormal(Eigen::Index m, Eigen::Index k,
                                   std::mt19937_64& rng) {
  const Eigen::MatrixXd A = random_matrix(m, k, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
}

double projected_variance(const Eigen::MatrixXd& values, const Eigen::MatrixXd& axes) {
  const Eigen::RowVectorXd mean = values.colwise().mean();
  const Eigen::MatrixXd coords = (values.rowwise() - mean) * axes;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < coords.cols(); ++j)
    acc += coords.col(j).squaredNorm() / static_cast<double>(values.rows() - 1);
  return acc;
}

double pairwise_projected_sqdist(const Eigen::MatrixXd& values,
                                 const Eigen::MatrixXd& axes) {
  const Eigen::RowVectorXd mean = values.colwise().mean();
  const Eigen::MatrixXd coords = (values.rowwise() - mean) * axes;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (Eigen::Index j = 0; j < coords.rows(); ++j)
      acc += (coords.row(i) - coords.row(j)).squaredNorm();
  return acc;
}

}  // namespace

TEST_CASE("fitted basis maximizes projected variance over random bases") {
  std::mt19937_64 rng(18);
  const Eigen::MatrixXd values = random_matrix(20, 4, rng);
  const DataMatrix X = DataMatrix::complete(values);
  std::mt19937_64 fit_rng(19);
  const PcaBasis basis = fit_components(X, 2, fit_rng);
  const double fitted = projected_variance(values, basis.components);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::MatrixXd axes = random_orthonormal(4, 2, rng);
    CHECK(fitted + 1e-9 >= projected_variance(values, axes));
  }
}

TEST_CASE("fitted basis maximizes pairwise projected squared distances") {
  std::mt19937_64 rng(20);
  const Eigen::MatrixXd values = random_matrix(15, 4, rng);
  const DataMatrix X = DataMatrix::complete(values);
  std::mt19937_64 fit_rng(21);
  const PcaBasis basis = fit_components(X, 2, fit_rng);
  const double fitted = pairwise_projected_sqdist(values, basis.components);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::MatrixXd axes = random_orthonormal(4, 2, rng);
    CHECK(fitted + 1e-6 >= pairwise_projected_sqdist(values, axes));
  }
}

TEST_CASE("gapped fit tracks the complete-data direction") {
  std::mt19937_64 rng(22);
  Eigen::MatrixXd values = random_matrix(100, 4, rng);
  values.col(0) *= 4.0;
  const DataMatrix complete = DataMatrix::complete(values);
  std::mt19937_64 fit_rng(23);
  const PrincipalComponent full = fit_first_component(complete, fit_rng);

  GapMask gaps = GapMask::Constant(100, 4, false);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < 100; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (unit(rng) < 0.1) gaps(i, j) = true;
  for (Eigen::Index i = 0; i < 100; ++i)
    if (gaps.row(i).all()) gaps(i, 0) = false;
  const DataMatrix gapped(values, gaps, Eigen::VectorXd::Ones(100));
  std::mt19937_64 gap_rng(24);
  const PrincipalComponent masked = fit_first_component(gapped, gap_rng);
  const double cosine = std::abs(full.direction.dot(masked.direction));
  CHECK(std::acos(std::min(1.0, cosine)) < 5.0 * M_PI / 180.0);
}
