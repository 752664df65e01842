#ifndef PGM_TEST_HELPERS_HPP
#define PGM_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/elastic_graph.hpp"

namespace pgm::test {

inline Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index m,
                                     std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = gauss(rng);
  return out;
}

inline DataMatrix random_dataset(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
  return DataMatrix::complete(random_matrix(n, m, rng));
}

/// Dense eigen-decomposition of the (Bessel-corrected) covariance of the
/// centered data; eigenvalues descending. Independent oracle for the EM path.
struct CovarianceEigen {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // columns
};

inline CovarianceEigen covariance_eigen_oracle(const Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  CovarianceEigen out;
  const Eigen::Index m = X.cols();
  out.eigenvalues = Eigen::VectorXd(m);
  out.eigenvectors = Eigen::MatrixXd(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {  // reverse to descending order
    out.eigenvalues(j) = solver.eigenvalues()(m - 1 - j);
    out.eigenvectors.col(j) = solver.eigenvectors().col(m - 1 - j);
  }
  return out;
}

/// Singular values of the centered matrix, descending.
inline Eigen::VectorXd singular_values_oracle(const Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  return svd.singularValues();
}

/// Largest principal angle (radians) between the column spans of A and B.
inline double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
  const Eigen::MatrixXd Qa =
      qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd Qb =
      qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(c);
}

/// Central finite-difference gradient of f at point x (flattened matrix).
template <typename F>
Eigen::MatrixXd fd_gradient(F&& f, const Eigen::MatrixXd& x, double h = 1e-6) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  Eigen::MatrixXd probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + h;
      const double fp = f(probe);
      probe(i, j) = x(i, j) - h;
      const double fm = f(probe);
      probe(i, j) = x(i, j);
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

/// Random tree on n vertices by random attachment; edge moduli in
/// [0.5, 1.5], primitive star structure with the given mu.
inline ElasticGraph random_primitive_tree(int n, std::mt19937_64& rng, double mu = 1.0) {
  std::vector<Edge> edges;
  std::uniform_real_distribution<double> modulus(0.5, 1.5);
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    edges.push_back(Edge{pick(rng), v, modulus(rng)});
  }
  return ElasticGraph::primitive(n, std::move(edges), mu);
}

/// Random connected elastic graph: a random tree plus a few extra edges,
/// with explicit stars over random neighbor subsets.
inline ElasticGraph random_elastic_graph(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> modulus(0.1, 2.0);
  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    edges.push_back(Edge{pick(rng), v, modulus(rng)});
  }
  std::set<std::pair<int, int>> have;
  for (const auto& e : edges) have.insert({std::min(e.a, e.b), std::max(e.a, e.b)});
  std::uniform_int_distribution<int> vert(0, n - 1);
  const int extras = n >= 4 ? n / 4 : 0;
  for (int t = 0; t < extras; ++t) {
    const int a = vert(rng);
    const int b = vert(rng);
    if (a == b) continue;
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    if (have.count(key)) continue;
    have.insert(key);
    edges.push_back(Edge{a, b, modulus(rng)});
  }

  ElasticGraph skeleton(n, edges, {});
  std::vector<Star> stars;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int v = 0; v < n; ++v) {
    const auto& nbrs = skeleton.neighbors()[static_cast<size_t>(v)];
    if (nbrs.size() < 2 || unit(rng) < 0.3) continue;
    std::vector<int> leaves = nbrs;
    // occasionally drop one neighbor (star over a subset)
    if (leaves.size() > 2 && unit(rng) < 0.5)
      leaves.erase(leaves.begin() + static_cast<long>(unit(rng) * static_cast<double>(leaves.size())));
    stars.push_back(Star{v, leaves, modulus(rng)});
  }
  return ElasticGraph(n, std::move(edges), std::move(stars));
}

/// Harmonic extension on a primitive tree: leaves keep the given positions,
/// every internal vertex ends at the mean of its neighbors. The result is
/// pluriharmonic by construction.
inline Embedding harmonic_extension(const ElasticGraph& tree,
                                    const Eigen::MatrixXd& leaf_positions) {
  const int n = tree.vertex_count();
  std::vector<int> leaves, internal;
  for (int v = 0; v < n; ++v)
    (tree.degree(v) <= 1 ? leaves : internal).push_back(v);
  if (static_cast<Eigen::Index>(leaves.size()) != leaf_positions.rows())
    throw Error("dimension-mismatch", "one position row per leaf");

  const Eigen::Index m = leaf_positions.cols();
  Embedding phi = Embedding::Zero(n, m);
  for (size_t i = 0; i < leaves.size(); ++i)
    phi.row(leaves[i]) = leaf_positions.row(static_cast<Eigen::Index>(i));
  if (internal.empty()) return phi;

  std::vector<int> pos_of(static_cast<size_t>(n), -1);
  for (size_t i = 0; i < internal.size(); ++i)
    pos_of[static_cast<size_t>(internal[i])] = static_cast<int>(i);

  const Eigen::Index k = static_cast<Eigen::Index>(internal.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, m);
  for (Eigen::Index i = 0; i < k; ++i) {
    const int v = internal[static_cast<size_t>(i)];
    const auto& nbrs = tree.neighbors()[static_cast<size_t>(v)];
    A(i, i) = static_cast<double>(nbrs.size());
    for (int u : nbrs) {
      if (pos_of[static_cast<size_t>(u)] >= 0)
        A(i, pos_of[static_cast<size_t>(u)]) -= 1.0;
      else
        B.row(i) += phi.row(u);
    }
  }
  const Eigen::MatrixXd sol = A.partialPivLu().solve(B);
  for (Eigen::Index i = 0; i < k; ++i) phi.row(internal[static_cast<size_t>(i)]) = sol.row(i);
  return phi;
}

/// Brute-force unlabeled graph isomorphism; fine for graphs up to ~8 vertices.
inline bool is_isomorphic(const ElasticGraph& A, const ElasticGraph& B) {
  const int n = A.vertex_count();
  if (n != B.vertex_count() || A.edges().size() != B.edges().size()) return false;
  auto degrees = [](const ElasticGraph& g) {
    std::vector<int> d;
    for (int v = 0; v < g.vertex_count(); ++v) d.push_back(g.degree(v));
    std::sort(d.begin(), d.end());
    return d;
  };
  if (degrees(A) != degrees(B)) return false;

  std::set<std::pair<int, int>> eb;
  for (const auto& e : B.edges()) eb.insert({std::min(e.a, e.b), std::max(e.a, e.b)});

  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool good = true;
    for (const auto& e : A.edges()) {
      const int a = perm[static_cast<size_t>(e.a)];
      const int b = perm[static_cast<size_t>(e.b)];
      if (!eb.count({std::min(a, b), std::max(a, b)})) {
        good = false;
        break;
      }
    }
    if (good) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

inline DataMatrix load_iris() {
  std::ifstream in(std::string(PGM_DATA_DIR) + "/iris.csv");
  TableOptions options;
  options.header = true;
  options.label_column = 4;
  return load_table(in, options).data;
}

inline std::vector<std::string> load_iris_labels() {
  std::ifstream in(std::string(PGM_DATA_DIR) + "/iris.csv");
  TableOptions options;
  options.header = true;
  options.label_column = 4;
  return load_table(in, options).labels;
}

/// Noisy half circle of radius 1 around the origin, with Gaussian noise of
/// the given absolute sigma in both coordinates.
inline DataMatrix noisy_half_circle(int n, double sigma, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, M_PI);
  std::normal_distribution<double> noise(0.0, sigma);
  Eigen::MatrixXd values(n, 2);
  for (int i = 0; i < n; ++i) {
    const double t = angle(rng);
    values(i, 0) = std::cos(t) + noise(rng);
    values(i, 1) = std::sin(t) + noise(rng);
  }
  return DataMatrix::complete(std::move(values));
}

}  // namespace pgm::test

#endif
