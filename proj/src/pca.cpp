#include "pgm/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pgm {

namespace {

Eigen::VectorXd random_unit_vector(Eigen::Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(m);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < m; ++i) v(i) = gauss(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

/// Score of row i against direction a1 with origin a0; for gapped rows the
/// inner product and the norm of a1 restrict to the row's present cells.
double row_score(const DataMatrix& X, Eigen::Index i, const Eigen::VectorXd& a0,
                 const Eigen::VectorXd& a1) {
  if (!X.has_gaps() || !X.gaps().row(i).any())
    return (X.values().row(i).transpose() - a0).dot(a1);
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!X.gaps()(i, j)) {
      num += (X.values()(i, j) - a0(j)) * a1(j);
      den += a1(j) * a1(j);
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double c = std::min(1.0, std::abs(a.dot(b)));
  return std::acos(c);
}

void apply_sign_convention(Eigen::VectorXd& direction, Eigen::VectorXd& scores) {
  Eigen::Index imax = 0;
  direction.cwiseAbs().maxCoeff(&imax);
  if (direction(imax) < 0.0) {
    direction = -direction;
    scores = -scores;
  }
}

/// Weighted score variance with Bessel's correction; reduces to
/// sum((b - mean)^2) / (N - 1) for unit weights.
double score_variance(const Eigen::VectorXd& scores, const Eigen::VectorXd& weights,
                      double total_weight) {
  const Eigen::Index n = scores.size();
  if (n < 2) return 0.0;
  const double mean = scores.dot(weights) / total_weight;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = scores(i) - mean;
    acc += weights(i) * d * d;
  }
  return acc / total_weight * static_cast<double>(n) / static_cast<double>(n - 1);
}

double total_variance(const DataMatrix& X, const Eigen::VectorXd& a0) {
  const Eigen::Index n = X.rows();
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    acc += X.weights()(i) * gapped_sqdist_to_point(X.values(), X.gaps(), i, a0);
  return acc / X.total_weight() * static_cast<double>(n) / static_cast<double>(n - 1);
}

}  // namespace

PrincipalComponent fit_first_component(const DataMatrix& X, std::mt19937_64& rng,
                                       const PcaParams& params) {
  if (X.rows() < 2) throw Error("invariant-violation", "need at least 2 observations");
  if (!(params.eps > 0.0)) throw Error("invariant-violation", "eps must be positive");

  const Eigen::Index n = X.rows();
  const Eigen::Index m = X.cols();
  const Eigen::VectorXd a0 = mean_point(X);

  PrincipalComponent result;
  result.origin = a0;
  result.converged = false;

  for (int attempt = 0; attempt <= params.restarts && !result.converged; ++attempt) {
    Eigen::VectorXd a1 = random_unit_vector(m, rng);
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
    int iter = 0;
    bool converged = false;
    bool dead_direction = false;

    for (; iter < params.max_iter; ++iter) {
      for (Eigen::Index i = 0; i < n; ++i) scores(i) = row_score(X, i, a0, a1);

      Eigen::VectorXd num = Eigen::VectorXd::Zero(m);
      Eigen::VectorXd den = Eigen::VectorXd::Zero(m);
      if (!X.has_gaps()) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double wb = X.weights()(i) * scores(i);
          num += wb * (X.values().row(i).transpose() - a0);
          den.array() += wb * scores(i);
        }
      } else {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double wb = X.weights()(i) * scores(i);
          for (Eigen::Index j = 0; j < m; ++j) {
            if (!X.gaps()(i, j)) {
              num(j) += wb * (X.values()(i, j) - a0(j));
              den(j) += wb * scores(i);
            }
          }
        }
      }

      Eigen::VectorXd next(m);
      for (Eigen::Index j = 0; j < m; ++j)
        next(j) = den(j) > 0.0 ? num(j) / den(j) : 0.0;
      const double norm = next.norm();
      if (norm < 1e-300) {
        dead_direction = true;  // all scores vanished; try a fresh start
        break;
      }
      next /= norm;

      const double angle = angle_between(a1, next);
      a1 = next;
      if (angle < params.eps) {
        converged = true;
        ++iter;
        break;
      }
    }

    for (Eigen::Index i = 0; i < n; ++i) scores(i) = row_score(X, i, a0, a1);
    result.direction = a1;
    result.scores = scores;
    result.iterations = iter;
    result.converged = converged;
    if (dead_direction) {
      // Zero-variance data: any direction is optimal.
      if (total_variance(X, a0) < 1e-300) {
        result.converged = true;
        result.scores.setZero();
      }
      continue;
    }
  }

  apply_sign_convention(result.direction, result.scores);
  result.eigenvalue = score_variance(result.scores, X.weights(), X.total_weight());

  const double total = total_variance(X, a0);
  if (m >= 2) {
    const double remaining_avg = (total - result.eigenvalue) / static_cast<double>(m - 1);
    result.near_degenerate = remaining_avg >= result.eigenvalue * (1.0 - 1e-9);
  }
  return result;
}

DataMatrix deflate(const DataMatrix& X, const PrincipalComponent& pc) {
  if (pc.origin.size() != X.cols() || pc.direction.size() != X.cols())
    throw Error("dimension-mismatch", "component dimension does not match data");
  Eigen::MatrixXd values = X.values();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double b = [&] {
      if (!X.has_gaps() || !X.gaps().row(i).any())
        return (X.values().row(i).transpose() - pc.origin).dot(pc.direction);
      double num = 0.0, den = 0.0;
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (!X.gaps()(i, j)) {
          num += (X.values()(i, j) - pc.origin(j)) * pc.direction(j);
          den += pc.direction(j) * pc.direction(j);
        }
      }
      return den > 0.0 ? num / den : 0.0;
    }();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (X.gaps()(i, j))
        values(i, j) = 0.0;
      else
        values(i, j) = X.values()(i, j) - pc.origin(j) - pc.direction(j) * b;
    }
  }
  return DataMatrix(std::move(values), X.gaps(), X.weights());
}

PcaBasis fit_components(const DataMatrix& X, int k, std::mt19937_64& rng,
                        const PcaParams& params) {
  const int limit = static_cast<int>(std::min<Eigen::Index>(X.rows() - 1, X.cols()));
  if (k < 1 || k > limit)
    throw Error("invariant-violation",
                "component count must be in [1, " + std::to_string(limit) + "]");

  PcaBasis basis;
  basis.requested = k;
  basis.components = Eigen::MatrixXd(X.cols(), 0);
  std::vector<double> eigenvalues;

  DataMatrix current = X;
  double initial_total = -1.0;
  for (int l = 0; l < k; ++l) {
    PrincipalComponent pc = fit_first_component(current, rng, params);
    if (l == 0) {
      basis.origin = pc.origin;
      initial_total = total_variance(X, pc.origin);
    }
    const double residual = total_variance(current, mean_point(current));
    if (l > 0 && residual < 1e-12 * std::max(initial_total, 1e-300)) {
      basis.complete = false;  // rank deficiency: no variance left to fit
      break;
    }
    basis.converged = basis.converged && pc.converged;

    // Orthogonalize against the accumulated basis to keep the Gram matrix tight.
    Eigen::VectorXd dir = pc.direction;
    if (basis.components.cols() > 0) {
      dir -= basis.components * (basis.components.transpose() * dir);
      const double norm = dir.norm();
      if (norm < 1e-12) {
        basis.complete = false;
        break;
      }
      dir /= norm;
    }
    basis.components.conservativeResize(Eigen::NoChange, basis.components.cols() + 1);
    basis.components.col(basis.components.cols() - 1) = dir;
    eigenvalues.push_back(pc.eigenvalue);

    if (l + 1 < k) current = deflate(current, pc);
  }

  // Deflation yields non-increasing eigenvalues up to round-off; enforce order.
  std::vector<int> order(eigenvalues.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eigenvalues[a] > eigenvalues[b]; });
  Eigen::MatrixXd sorted(X.cols(), static_cast<Eigen::Index>(order.size()));
  basis.eigenvalues = Eigen::VectorXd(static_cast<Eigen::Index>(order.size()));
  for (size_t i = 0; i < order.size(); ++i) {
    sorted.col(static_cast<Eigen::Index>(i)) = basis.components.col(order[i]);
    basis.eigenvalues(static_cast<Eigen::Index>(i)) = eigenvalues[order[i]];
  }
  basis.components = std::move(sorted);
  if (basis.count() < k) basis.complete = false;
  return basis;
}

Eigen::MatrixXd project_to_basis(const DataMatrix& X, const PcaBasis& basis) {
  if (basis.origin.size() != X.cols())
    throw Error("dimension-mismatch", "basis dimension does not match data");
  const Eigen::Index n = X.rows();
  const int k = basis.count();
  Eigen::MatrixXd coords(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (!X.has_gaps() || !X.gaps().row(i).any()) {
        coords(i, j) =
            (X.values().row(i).transpose() - basis.origin).dot(basis.components.col(j));
      } else {
        double num = 0.0, den = 0.0;
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
          if (!X.gaps()(i, c)) {
            num += (X.values()(i, c) - basis.origin(c)) * basis.components(c, j);
            den += basis.components(c, j) * basis.components(c, j);
          }
        }
        coords(i, j) = den > 0.0 ? num / den : 0.0;
      }
    }
  }
  return coords;
}

}  // namespace pgm
