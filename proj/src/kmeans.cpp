#include "pgm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pgm {

Partition make_partition(const std::vector<int>& assignment, int k) {
  Partition p;
  p.assignment = assignment;
  p.counts.assign(static_cast<size_t>(k), 0);
  for (int a : assignment) {
    if (a < 0 || a >= k)
      throw Error("invariant-violation", "assignment index out of range");
    ++p.counts[static_cast<size_t>(a)];
  }
  return p;
}

namespace {

Eigen::VectorXd squared_dist_to_nearest(const DataMatrix& X, const Centroids& Y) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < Y.rows(); ++c)
      best = std::min(best, gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                                   Y.row(c).transpose()));
    d(i) = best;
  }
  return d;
}

}  // namespace

int kmeanspp_next_center(const DataMatrix& X, const std::vector<int>& chosen,
                         std::mt19937_64& rng) {
  if (chosen.empty()) throw Error("invariant-violation", "no centers chosen yet");
  const Eigen::Index n = X.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c : chosen)
      best = std::min(best, gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                                   X.values().row(c).transpose()));
    d(i) = best;
  }
  const double total = d.sum();
  if (total <= 0.0) {
    // All points coincide with chosen centers; fall back to uniform.
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    return static_cast<int>(pick(rng));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double target = unit(rng) * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += d(i);
    if (target < acc) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

Centroids seed_kmeanspp(const DataMatrix& X, int k, std::mt19937_64& rng) {
  if (k < 1 || k > X.rows())
    throw Error("k-too-large", "k must be in [1, N]");
  std::vector<int> chosen;
  std::uniform_int_distribution<Eigen::Index> pick(0, X.rows() - 1);
  chosen.push_back(static_cast<int>(pick(rng)));
  while (static_cast<int>(chosen.size()) < k)
    chosen.push_back(kmeanspp_next_center(X, chosen, rng));
  Centroids Y(k, X.cols());
  for (int i = 0; i < k; ++i) Y.row(i) = X.values().row(chosen[static_cast<size_t>(i)]);
  return Y;
}

Centroids seed_uniform(const DataMatrix& X, int k, std::mt19937_64& rng) {
  if (k < 1 || k > X.rows())
    throw Error("k-too-large", "k must be in [1, N]");
  std::vector<Eigen::Index> idx(static_cast<size_t>(X.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  // Fisher-Yates prefix of length k.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, X.rows() - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
  }
  Centroids Y(k, X.cols());
  for (int i = 0; i < k; ++i) Y.row(i) = X.values().row(idx[static_cast<size_t>(i)]);
  return Y;
}

double distortion(const DataMatrix& X, const Centroids& Y) {
  if (Y.rows() < 1) throw Error("invariant-violation", "no centroids");
  const Eigen::VectorXd d = squared_dist_to_nearest(X, Y);
  return d.dot(X.weights());
}

namespace {

std::vector<int> assign_nearest(const DataMatrix& X, const Centroids& Y) {
  const Eigen::Index n = X.rows();
  std::vector<int> assignment(static_cast<size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < Y.rows(); ++c) {
      const double d = gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                              Y.row(c).transpose());
      if (d < best) {  // strict: ties stay with the lowest index
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    assignment[static_cast<size_t>(i)] = best_c;
  }
  return assignment;
}

}  // namespace

KmeansResult fit_kmeans(const DataMatrix& X, int k, Seeding seeding,
                        std::mt19937_64& rng, int max_iter) {
  KmeansResult result;
  result.centroids = seeding == Seeding::kmeanspp ? seed_kmeanspp(X, k, rng)
                                                  : seed_uniform(X, k, rng);
  std::vector<int> assignment = assign_nearest(X, result.centroids);
  result.distortion_trace.push_back(distortion(X, result.centroids));

  const Eigen::Index n = X.rows();
  const Eigen::Index m = X.cols();
  result.converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Weighted means per cluster; per-coordinate over present cells.
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(k, m);
    Eigen::MatrixXd den = Eigen::MatrixXd::Zero(k, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = assignment[static_cast<size_t>(i)];
      const double w = X.weights()(i);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!X.gaps()(i, j)) {
          num(c, j) += w * X.values()(i, j);
          den(c, j) += w;
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      if ((den.row(c).array() > 0.0).any()) {
        for (Eigen::Index j = 0; j < m; ++j)
          if (den(c, j) > 0.0) result.centroids(c, j) = num(c, j) / den(c, j);
      } else {
        // Empty cluster: re-seed at the point farthest from its centroid.
        const Eigen::VectorXd d = squared_dist_to_nearest(X, result.centroids);
        Eigen::Index far = 0;
        d.maxCoeff(&far);
        result.centroids.row(c) = X.values().row(far);
      }
    }

    std::vector<int> next = assign_nearest(X, result.centroids);
    result.distortion_trace.push_back(distortion(X, result.centroids));
    result.iterations = iter + 1;
    if (next == assignment) {
      result.converged = true;
      break;
    }
    assignment = std::move(next);
  }

  result.partition = make_partition(assignment, k);
  return result;
}

}  // namespace pgm
