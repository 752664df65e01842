#ifndef PGM_KMEANS_HPP
#define PGM_KMEANS_HPP

#include <random>
#include <vector>

#include "pgm/dataset.hpp"

namespace pgm {

/// Cluster centers, one per row.
using Centroids = Eigen::MatrixXd;

/// Assignment of each observation to a target index (cluster, vertex, ...).
struct Partition {
  std::vector<int> assignment;  // one entry per observation
  std::vector<int> counts;      // occurrences per target

  int targets() const { return static_cast<int>(counts.size()); }
};

Partition make_partition(const std::vector<int>& assignment, int k);

enum class Seeding { uniform, kmeanspp };

/// Index of the next center drawn with probability proportional to the
/// squared distance to the nearest already-chosen center.
int kmeanspp_next_center(const DataMatrix& X, const std::vector<int>& chosen,
                         std::mt19937_64& rng);

/// First center uniform over X, the rest by kmeanspp_next_center.
Centroids seed_kmeanspp(const DataMatrix& X, int k, std::mt19937_64& rng);

/// k distinct rows of X, uniformly.
Centroids seed_uniform(const DataMatrix& X, int k, std::mt19937_64& rng);

/// Weighted sum of squared distances to the nearest centroid.
double distortion(const DataMatrix& X, const Centroids& Y);

struct KmeansResult {
  Centroids centroids;
  Partition partition;
  std::vector<double> distortion_trace;  // after seeding and after every sweep
  int iterations = 0;
  bool converged = true;
};

/// Lloyd iteration: proximity partition then weighted-mean re-estimation,
/// until assignments stabilize or max_iter. Nearest-centroid ties break to
/// the lowest centroid index. A cluster that empties is re-seeded at the
/// point with the largest current squared distance.
KmeansResult fit_kmeans(const DataMatrix& X, int k, Seeding seeding,
                        std::mt19937_64& rng, int max_iter = 200);

}  // namespace pgm

#endif
