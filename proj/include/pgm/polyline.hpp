#ifndef PGM_POLYLINE_HPP
#define PGM_POLYLINE_HPP

#include <iosfwd>
#include <random>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/kmeans.hpp"
#include "pgm/pca.hpp"

namespace pgm {

/// Ordered vertices; segments run between consecutive vertices.
struct PolygonalCurve {
  Eigen::MatrixXd vertices;  // (k+1) x m

  int segment_count() const { return static_cast<int>(vertices.rows()) - 1; }
};

struct PolylineParams {
  double lambda_prime = 0.13;  // penalty factor
  double beta = 0.3;           // stopping factor
  int max_segments = 200;      // safety cap on growth
  int max_outer = 500;
  int grad_max_iter = 200;     // inner gradient-descent iterations
  double grad_tol = 1e-10;     // relative improvement stop
  PcaParams pca;
};

/// Endpoint vertices: squared length of the incident segment. Interior:
/// r^2 (1 + cos of the angle between the two incident segments). Vertex
/// index is zero-based.
double curvature_penalty(const PolygonalCurve& Y, int i, double r);

/// Root mean squared weighted distance to the nearest point of the curve
/// (vertices and segments, orthogonal projection).
double polyline_msd(const DataMatrix& X, const PolygonalCurve& Y);

/// polyline_msd + (lambda / (k+1)) * sum of curvature penalties.
double penalized_error(const DataMatrix& X, const PolygonalCurve& Y, double lambda);

/// 2k+1 sets: entity v in [0, k] is vertex v; entity k+1+j is the open
/// segment j. Vertex-segment ties go to the vertex.
Partition partition_polyline(const DataMatrix& X, const PolygonalCurve& Y);

struct VertexOptimization {
  PolygonalCurve curve;
  double value = 0.0;   // penalized error at exit, fresh partition
  bool improved = true; // false when no descent step succeeded
};

/// Gradient descent with backtracking on the fixed-partition objective.
VertexOptimization optimize_vertices(const DataMatrix& X, const PolygonalCurve& Y,
                                     double lambda, const PolylineParams& params = {});

struct PolylineRound {
  int segments = 0;
  double msd = 0.0;
  double penalized = 0.0;
  double lambda = 0.0;
};

struct PolylineFit {
  PolygonalCurve curve;
  std::vector<PolylineRound> trace;
};

/// Full loop: first-principal-component segment, then rounds of
/// projection, vertex optimization, and midpoint insertion into the most
/// loaded segment, until the segment count exceeds
/// beta * N^(1/3) * r / msd.
PolylineFit fit_polyline(const DataMatrix& X, const PolylineParams& params,
                         std::mt19937_64& rng);

void write_polyline(std::ostream& out, const PolygonalCurve& Y);
PolygonalCurve read_polyline(std::istream& in);

}  // namespace pgm

#endif
