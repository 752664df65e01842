#ifndef PGM_ELASTIC_MAP_HPP
#define PGM_ELASTIC_MAP_HPP

#include <array>
#include <iosfwd>
#include <random>
#include <vector>

#include "pgm/elastic_graph.hpp"
#include "pgm/pca.hpp"

namespace pgm {

enum class NetTopology { segment, rectangle, sphere };

const char* net_topology_name(NetTopology t);
NetTopology net_topology_from_name(const std::string& name);

/// Regular grid-shaped elastic graph with rib (2-star) families and integer
/// internal coordinates. Edge and star moduli in `graph` hold RELATIVE
/// factors (1 except for the sphere's length-corrected edges); fitting
/// scales them by the actual moduli.
struct ElasticNet {
  ElasticGraph graph;
  Eigen::MatrixXi internal_coords;  // one row per vertex
  int dim = 1;
  NetTopology topology = NetTopology::segment;
  std::vector<int> shape;
  std::vector<std::array<int, 3>> triangles;  // dim-2 interpolation cells
};

/// Grid net: shape gives per-axis vertex counts (each >= 2). Segment for
/// one axis, rectangle for two. The sphere takes {longitudes >= 3,
/// latitude rings >= 1} and closes the grid with two pole vertices; its
/// shorter edges get proportionally larger relative stretching factors.
ElasticNet make_elastic_net(const std::vector<int>& shape, NetTopology topology);

/// Resolution scaling: lambda = lambda0 * s^((2-dim)/dim),
/// mu = mu0 * r^((2-dim)/dim) for s edges and r ribs.
std::pair<double, double> moduli_for_resolution(double lambda0, double mu0, int dim,
                                                int edge_count, int rib_count);

struct SofteningSchedule {
  std::vector<double> multipliers{1e3, 1e2, 10.0, 1.0};  // strictly decreasing to 1
  double lambda_base = 0.01;
  double mu_base = 0.1;
};

struct ElasticMapModel {
  ElasticNet net;
  Embedding embedding;
  std::vector<std::vector<EnergyBreakdown>> epoch_traces;
};

/// Softening fit: node positions start on the linear manifold spanned by
/// the first dim(G) principal components (grid stretched over the data
/// projection range per axis); each epoch scales the moduli by its
/// multiplier and reoptimizes.
ElasticMapModel fit_elastic_map(const DataMatrix& X, const ElasticNet& net,
                                const SofteningSchedule& schedule,
                                const OptimizeParams& params, std::mt19937_64& rng);

struct MapProjection {
  Eigen::VectorXd internal;  // continuous internal coordinates
  Eigen::VectorXd ambient;   // foot point on the piecewise-linear map
  double distance = 0.0;
};

/// Nearest point on the piecewise-linear interpolation of the fitted net:
/// edge segments for dim 1, triangulated cells for dim 2. Gapped inputs
/// project within their present coordinates.
MapProjection project_to_map(const GappedVector& x, const ElasticMapModel& model);

void write_map_model(std::ostream& out, const ElasticMapModel& model);
ElasticMapModel read_map_model(std::istream& in);

}  // namespace pgm

#endif
