#ifndef PGM_ELASTIC_GRAPH_HPP
#define PGM_ELASTIC_GRAPH_HPP

#include <iosfwd>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/kmeans.hpp"

namespace pgm {

struct Edge {
  int a = 0;
  int b = 0;
  double lambda = 1.0;  // stretching modulus, > 0
};

/// A k-star: center vertex plus k >= 2 ordered leaves, all neighbors of the
/// center through existing edges.
struct Star {
  int center = 0;
  std::vector<int> leaves;
  double mu = 1.0;  // bending modulus, > 0

  int order() const { return static_cast<int>(leaves.size()); }
};

/// Undirected graph with stretching moduli on edges and a selected family
/// of k-stars carrying bending moduli. Immutable after construction.
class ElasticGraph {
 public:
  /// Single vertex, no edges.
  ElasticGraph() : ElasticGraph(1, {}, {}) {}

  /// Explicit star family. Validates: no self-loops or duplicate edges,
  /// positive moduli, star leaves pairwise distinct neighbors of the center.
  ElasticGraph(int vertex_count, std::vector<Edge> edges, std::vector<Star> stars,
               bool primitive = false);

  /// Star family derived from the topology: every vertex of degree >= 2
  /// carries exactly one star over all its neighbors, with modulus mu.
  static ElasticGraph primitive(int vertex_count, std::vector<Edge> edges, double mu);

  int vertex_count() const { return vertex_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Star>& stars() const { return stars_; }
  bool is_primitive() const { return primitive_; }

  const std::vector<std::vector<int>>& neighbors() const { return adjacency_; }
  int degree(int v) const { return static_cast<int>(adjacency_[static_cast<size_t>(v)].size()); }

  /// Copy with every edge modulus multiplied by edge_scale and every star
  /// modulus by star_scale.
  ElasticGraph scaled(double edge_scale, double star_scale) const;

  /// True when the two graphs have identical topology and star families
  /// (moduli ignored), with identical vertex indexing.
  bool same_structure(const ElasticGraph& other) const;

 private:
  int vertex_count_;
  std::vector<Edge> edges_;
  std::vector<Star> stars_;
  bool primitive_;
  std::vector<std::vector<int>> adjacency_;
};

/// Vertex positions, one row per graph vertex.
using Embedding = Eigen::MatrixXd;

struct EnergyBreakdown {
  double data_term = 0.0;  // weighted mean squared distance to nearest vertex
  double stretch = 0.0;    // edge term
  double bending = 0.0;    // star term

  double total() const { return data_term + stretch + bending; }
};

/// The e (edge) and s (star) coupling matrices; both symmetric PSD with
/// zero row sums.
struct ElasticMatrices {
  Eigen::MatrixXd e;
  Eigen::MatrixXd s;
};

/// Edge and star energies of an embedding (data_term left 0).
EnergyBreakdown elastic_energy(const ElasticGraph& G, const Embedding& phi);

/// Full functional: squared weighted mean distance to the nearest embedded
/// vertex plus the elastic terms.
EnergyBreakdown total_functional(const DataMatrix& X, const ElasticGraph& G,
                                 const Embedding& phi);

/// Nearest embedded vertex per observation, ties to the lowest index.
Partition partition_by_vertices(const DataMatrix& X, const Embedding& phi);

ElasticMatrices build_elastic_matrices(const ElasticGraph& G);

struct SolveParams {
  bool ridge = false;  // opt-in diagonal ridge for exploratory runs
};

/// One exact minimization of the functional for a fixed partition: solves
/// the symmetric linear system once per data dimension (per coordinate when
/// the data has gaps). Throws "singular-system" naming the unsupported
/// vertices when the system cannot determine a position.
Embedding solve_embedding_step(const DataMatrix& X, const ElasticGraph& G,
                               const Partition& partition,
                               const ElasticMatrices& matrices,
                               const SolveParams& params = {});

struct OptimizeParams {
  double tol = 1e-8;  // max vertex displacement for convergence
  int max_iter = 100;
  bool ridge = false;
};

struct OptimizeResult {
  Embedding embedding;
  std::vector<EnergyBreakdown> trace;  // initial energy plus one entry per step
  Partition partition;
  int iterations = 0;
  bool converged = true;
};

/// Alternates partition_by_vertices and solve_embedding_step until the max
/// vertex displacement drops below tol, the partition repeats, or max_iter.
OptimizeResult optimize_embedding(const DataMatrix& X, const ElasticGraph& G,
                                  const Embedding& phi0,
                                  const OptimizeParams& params = {});

/// True iff every star's center sits at the mean of its leaves within tol.
bool is_pluriharmonic(const ElasticGraph& G, const Embedding& phi, double tol);

/// Vertices that are not the center of any selected star.
std::vector<int> corner_points(const ElasticGraph& G);

/// Plain-text round-trip serialization.
void write_graph(std::ostream& out, const ElasticGraph& G);
ElasticGraph read_graph(std::istream& in);
void write_positions(std::ostream& out, const Embedding& phi);
Embedding read_positions(std::istream& in);

}  // namespace pgm

#endif
