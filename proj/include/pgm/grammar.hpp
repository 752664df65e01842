#ifndef PGM_GRAMMAR_HPP
#define PGM_GRAMMAR_HPP

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "pgm/elastic_graph.hpp"
#include "pgm/pca.hpp"

namespace pgm {

enum class GrammarOpKind { add_node, bisect_edge, remove_leaf, remove_edge };

const char* grammar_op_name(GrammarOpKind kind);
GrammarOpKind grammar_op_from_name(const std::string& name);

/// A grammar is an ordered set of operations applied in one growth round.
using Grammar = std::vector<GrammarOpKind>;

Grammar grow_grammar();    // add a node, bisect an edge
Grammar shrink_grammar();  // remove a leaf, remove an edge

struct ScPolicy {
  enum class Kind { vertex_count, branch_cap };
  Kind kind = Kind::vertex_count;
  int b_max = 0;  // branch_cap only: max number of 3-stars
};

/// Vertex-count policy returns |V|. Branch policy returns the number of
/// 3-stars when it is within b_max and no star of order >= 4 exists,
/// +infinity otherwise.
double structural_complexity(const ElasticGraph& G, const ScPolicy& policy);

struct ComplexityBudget {
  ScPolicy policy;
  double sc_max = 0.0;
  int cc_max = 0;  // max number of adopted grammar applications
};

struct Candidate {
  ElasticGraph graph;
  GrammarOpKind op;
  int site = 0;  // vertex index for add/remove-leaf, edge index otherwise
  Embedding embedding;
  EnergyBreakdown energy;
};

/// Cluster information used to seed new vertices near their data support.
struct SeedContext {
  const DataMatrix* data = nullptr;
  const Partition* partition = nullptr;
};

/// Topology-only application of an operation at one site. The graph must be
/// primitive; the star structure of the result is recomputed with star
/// modulus mu, and new edges get modulus lambda.
ElasticGraph apply_op_topology(GrammarOpKind op, const ElasticGraph& G, int site,
                               double lambda, double mu);

/// Seed position for a vertex freshly attached to `parent`: a small step
/// toward the centroid of the parent's cluster, or a fixed epsilon away
/// from the parent's neighbors when the cluster is empty.
Eigen::RowVectorXd seed_new_vertex_position(const ElasticGraph& G, const Embedding& phi,
                                            int parent, const SeedContext& ctx);

/// All applications of one operation, one candidate per site, with seeded
/// (not yet optimized) embeddings. An operation with no valid site returns
/// an empty list.
std::vector<Candidate> apply_grammar_op(GrammarOpKind op, const ElasticGraph& G,
                                        const Embedding& phi, double lambda, double mu,
                                        const SeedContext& ctx = {});

struct GrowParams {
  double lambda = 0.01;  // stretching modulus for graph edges
  double mu = 0.1;       // bending modulus for stars
  OptimizeParams candidate_opt{1e-8, 20, false};  // reduced cap per candidate
  OptimizeParams final_opt{1e-8, 100, false};     // adopted candidate refit
  bool exhaustive = false;  // optimize every candidate at full tolerance
  PcaParams pca;            // first-principal-line initialization
};

struct GrowthRecord {
  int round = 0;
  GrammarOpKind op = GrammarOpKind::add_node;
  int site = 0;
  double sc = 0.0;
  EnergyBreakdown energy;
  int vertex_count = 0;
  std::vector<double> candidate_energies;  // every permissible candidate this round
};

struct GrowthResult {
  ElasticGraph graph;
  Embedding embedding;
  std::vector<GrowthRecord> log;
  std::vector<std::string> warnings;  // skipped candidates (solver failures)
};

/// Two vertices on the first principal line, spanning all data projections.
std::pair<ElasticGraph, Embedding> initial_segment(const DataMatrix& X,
                                                   const GrowParams& params,
                                                   std::mt19937_64& rng);

/// Greedy growth: per round, apply every operation of the current grammar
/// everywhere, drop candidates over the SC ceiling, optimize the rest, adopt
/// the lowest-energy one. Stops when no permissible candidate remains or
/// cc_max applications were adopted. The grammar sequence cycles.
GrowthResult grow_principal_graph(const DataMatrix& X,
                                  const std::vector<Grammar>& sequence,
                                  const ComplexityBudget& budget,
                                  const GrowParams& params, std::mt19937_64& rng);

/// Number of adopted grammar applications.
int construction_complexity(const std::vector<GrowthRecord>& log);

/// Rebuilds the final graph from a growth log by reapplying every recorded
/// operation to the 2-vertex segment graph.
ElasticGraph replay_growth(const std::vector<GrowthRecord>& log, double lambda,
                           double mu);

void write_growth_log(std::ostream& out, const std::vector<GrowthRecord>& log);
std::vector<GrowthRecord> read_growth_log(std::istream& in);

}  // namespace pgm

#endif
