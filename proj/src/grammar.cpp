#include "pgm/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "pgm/io.hpp"

namespace pgm {

const char* grammar_op_name(GrammarOpKind kind) {
  switch (kind) {
    case GrammarOpKind::add_node: return "add-node";
    case GrammarOpKind::bisect_edge: return "bisect-edge";
    case GrammarOpKind::remove_leaf: return "remove-leaf";
    case GrammarOpKind::remove_edge: return "remove-edge";
  }
  return "unknown";
}

GrammarOpKind grammar_op_from_name(const std::string& name) {
  if (name == "add-node") return GrammarOpKind::add_node;
  if (name == "bisect-edge") return GrammarOpKind::bisect_edge;
  if (name == "remove-leaf") return GrammarOpKind::remove_leaf;
  if (name == "remove-edge") return GrammarOpKind::remove_edge;
  throw Error("parse-error", "unknown grammar operation '" + name + "'");
}

Grammar grow_grammar() { return {GrammarOpKind::add_node, GrammarOpKind::bisect_edge}; }

Grammar shrink_grammar() {
  return {GrammarOpKind::remove_leaf, GrammarOpKind::remove_edge};
}

double structural_complexity(const ElasticGraph& G, const ScPolicy& policy) {
  if (policy.kind == ScPolicy::Kind::vertex_count)
    return static_cast<double>(G.vertex_count());
  int three_stars = 0;
  for (const auto& star : G.stars()) {
    if (star.order() >= 4) return std::numeric_limits<double>::infinity();
    if (star.order() == 3) ++three_stars;
  }
  if (three_stars > policy.b_max) return std::numeric_limits<double>::infinity();
  return static_cast<double>(three_stars);
}

namespace {

std::vector<Edge> reindexed_without(const std::vector<Edge>& edges, int removed) {
  std::vector<Edge> out;
  for (const auto& e : edges) {
    if (e.a == removed || e.b == removed) continue;
    Edge copy = e;
    if (copy.a > removed) --copy.a;
    if (copy.b > removed) --copy.b;
    out.push_back(copy);
  }
  return out;
}

/// Merges parallel edges produced by a contraction, adding their moduli.
std::vector<Edge> merge_parallel(std::vector<Edge> edges) {
  std::map<std::pair<int, int>, double> acc;
  for (auto& e : edges) {
    const auto key = std::minmax(e.a, e.b);
    acc[{key.first, key.second}] += e.lambda;
  }
  std::vector<Edge> out;
  for (const auto& [key, lambda] : acc) out.push_back(Edge{key.first, key.second, lambda});
  return out;
}

}  // namespace

ElasticGraph apply_op_topology(GrammarOpKind op, const ElasticGraph& G, int site,
                               double lambda, double mu) {
  if (!G.is_primitive())
    throw Error("invariant-violation",
                "grammar operations require a primitive elastic graph");
  const int n = G.vertex_count();
  std::vector<Edge> edges = G.edges();

  switch (op) {
    case GrammarOpKind::add_node: {
      if (site < 0 || site >= n) throw Error("invariant-violation", "bad vertex site");
      edges.push_back(Edge{site, n, lambda});
      return ElasticGraph::primitive(n + 1, std::move(edges), mu);
    }
    case GrammarOpKind::bisect_edge: {
      if (site < 0 || site >= static_cast<int>(edges.size()))
        throw Error("invariant-violation", "bad edge site");
      const Edge original = edges[static_cast<size_t>(site)];
      edges.erase(edges.begin() + site);
      edges.push_back(Edge{original.a, n, original.lambda});
      edges.push_back(Edge{original.b, n, original.lambda});
      return ElasticGraph::primitive(n + 1, std::move(edges), mu);
    }
    case GrammarOpKind::remove_leaf: {
      if (site < 0 || site >= n || G.degree(site) != 1)
        throw Error("invariant-violation", "site is not a leaf");
      if (n < 2) throw Error("invariant-violation", "cannot remove the last vertex");
      return ElasticGraph::primitive(n - 1, reindexed_without(edges, site), mu);
    }
    case GrammarOpKind::remove_edge: {
      if (site < 0 || site >= static_cast<int>(edges.size()))
        throw Error("invariant-violation", "bad edge site");
      const Edge target = edges[static_cast<size_t>(site)];
      const int keep = target.a;     // a < b by construction
      const int drop = target.b;
      std::vector<Edge> rewired;
      for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
        if (i == site) continue;
        Edge e = edges[static_cast<size_t>(i)];
        if (e.a == drop) e.a = keep;
        if (e.b == drop) e.b = keep;
        rewired.push_back(e);
      }
      rewired = merge_parallel(std::move(rewired));
      // drop has no incident edges left, so this only shifts indices
      return ElasticGraph::primitive(n - 1, reindexed_without(rewired, drop), mu);
    }
  }
  throw Error("invariant-violation", "unknown grammar operation");
}

namespace {

Eigen::RowVectorXd cluster_centroid(const SeedContext& ctx, int vertex,
                                    Eigen::Index dims, bool& found) {
  found = false;
  Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(dims);
  Eigen::RowVectorXd den = Eigen::RowVectorXd::Zero(dims);
  if (!ctx.data || !ctx.partition) return num;
  const DataMatrix& X = *ctx.data;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (ctx.partition->assignment[static_cast<size_t>(i)] != vertex) continue;
    const double w = X.weights()(i);
    for (Eigen::Index j = 0; j < dims; ++j) {
      if (!X.gaps()(i, j)) {
        num(j) += w * X.values()(i, j);
        den(j) += w;
      }
    }
  }
  if ((den.array() > 0.0).all()) {
    found = true;
    num.array() /= den.array();
  }
  return num;
}

double mean_edge_length(const ElasticGraph& G, const Embedding& phi) {
  if (G.edges().empty()) return 1.0;
  double acc = 0.0;
  for (const auto& e : G.edges()) acc += (phi.row(e.a) - phi.row(e.b)).norm();
  return acc / static_cast<double>(G.edges().size());
}

Embedding embedding_without_row(const Embedding& phi, int removed) {
  Embedding out(phi.rows() - 1, phi.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    if (static_cast<int>(i) == removed) continue;
    out.row(r++) = phi.row(i);
  }
  return out;
}

}  // namespace

Eigen::RowVectorXd seed_new_vertex_position(const ElasticGraph& G, const Embedding& phi,
                                            int parent, const SeedContext& ctx) {
  bool found = false;
  const Eigen::RowVectorXd centroid = cluster_centroid(ctx, parent, phi.cols(), found);
  if (found) {
    const Eigen::RowVectorXd offset = 0.1 * (centroid - phi.row(parent));
    if (offset.norm() > 0.0) return phi.row(parent) + offset;
  }
  // Empty cluster: a fixed epsilon away from the neighbors' mean direction.
  const double eps = 0.01 * mean_edge_length(G, phi);
  const auto& nbrs = G.neighbors()[static_cast<size_t>(parent)];
  if (!nbrs.empty()) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.cols());
    for (int u : nbrs) mean += phi.row(u);
    mean /= static_cast<double>(nbrs.size());
    Eigen::RowVectorXd away = phi.row(parent) - mean;
    const double norm = away.norm();
    if (norm > 0.0) return phi.row(parent) + (eps / norm) * away;
  }
  Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(phi.cols());
  unit(0) = 1.0;
  return phi.row(parent) + eps * unit;
}

std::vector<Candidate> apply_grammar_op(GrammarOpKind op, const ElasticGraph& G,
                                        const Embedding& phi, double lambda, double mu,
                                        const SeedContext& ctx) {
  std::vector<Candidate> out;
  const int n = G.vertex_count();

  switch (op) {
    case GrammarOpKind::add_node:
      for (int v = 0; v < n; ++v) {
        Candidate c{apply_op_topology(op, G, v, lambda, mu), op, v, {}, {}};
        c.embedding = Embedding(n + 1, phi.cols());
        c.embedding.topRows(n) = phi;
        c.embedding.row(n) = seed_new_vertex_position(G, phi, v, ctx);
        out.push_back(std::move(c));
      }
      break;
    case GrammarOpKind::bisect_edge:
      for (int i = 0; i < static_cast<int>(G.edges().size()); ++i) {
        const Edge& e = G.edges()[static_cast<size_t>(i)];
        Candidate c{apply_op_topology(op, G, i, lambda, mu), op, i, {}, {}};
        c.embedding = Embedding(n + 1, phi.cols());
        c.embedding.topRows(n) = phi;
        c.embedding.row(n) = 0.5 * (phi.row(e.a) + phi.row(e.b));
        out.push_back(std::move(c));
      }
      break;
    case GrammarOpKind::remove_leaf:
      if (n >= 2) {
        for (int v = 0; v < n; ++v) {
          if (G.degree(v) != 1) continue;
          Candidate c{apply_op_topology(op, G, v, lambda, mu), op, v, {}, {}};
          c.embedding = embedding_without_row(phi, v);
          out.push_back(std::move(c));
        }
      }
      break;
    case GrammarOpKind::remove_edge:
      if (n >= 2) {
        for (int i = 0; i < static_cast<int>(G.edges().size()); ++i) {
          Candidate c{apply_op_topology(op, G, i, lambda, mu), op, i, {}, {}};
          c.embedding = embedding_without_row(phi, G.edges()[static_cast<size_t>(i)].b);
          out.push_back(std::move(c));
        }
      }
      break;
  }
  return out;
}

std::pair<ElasticGraph, Embedding> initial_segment(const DataMatrix& X,
                                                   const GrowParams& params,
                                                   std::mt19937_64& rng) {
  const PrincipalComponent pc = fit_first_component(X, rng, params.pca);
  const double lo = pc.scores.minCoeff();
  const double hi = pc.scores.maxCoeff();
  Embedding phi(2, X.cols());
  phi.row(0) = (pc.origin + lo * pc.direction).transpose();
  phi.row(1) = (pc.origin + hi * pc.direction).transpose();
  ElasticGraph G = ElasticGraph::primitive(2, {Edge{0, 1, params.lambda}}, params.mu);
  return {std::move(G), std::move(phi)};
}

GrowthResult grow_principal_graph(const DataMatrix& X,
                                  const std::vector<Grammar>& sequence,
                                  const ComplexityBudget& budget,
                                  const GrowParams& params, std::mt19937_64& rng) {
  if (sequence.empty()) throw Error("invariant-violation", "empty grammar sequence");

  auto [graph, phi] = initial_segment(X, params, rng);
  if (structural_complexity(graph, budget.policy) > budget.sc_max)
    throw Error("invariant-violation",
                "complexity budget does not admit the initial 2-vertex graph");

  GrowthResult result{std::move(graph), std::move(phi), {}, {}};
  int applications = 0;
  for (size_t round = 0; applications < budget.cc_max; ++round) {
    const Grammar& grammar = sequence[round % sequence.size()];
    const Partition current_partition = partition_by_vertices(X, result.embedding);
    SeedContext ctx{&X, &current_partition};

    std::vector<Candidate> permissible;
    for (GrammarOpKind op : grammar) {
      for (auto& cand :
           apply_grammar_op(op, result.graph, result.embedding, params.lambda,
                            params.mu, ctx)) {
        if (structural_complexity(cand.graph, budget.policy) <= budget.sc_max)
          permissible.push_back(std::move(cand));
      }
    }
    if (permissible.empty()) break;

    const OptimizeParams& opt =
        params.exhaustive ? params.final_opt : params.candidate_opt;
    int best = -1;
    std::vector<double> energies;
    for (size_t i = 0; i < permissible.size(); ++i) {
      try {
        OptimizeResult r = optimize_embedding(X, permissible[i].graph,
                                              permissible[i].embedding, opt);
        permissible[i].embedding = std::move(r.embedding);
        permissible[i].energy = r.trace.back();
        energies.push_back(permissible[i].energy.total());
        if (best < 0 || permissible[i].energy.total() < permissible[static_cast<size_t>(best)].energy.total())
          best = static_cast<int>(i);
      } catch (const Error& err) {
        energies.push_back(std::numeric_limits<double>::quiet_NaN());
        result.warnings.push_back(std::string("candidate ") +
                                  grammar_op_name(permissible[i].op) + " at site " +
                                  std::to_string(permissible[i].site) + " skipped: " +
                                  err.what());
      }
    }
    if (best < 0) break;  // every candidate failed

    Candidate& adopted = permissible[static_cast<size_t>(best)];
    OptimizeResult refined =
        optimize_embedding(X, adopted.graph, adopted.embedding, params.final_opt);
    result.graph = std::move(adopted.graph);
    result.embedding = std::move(refined.embedding);

    GrowthRecord record;
    record.round = static_cast<int>(round);
    record.op = adopted.op;
    record.site = adopted.site;
    record.sc = structural_complexity(result.graph, budget.policy);
    record.energy = refined.trace.back();
    record.vertex_count = result.graph.vertex_count();
    record.candidate_energies = std::move(energies);
    result.log.push_back(std::move(record));
    ++applications;
  }
  return result;
}

int construction_complexity(const std::vector<GrowthRecord>& log) {
  return static_cast<int>(log.size());
}

ElasticGraph replay_growth(const std::vector<GrowthRecord>& log, double lambda,
                           double mu) {
  ElasticGraph G = ElasticGraph::primitive(2, {Edge{0, 1, lambda}}, mu);
  for (const auto& record : log)
    G = apply_op_topology(record.op, G, record.site, lambda, mu);
  return G;
}

void write_growth_log(std::ostream& out, const std::vector<GrowthRecord>& log) {
  out << "pgm-growth-log 1\n";
  out << "records " << log.size() << "\n";
  for (const auto& r : log) {
    out << r.round << " " << grammar_op_name(r.op) << " " << r.site << " "
        << format_double(r.sc) << " " << format_double(r.energy.data_term) << " "
        << format_double(r.energy.stretch) << " " << format_double(r.energy.bending)
        << " " << r.vertex_count << "\n";
  }
}

std::vector<GrowthRecord> read_growth_log(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-growth-log" || version != 1)
    throw Error("parse-error", "not a growth log");
  std::string kw;
  size_t count = 0;
  in >> kw >> count;
  if (kw != "records") throw Error("parse-error", "expected records");
  std::vector<GrowthRecord> log(count);
  for (auto& r : log) {
    std::string op;
    in >> r.round >> op >> r.site >> r.sc >> r.energy.data_term >> r.energy.stretch >>
        r.energy.bending >> r.vertex_count;
    r.op = grammar_op_from_name(op);
  }
  if (!in) throw Error("parse-error", "truncated growth log");
  return log;
}

}  // namespace pgm
