#include "pgm/elastic_graph.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "pgm/io.hpp"

namespace pgm {

ElasticGraph::ElasticGraph(int vertex_count, std::vector<Edge> edges,
                           std::vector<Star> stars, bool primitive)
    : vertex_count_(vertex_count),
      edges_(std::move(edges)),
      stars_(std::move(stars)),
      primitive_(primitive) {
  if (vertex_count_ < 1) throw Error("invariant-violation", "graph needs a vertex");

  std::set<std::pair<int, int>> seen;
  adjacency_.assign(static_cast<size_t>(vertex_count_), {});
  for (auto& e : edges_) {
    if (e.a == e.b) throw Error("invariant-violation", "self-loop");
    if (e.a < 0 || e.b < 0 || e.a >= vertex_count_ || e.b >= vertex_count_)
      throw Error("invariant-violation", "edge endpoint out of range");
    if (!(e.lambda > 0.0))
      throw Error("invariant-violation", "edge modulus must be positive");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (!seen.insert({e.a, e.b}).second)
      throw Error("invariant-violation", "duplicate edge");
    adjacency_[static_cast<size_t>(e.a)].push_back(e.b);
    adjacency_[static_cast<size_t>(e.b)].push_back(e.a);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());

  for (const auto& star : stars_) {
    if (star.center < 0 || star.center >= vertex_count_)
      throw Error("invariant-violation", "star center out of range");
    if (star.order() < 2)
      throw Error("invariant-violation", "star needs at least 2 leaves");
    if (!(star.mu > 0.0))
      throw Error("invariant-violation", "star modulus must be positive");
    std::set<int> leaves;
    for (int leaf : star.leaves) {
      if (!leaves.insert(leaf).second)
        throw Error("invariant-violation", "duplicate star leaf");
      if (!seen.count({std::min(star.center, leaf), std::max(star.center, leaf)}))
        throw Error("invariant-violation",
                    "star leaf " + std::to_string(leaf) + " is not a neighbor of center " +
                        std::to_string(star.center));
    }
  }

  if (primitive_) {
    std::vector<int> star_of(static_cast<size_t>(vertex_count_), -1);
    for (size_t si = 0; si < stars_.size(); ++si) {
      const auto& star = stars_[si];
      if (star_of[static_cast<size_t>(star.center)] != -1)
        throw Error("invariant-violation", "primitive graph has two stars at one center");
      star_of[static_cast<size_t>(star.center)] = static_cast<int>(si);
    }
    for (int v = 0; v < vertex_count_; ++v) {
      if (degree(v) < 2) {
        if (star_of[static_cast<size_t>(v)] != -1)
          throw Error("invariant-violation", "primitive graph has a star at a terminal");
        continue;
      }
      const int si = star_of[static_cast<size_t>(v)];
      if (si < 0)
        throw Error("invariant-violation",
                    "primitive graph misses the star at vertex " + std::to_string(v));
      std::vector<int> leaves = stars_[static_cast<size_t>(si)].leaves;
      std::sort(leaves.begin(), leaves.end());
      if (leaves != adjacency_[static_cast<size_t>(v)])
        throw Error("invariant-violation",
                    "primitive star at vertex " + std::to_string(v) +
                        " does not cover all neighbors");
    }
  }
}

ElasticGraph ElasticGraph::primitive(int vertex_count, std::vector<Edge> edges,
                                     double mu) {
  ElasticGraph skeleton(vertex_count, std::move(edges), {});
  std::vector<Star> stars;
  for (int v = 0; v < vertex_count; ++v) {
    if (skeleton.degree(v) >= 2)
      stars.push_back(Star{v, skeleton.neighbors()[static_cast<size_t>(v)], mu});
  }
  return ElasticGraph(vertex_count, skeleton.edges(), std::move(stars), true);
}

ElasticGraph ElasticGraph::scaled(double edge_scale, double star_scale) const {
  std::vector<Edge> edges = edges_;
  std::vector<Star> stars = stars_;
  for (auto& e : edges) e.lambda *= edge_scale;
  for (auto& s : stars) s.mu *= star_scale;
  return ElasticGraph(vertex_count_, std::move(edges), std::move(stars), primitive_);
}

bool ElasticGraph::same_structure(const ElasticGraph& other) const {
  if (vertex_count_ != other.vertex_count_) return false;
  auto edge_key = [](const ElasticGraph& g) {
    std::vector<std::pair<int, int>> k;
    for (const auto& e : g.edges_) k.emplace_back(e.a, e.b);
    std::sort(k.begin(), k.end());
    return k;
  };
  if (edge_key(*this) != edge_key(other)) return false;
  auto star_key = [](const ElasticGraph& g) {
    std::vector<std::pair<int, std::vector<int>>> k;
    for (const auto& s : g.stars_) {
      std::vector<int> leaves = s.leaves;
      std::sort(leaves.begin(), leaves.end());
      k.emplace_back(s.center, std::move(leaves));
    }
    std::sort(k.begin(), k.end());
    return k;
  };
  return star_key(*this) == star_key(other);
}

EnergyBreakdown elastic_energy(const ElasticGraph& G, const Embedding& phi) {
  if (phi.rows() != G.vertex_count())
    throw Error("dimension-mismatch", "embedding does not cover all vertices");
  EnergyBreakdown out;
  for (const auto& e : G.edges())
    out.stretch += e.lambda * (phi.row(e.a) - phi.row(e.b)).squaredNorm();
  for (const auto& star : G.stars()) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.cols());
    for (int leaf : star.leaves) mean += phi.row(leaf);
    mean /= static_cast<double>(star.order());
    out.bending += star.mu * (phi.row(star.center) - mean).squaredNorm();
  }
  return out;
}

EnergyBreakdown total_functional(const DataMatrix& X, const ElasticGraph& G,
                                 const Embedding& phi) {
  if (phi.cols() != X.cols())
    throw Error("dimension-mismatch", "embedding dimension does not match data");
  EnergyBreakdown out = elastic_energy(G, phi);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index v = 0; v < phi.rows(); ++v)
      best = std::min(best, gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                                   phi.row(v).transpose()));
    acc += X.weights()(i) * best;
  }
  out.data_term = acc / X.total_weight();
  return out;
}

Partition partition_by_vertices(const DataMatrix& X, const Embedding& phi) {
  const Eigen::Index n = X.rows();
  std::vector<int> assignment(static_cast<size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_v = 0;
    for (Eigen::Index v = 0; v < phi.rows(); ++v) {
      const double d = gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                              phi.row(v).transpose());
      if (d < best) {
        best = d;
        best_v = static_cast<int>(v);
      }
    }
    assignment[static_cast<size_t>(i)] = best_v;
  }
  return make_partition(assignment, static_cast<int>(phi.rows()));
}

ElasticMatrices build_elastic_matrices(const ElasticGraph& G) {
  const int n = G.vertex_count();
  ElasticMatrices out;
  out.e = Eigen::MatrixXd::Zero(n, n);
  out.s = Eigen::MatrixXd::Zero(n, n);
  for (const auto& edge : G.edges()) {
    out.e(edge.a, edge.a) += edge.lambda;
    out.e(edge.b, edge.b) += edge.lambda;
    out.e(edge.a, edge.b) -= edge.lambda;
    out.e(edge.b, edge.a) -= edge.lambda;
  }
  for (const auto& star : G.stars()) {
    const double k = static_cast<double>(star.order());
    out.s(star.center, star.center) += star.mu;
    for (int la : star.leaves)
      for (int lb : star.leaves) out.s(la, lb) += star.mu / (k * k);
    for (int leaf : star.leaves) {
      out.s(star.center, leaf) -= star.mu / k;
      out.s(leaf, star.center) -= star.mu / k;
    }
  }
  return out;
}

namespace {

std::string vertex_list(const std::vector<int>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(vs[i]);
  }
  return out;
}

Embedding solve_one_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const std::vector<int>& empty_clusters) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::MatrixXd Y = ldlt.solve(B);
  const double scale = std::max(1.0, B.norm());
  if (!Y.allFinite() || (A * Y - B).norm() > 1e-8 * scale)
    throw Error("singular-system",
                "linear system is singular; vertices with empty clusters: {" +
                    vertex_list(empty_clusters) + "}");
  return Y;
}

}  // namespace

Embedding solve_embedding_step(const DataMatrix& X, const ElasticGraph& G,
                               const Partition& partition,
                               const ElasticMatrices& matrices,
                               const SolveParams& params) {
  const int n = G.vertex_count();
  const Eigen::Index m = X.cols();
  if (partition.targets() != n)
    throw Error("dimension-mismatch", "partition does not match vertex count");
  if (static_cast<Eigen::Index>(partition.assignment.size()) != X.rows())
    throw Error("dimension-mismatch", "partition does not match observation count");

  const double total_w = X.total_weight();
  Eigen::MatrixXd base = matrices.e + matrices.s;
  if (params.ridge) {
    const double ridge = 1e-12 * base.trace() / static_cast<double>(n);
    base.diagonal().array() += ridge;
  }

  std::vector<int> empty_clusters;
  for (int v = 0; v < n; ++v)
    if (partition.counts[static_cast<size_t>(v)] == 0) empty_clusters.push_back(v);

  if (!X.has_gaps()) {
    Eigen::VectorXd nj = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int v = partition.assignment[static_cast<size_t>(i)];
      const double w = X.weights()(i);
      nj(v) += w;
      B.row(v) += w * X.values().row(i);
    }
    Eigen::MatrixXd A = base;
    A.diagonal() += nj / total_w;
    B /= total_w;
    for (int v = 0; v < n; ++v)
      if (A.row(v).cwiseAbs().maxCoeff() < 1e-300)
        throw Error("singular-system",
                    "vertex " + std::to_string(v) +
                        " has no data and no elastic coupling; empty clusters: {" +
                        vertex_list(empty_clusters) + "}");
    return solve_one_system(A, B, empty_clusters);
  }

  // Gapped data: the diagonal weight and the right-hand side are assembled
  // per coordinate, one solve per data dimension.
  Embedding Y(n, m);
  for (Eigen::Index d = 0; d < m; ++d) {
    Eigen::VectorXd nj = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (X.gaps()(i, d)) continue;
      const int v = partition.assignment[static_cast<size_t>(i)];
      const double w = X.weights()(i);
      nj(v) += w;
      b(v) += w * X.values()(i, d);
    }
    Eigen::MatrixXd A = base;
    A.diagonal() += nj / total_w;
    b /= total_w;
    for (int v = 0; v < n; ++v)
      if (A.row(v).cwiseAbs().maxCoeff() < 1e-300)
        throw Error("singular-system",
                    "vertex " + std::to_string(v) + " unsupported in coordinate " +
                        std::to_string(d) + "; empty clusters: {" +
                        vertex_list(empty_clusters) + "}");
    Y.col(d) = solve_one_system(A, b, empty_clusters);
  }
  return Y;
}

OptimizeResult optimize_embedding(const DataMatrix& X, const ElasticGraph& G,
                                  const Embedding& phi0, const OptimizeParams& params) {
  if (phi0.rows() != G.vertex_count())
    throw Error("dimension-mismatch", "initial embedding does not cover all vertices");
  if (!phi0.allFinite())
    throw Error("invariant-violation", "initial embedding has non-finite positions");

  const ElasticMatrices matrices = build_elastic_matrices(G);
  OptimizeResult result;
  result.embedding = phi0;
  result.trace.push_back(total_functional(X, G, phi0));
  result.converged = false;

  std::vector<int> previous_assignment;
  SolveParams solve_params{params.ridge};
  for (int iter = 0; iter < params.max_iter; ++iter) {
    Partition part = partition_by_vertices(X, result.embedding);
    if (part.assignment == previous_assignment) {
      result.converged = true;
      break;
    }
    Embedding next = solve_embedding_step(X, G, part, matrices, solve_params);
    const double displacement =
        (next - result.embedding).rowwise().norm().maxCoeff();
    result.embedding = std::move(next);
    result.partition = part;
    result.trace.push_back(total_functional(X, G, result.embedding));
    result.iterations = iter + 1;
    previous_assignment = std::move(part.assignment);
    if (displacement < params.tol) {
      result.converged = true;
      break;
    }
  }
  if (result.partition.assignment.empty())
    result.partition = partition_by_vertices(X, result.embedding);
  return result;
}

bool is_pluriharmonic(const ElasticGraph& G, const Embedding& phi, double tol) {
  for (const auto& star : G.stars()) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.cols());
    for (int leaf : star.leaves) mean += phi.row(leaf);
    mean /= static_cast<double>(star.order());
    if ((phi.row(star.center) - mean).norm() > tol) return false;
  }
  return true;
}

std::vector<int> corner_points(const ElasticGraph& G) {
  std::vector<bool> is_center(static_cast<size_t>(G.vertex_count()), false);
  for (const auto& star : G.stars()) is_center[static_cast<size_t>(star.center)] = true;
  std::vector<int> corners;
  for (int v = 0; v < G.vertex_count(); ++v)
    if (!is_center[static_cast<size_t>(v)]) corners.push_back(v);
  return corners;
}

void write_graph(std::ostream& out, const ElasticGraph& G) {
  out << "pgm-graph 1\n";
  out << "vertices " << G.vertex_count() << "\n";
  out << "primitive " << (G.is_primitive() ? 1 : 0) << "\n";
  out << "edges " << G.edges().size() << "\n";
  for (const auto& e : G.edges())
    out << e.a << " " << e.b << " " << format_double(e.lambda) << "\n";
  out << "stars " << G.stars().size() << "\n";
  for (const auto& s : G.stars()) {
    out << s.center << " " << format_double(s.mu) << " " << s.order();
    for (int leaf : s.leaves) out << " " << leaf;
    out << "\n";
  }
}

ElasticGraph read_graph(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-graph" || version != 1)
    throw Error("parse-error", "not a graph file");
  std::string kw;
  int n = 0;
  in >> kw >> n;
  if (kw != "vertices") throw Error("parse-error", "expected vertices");
  int primitive = 0;
  in >> kw >> primitive;
  if (kw != "primitive") throw Error("parse-error", "expected primitive flag");
  size_t ecount = 0;
  in >> kw >> ecount;
  if (kw != "edges") throw Error("parse-error", "expected edges");
  std::vector<Edge> edges(ecount);
  for (auto& e : edges) in >> e.a >> e.b >> e.lambda;
  size_t scount = 0;
  in >> kw >> scount;
  if (kw != "stars") throw Error("parse-error", "expected stars");
  std::vector<Star> stars(scount);
  for (auto& s : stars) {
    int k = 0;
    in >> s.center >> s.mu >> k;
    s.leaves.resize(static_cast<size_t>(k));
    for (auto& leaf : s.leaves) in >> leaf;
  }
  if (!in) throw Error("parse-error", "truncated graph file");
  return ElasticGraph(n, std::move(edges), std::move(stars), primitive != 0);
}

void write_positions(std::ostream& out, const Embedding& phi) {
  out << "positions " << phi.rows() << " " << phi.cols() << "\n";
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      if (j) out << " ";
      out << format_double(phi(i, j));
    }
    out << "\n";
  }
}

Embedding read_positions(std::istream& in) {
  std::string kw;
  Eigen::Index rows = 0, cols = 0;
  in >> kw >> rows >> cols;
  if (kw != "positions") throw Error("parse-error", "expected positions");
  Embedding phi(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) in >> phi(i, j);
  if (!in) throw Error("parse-error", "truncated positions");
  return phi;
}

}  // namespace pgm
