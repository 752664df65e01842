#include "pgm/elastic_map.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "pgm/io.hpp"

namespace pgm {

const char* net_topology_name(NetTopology t) {
  switch (t) {
    case NetTopology::segment: return "segment";
    case NetTopology::rectangle: return "rectangle";
    case NetTopology::sphere: return "sphere";
  }
  return "unknown";
}

NetTopology net_topology_from_name(const std::string& name) {
  if (name == "segment") return NetTopology::segment;
  if (name == "rectangle") return NetTopology::rectangle;
  if (name == "sphere") return NetTopology::sphere;
  throw Error("parse-error", "unknown net topology '" + name + "'");
}

namespace {

ElasticNet make_grid_net(const std::vector<int>& shape) {
  const int dim = static_cast<int>(shape.size());
  for (int axis_count : shape)
    if (axis_count < 2)
      throw Error("unsupported-shape", "every axis needs at least 2 vertices");

  int total = 1;
  for (int c : shape) total *= c;

  // Row-major indexing, last axis fastest.
  std::vector<int> stride(static_cast<size_t>(dim), 1);
  for (int a = dim - 2; a >= 0; --a)
    stride[static_cast<size_t>(a)] =
        stride[static_cast<size_t>(a + 1)] * shape[static_cast<size_t>(a + 1)];

  Eigen::MatrixXi coords(total, dim);
  for (int v = 0; v < total; ++v) {
    int rest = v;
    for (int a = 0; a < dim; ++a) {
      coords(v, a) = rest / stride[static_cast<size_t>(a)];
      rest %= stride[static_cast<size_t>(a)];
    }
  }

  std::vector<Edge> edges;
  std::vector<Star> stars;
  for (int v = 0; v < total; ++v) {
    for (int a = 0; a < dim; ++a) {
      const int c = coords(v, a);
      if (c + 1 < shape[static_cast<size_t>(a)])
        edges.push_back(Edge{v, v + stride[static_cast<size_t>(a)], 1.0});
      if (c >= 1 && c + 1 < shape[static_cast<size_t>(a)])
        stars.push_back(Star{v,
                             {v - stride[static_cast<size_t>(a)],
                              v + stride[static_cast<size_t>(a)]},
                             1.0});
    }
  }

  ElasticNet net;
  net.graph = ElasticGraph(total, std::move(edges), std::move(stars));
  net.internal_coords = std::move(coords);
  net.dim = dim;
  net.topology = dim == 1 ? NetTopology::segment : NetTopology::rectangle;
  net.shape = shape;

  if (dim == 2) {
    // One quad cell per interior corner, split along the diagonal that
    // starts at the lowest-indexed corner.
    const int s0 = stride[0];
    const Eigen::MatrixXi& ic = net.internal_coords;
    for (int v = 0; v < total; ++v) {
      if (ic(v, 0) + 1 >= shape[0] || ic(v, 1) + 1 >= shape[1]) continue;
      const int right = v + 1;
      const int down = v + s0;
      const int diag = v + s0 + 1;
      net.triangles.push_back({v, right, diag});
      net.triangles.push_back({v, diag, down});
    }
  }
  return net;
}

ElasticNet make_sphere_net(const std::vector<int>& shape) {
  if (shape.size() != 2)
    throw Error("unsupported-shape", "sphere topology takes {longitudes, rings}");
  const int nu = shape[0];  // longitudes, closed
  const int nv = shape[1];  // latitude rings between the poles
  if (nu < 3 || nv < 1)
    throw Error("unsupported-shape", "sphere needs >= 3 longitudes and >= 1 ring");

  const int total = nu * nv + 2;
  const int north = nu * nv;       // ring index nv (internal v coordinate 0 used below)
  const int south = nu * nv + 1;
  auto ring_vertex = [&](int i, int j) { return j * nu + ((i % nu + nu) % nu); };

  Eigen::MatrixXi coords(total, 2);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      coords(ring_vertex(i, j), 0) = i;
      coords(ring_vertex(i, j), 1) = j + 1;
    }
  coords(north, 0) = 0;
  coords(north, 1) = 0;
  coords(south, 0) = 0;
  coords(south, 1) = nv + 1;

  // Unit-sphere template positions give the relative edge lengths.
  auto template_pos = [&](int v) -> Eigen::Vector3d {
    if (v == north) return {0.0, 0.0, 1.0};
    if (v == south) return {0.0, 0.0, -1.0};
    const int i = coords(v, 0);
    const int j = coords(v, 1);
    const double theta = M_PI * static_cast<double>(j) / static_cast<double>(nv + 1);
    const double phi = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(nu);
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
            std::cos(theta)};
  };

  std::vector<Edge> edges;
  auto add_edge = [&](int a, int b) { edges.push_back(Edge{a, b, 1.0}); };
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) add_edge(ring_vertex(i, j), ring_vertex(i + 1, j));
  for (int j = 0; j + 1 < nv; ++j)
    for (int i = 0; i < nu; ++i) add_edge(ring_vertex(i, j), ring_vertex(i, j + 1));
  for (int i = 0; i < nu; ++i) {
    add_edge(north, ring_vertex(i, 0));
    add_edge(south, ring_vertex(i, nv - 1));
  }

  double mean_len = 0.0;
  for (const auto& e : edges)
    mean_len += (template_pos(e.a) - template_pos(e.b)).norm();
  mean_len /= static_cast<double>(edges.size());
  for (auto& e : edges) {
    const double len = (template_pos(e.a) - template_pos(e.b)).norm();
    e.lambda = mean_len / len;  // shorter edges get larger stretching factors
  }

  std::vector<Star> stars;
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const int v = ring_vertex(i, j);
      stars.push_back(Star{v, {ring_vertex(i - 1, j), ring_vertex(i + 1, j)}, 1.0});
      const int up = j == 0 ? north : ring_vertex(i, j - 1);
      const int down = j == nv - 1 ? south : ring_vertex(i, j + 1);
      stars.push_back(Star{v, {up, down}, 1.0});
    }
  }

  ElasticNet net;
  net.graph = ElasticGraph(total, std::move(edges), std::move(stars));
  net.internal_coords = std::move(coords);
  net.dim = 2;
  net.topology = NetTopology::sphere;
  net.shape = shape;

  for (int j = 0; j + 1 < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const int a = ring_vertex(i, j);
      const int b = ring_vertex(i + 1, j);
      const int c = ring_vertex(i + 1, j + 1);
      const int d = ring_vertex(i, j + 1);
      net.triangles.push_back({a, b, c});
      net.triangles.push_back({a, c, d});
    }
  }
  for (int i = 0; i < nu; ++i) {
    net.triangles.push_back({north, ring_vertex(i, 0), ring_vertex(i + 1, 0)});
    net.triangles.push_back({south, ring_vertex(i + 1, nv - 1), ring_vertex(i, nv - 1)});
  }
  return net;
}

}  // namespace

ElasticNet make_elastic_net(const std::vector<int>& shape, NetTopology topology) {
  switch (topology) {
    case NetTopology::segment:
      if (shape.size() != 1)
        throw Error("unsupported-shape", "segment topology takes one axis count");
      return make_grid_net(shape);
    case NetTopology::rectangle:
      if (shape.size() != 2)
        throw Error("unsupported-shape", "rectangle topology takes two axis counts");
      return make_grid_net(shape);
    case NetTopology::sphere:
      return make_sphere_net(shape);
  }
  throw Error("unsupported-shape", "unknown topology");
}

std::pair<double, double> moduli_for_resolution(double lambda0, double mu0, int dim,
                                                int edge_count, int rib_count) {
  if (dim < 1 || edge_count < 1 || rib_count < 1)
    throw Error("invariant-violation", "resolution formula needs dim, s, r >= 1");
  const double expo = (2.0 - static_cast<double>(dim)) / static_cast<double>(dim);
  return {lambda0 * std::pow(static_cast<double>(edge_count), expo),
          mu0 * std::pow(static_cast<double>(rib_count), expo)};
}

namespace {

void check_schedule(const SofteningSchedule& schedule) {
  if (schedule.multipliers.empty())
    throw Error("invariant-violation", "softening schedule is empty");
  for (size_t i = 1; i < schedule.multipliers.size(); ++i)
    if (!(schedule.multipliers[i] < schedule.multipliers[i - 1]))
      throw Error("invariant-violation", "multipliers must be strictly decreasing");
  if (schedule.multipliers.back() != 1.0)
    throw Error("invariant-violation", "final multiplier must be exactly 1");
}

Embedding initial_positions(const DataMatrix& X, const ElasticNet& net,
                            std::mt19937_64& rng) {
  const int k = net.topology == NetTopology::sphere
                    ? static_cast<int>(std::min<Eigen::Index>(3, X.cols()))
                    : net.dim;
  PcaBasis basis = fit_components(X, k, rng);
  const Eigen::MatrixXd proj = project_to_basis(X, basis);
  if (net.topology != NetTopology::sphere && basis.count() < net.dim)
    throw Error("rank-deficiency", "data rank is below the net dimension");

  Embedding phi(net.graph.vertex_count(), X.cols());
  if (net.topology != NetTopology::sphere) {
    // Grid coordinates affinely mapped to cover [min, max] of the data
    // projections on each principal axis.
    for (int v = 0; v < net.graph.vertex_count(); ++v) {
      Eigen::VectorXd pos = basis.origin;
      for (int a = 0; a < net.dim; ++a) {
        const double lo = proj.col(a).minCoeff();
        const double hi = proj.col(a).maxCoeff();
        const double extent = static_cast<double>(net.shape[static_cast<size_t>(a)] - 1);
        const double t = extent > 0.0
                             ? static_cast<double>(net.internal_coords(v, a)) / extent
                             : 0.5;
        pos += (lo + t * (hi - lo)) * basis.components.col(a);
      }
      phi.row(v) = pos.transpose();
    }
    return phi;
  }

  // Sphere: unit-sphere template scaled by the projection half-ranges.
  const int nu = net.shape[0];
  const int nv = net.shape[1];
  for (int v = 0; v < net.graph.vertex_count(); ++v) {
    const int i = net.internal_coords(v, 0);
    const int j = net.internal_coords(v, 1);
    const double theta = M_PI * static_cast<double>(j) / static_cast<double>(nv + 1);
    const double angle = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(nu);
    const double tmpl[3] = {std::sin(theta) * std::cos(angle),
                            std::sin(theta) * std::sin(angle), std::cos(theta)};
    Eigen::VectorXd pos = basis.origin;
    for (int a = 0; a < basis.count(); ++a) {
      const double lo = proj.col(a).minCoeff();
      const double hi = proj.col(a).maxCoeff();
      const double center = 0.5 * (lo + hi);
      const double radius = 0.5 * (hi - lo);
      pos += (center + radius * tmpl[a]) * basis.components.col(a);
    }
    phi.row(v) = pos.transpose();
  }
  return phi;
}

}  // namespace

ElasticMapModel fit_elastic_map(const DataMatrix& X, const ElasticNet& net,
                                const SofteningSchedule& schedule,
                                const OptimizeParams& params, std::mt19937_64& rng) {
  if (X.cols() < net.dim)
    throw Error("dimension-mismatch", "dataset dimension is below the net dimension");
  check_schedule(schedule);

  ElasticMapModel model;
  model.net = net;
  model.embedding = initial_positions(X, net, rng);
  for (double multiplier : schedule.multipliers) {
    const ElasticGraph working = net.graph.scaled(multiplier * schedule.lambda_base,
                                                  multiplier * schedule.mu_base);
    OptimizeResult r = optimize_embedding(X, working, model.embedding, params);
    model.embedding = std::move(r.embedding);
    model.epoch_traces.push_back(std::move(r.trace));
  }
  return model;
}

namespace {

struct RestrictedGeometry {
  // Coordinates present in the query point, in order.
  std::vector<Eigen::Index> coords;

  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(coords.size()));
    for (size_t i = 0; i < coords.size(); ++i) out(static_cast<Eigen::Index>(i)) = full(coords[i]);
    return out;
  }
};

/// Closest point on segment [a, b]; returns the parameter t in [0, 1].
double segment_parameter(const Eigen::VectorXd& x, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b) {
  const Eigen::VectorXd d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp((x - a).dot(d) / len2, 0.0, 1.0);
}

struct TriangleFoot {
  double u = 0.0, v = 0.0;  // barycentric weights of corners 1 and 2
  double dist2 = 0.0;
};

TriangleFoot project_to_triangle(const Eigen::VectorXd& x, const Eigen::VectorXd& p0,
                                 const Eigen::VectorXd& p1, const Eigen::VectorXd& p2) {
  const Eigen::VectorXd e1 = p1 - p0;
  const Eigen::VectorXd e2 = p2 - p0;
  const double g11 = e1.squaredNorm();
  const double g12 = e1.dot(e2);
  const double g22 = e2.squaredNorm();
  const double det = g11 * g22 - g12 * g12;

  TriangleFoot best;
  bool have_interior = false;
  if (det > 1e-30) {
    const Eigen::VectorXd w = x - p0;
    const double b1 = w.dot(e1);
    const double b2 = w.dot(e2);
    const double u = (g22 * b1 - g12 * b2) / det;
    const double v = (g11 * b2 - g12 * b1) / det;
    if (u >= 0.0 && v >= 0.0 && u + v <= 1.0) {
      best.u = u;
      best.v = v;
      best.dist2 = (x - (p0 + u * e1 + v * e2)).squaredNorm();
      have_interior = true;
    }
  }
  if (!have_interior) {
    best.dist2 = std::numeric_limits<double>::infinity();
    const double t01 = segment_parameter(x, p0, p1);
    const double d01 = (x - (p0 + t01 * e1)).squaredNorm();
    if (d01 < best.dist2) best = TriangleFoot{t01, 0.0, d01};
    const double t02 = segment_parameter(x, p0, p2);
    const double d02 = (x - (p0 + t02 * e2)).squaredNorm();
    if (d02 < best.dist2) best = TriangleFoot{0.0, t02, d02};
    const double t12 = segment_parameter(x, p1, p2);
    const double d12 = (x - (p1 + t12 * (p2 - p1))).squaredNorm();
    if (d12 < best.dist2) best = TriangleFoot{1.0 - t12, t12, d12};
  }
  return best;
}

}  // namespace

MapProjection project_to_map(const GappedVector& x, const ElasticMapModel& model) {
  const Embedding& phi = model.embedding;
  if (x.size() != phi.cols())
    throw Error("dimension-mismatch", "point dimension does not match the model");

  RestrictedGeometry geom;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x.present(i)) geom.coords.push_back(i);
  if (geom.coords.empty())
    throw Error("degenerate-support", "point has no present coordinate");

  const Eigen::VectorXd xq = geom.restrict(x.values);
  auto vertex_restricted = [&](int v) { return geom.restrict(phi.row(v).transpose()); };

  MapProjection out;
  double best = std::numeric_limits<double>::infinity();

  if (model.net.dim == 1) {
    for (const auto& e : model.net.graph.edges()) {
      const Eigen::VectorXd a = vertex_restricted(e.a);
      const Eigen::VectorXd b = vertex_restricted(e.b);
      const double t = segment_parameter(xq, a, b);
      const double d2 = (xq - (a + t * (b - a))).squaredNorm();
      if (d2 < best) {
        best = d2;
        out.ambient = phi.row(e.a).transpose() +
                      t * (phi.row(e.b) - phi.row(e.a)).transpose();
        out.internal =
            (model.net.internal_coords.row(e.a).cast<double>() +
             t * (model.net.internal_coords.row(e.b) - model.net.internal_coords.row(e.a))
                     .cast<double>())
                .transpose();
      }
    }
  } else {
    for (const auto& tri : model.net.triangles) {
      const Eigen::VectorXd p0 = vertex_restricted(tri[0]);
      const Eigen::VectorXd p1 = vertex_restricted(tri[1]);
      const Eigen::VectorXd p2 = vertex_restricted(tri[2]);
      const TriangleFoot foot = project_to_triangle(xq, p0, p1, p2);
      if (foot.dist2 < best) {
        best = foot.dist2;
        const double w0 = 1.0 - foot.u - foot.v;
        out.ambient = (w0 * phi.row(tri[0]) + foot.u * phi.row(tri[1]) +
                       foot.v * phi.row(tri[2]))
                          .transpose();
        out.internal = (w0 * model.net.internal_coords.row(tri[0]).cast<double>() +
                        foot.u * model.net.internal_coords.row(tri[1]).cast<double>() +
                        foot.v * model.net.internal_coords.row(tri[2]).cast<double>())
                           .transpose();
      }
    }
  }
  if (!std::isfinite(best))
    throw Error("invariant-violation", "model has no interpolation support");
  out.distance = std::sqrt(best);
  return out;
}

void write_map_model(std::ostream& out, const ElasticMapModel& model) {
  out << "pgm-elastic-map 1\n";
  out << "dim " << model.net.dim << "\n";
  out << "topology " << net_topology_name(model.net.topology) << "\n";
  out << "shape";
  for (int c : model.net.shape) out << " " << c;
  out << "\n";
  write_graph(out, model.net.graph);
  out << "internal " << model.net.internal_coords.rows() << " "
      << model.net.internal_coords.cols() << "\n";
  for (Eigen::Index i = 0; i < model.net.internal_coords.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.net.internal_coords.cols(); ++j) {
      if (j) out << " ";
      out << model.net.internal_coords(i, j);
    }
    out << "\n";
  }
  write_positions(out, model.embedding);
}

ElasticMapModel read_map_model(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-elastic-map" || version != 1)
    throw Error("parse-error", "not an elastic map model");
  std::string kw, topology;
  int dim = 0;
  in >> kw >> dim;
  if (kw != "dim") throw Error("parse-error", "expected dim");
  in >> kw >> topology;
  if (kw != "topology") throw Error("parse-error", "expected topology");
  in >> kw;
  if (kw != "shape") throw Error("parse-error", "expected shape");
  std::vector<int> shape(static_cast<size_t>(dim == 1 ? 1 : 2));
  for (auto& c : shape) in >> c;

  // Rebuild through the constructor so triangles and invariants come back.
  ElasticNet net = make_elastic_net(shape, net_topology_from_name(topology));
  ElasticGraph graph = read_graph(in);
  if (!graph.same_structure(net.graph))
    throw Error("parse-error", "stored net does not match its shape");
  net.graph = std::move(graph);  // keep stored relative moduli

  Eigen::Index rows = 0, cols = 0;
  in >> kw >> rows >> cols;
  if (kw != "internal") throw Error("parse-error", "expected internal");
  Eigen::MatrixXi coords(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) in >> coords(i, j);
  net.internal_coords = std::move(coords);

  ElasticMapModel model;
  model.net = std::move(net);
  model.embedding = read_positions(in);
  if (!in) throw Error("parse-error", "truncated model");
  return model;
}

}  // namespace pgm
