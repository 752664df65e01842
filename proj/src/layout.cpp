#include "pgm/layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "pgm/io.hpp"

namespace pgm {

namespace {

void check_tree(const ElasticGraph& G) {
  const int n = G.vertex_count();
  if (static_cast<int>(G.edges().size()) != n - 1)
    throw Error("not-a-tree", "edge count is not |V| - 1");
  std::vector<int> seen;
  std::vector<bool> visited(static_cast<size_t>(n), false);
  seen.push_back(0);
  visited[0] = true;
  int reached = 1;
  while (!seen.empty()) {
    const int v = seen.back();
    seen.pop_back();
    for (int u : G.neighbors()[static_cast<size_t>(v)]) {
      if (!visited[static_cast<size_t>(u)]) {
        visited[static_cast<size_t>(u)] = true;
        seen.push_back(u);
        ++reached;
      }
    }
  }
  if (reached != n) throw Error("not-a-tree", "graph is disconnected");
}

/// Tree distances (embedded edge lengths) from one source.
std::vector<double> tree_distances(const ElasticGraph& G, const Embedding& phi,
                                   int source) {
  std::vector<double> dist(static_cast<size_t>(G.vertex_count()), -1.0);
  std::vector<int> stack{source};
  dist[static_cast<size_t>(source)] = 0.0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : G.neighbors()[static_cast<size_t>(v)]) {
      if (dist[static_cast<size_t>(u)] >= 0.0) continue;
      dist[static_cast<size_t>(u)] =
          dist[static_cast<size_t>(v)] + (phi.row(v) - phi.row(u)).norm();
      stack.push_back(u);
    }
  }
  return dist;
}

int pick_root(const ElasticGraph& G, const Embedding& phi) {
  int best = 0;
  double best_ecc = std::numeric_limits<double>::infinity();
  for (int v = 0; v < G.vertex_count(); ++v) {
    const auto dist = tree_distances(G, phi, v);
    const double ecc = *std::max_element(dist.begin(), dist.end());
    if (ecc < best_ecc) {
      best_ecc = ecc;
      best = v;
    }
  }
  return best;
}

/// Plane used for ordering the children of `vertex`: the global principal
/// plane, or a local one fitted to the points assigned to the star's
/// vertices.
struct OrderingPlane {
  Eigen::VectorXd origin;
  Eigen::VectorXd axis1, axis2;
};

OrderingPlane global_plane(const PcaBasis& basis, Eigen::Index m) {
  OrderingPlane p;
  p.origin = basis.origin;
  p.axis1 = basis.components.col(0);
  if (basis.count() >= 2)
    p.axis2 = basis.components.col(1);
  else
    p.axis2 = Eigen::VectorXd::Zero(m);
  if (p.axis2.isZero()) {
    // Any unit vector orthogonal to axis1 completes the plane.
    Eigen::Index k;
    p.axis1.cwiseAbs().minCoeff(&k);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    e(k) = 1.0;
    p.axis2 = (e - p.axis1 * p.axis1.dot(e)).normalized();
  }
  return p;
}

OrderingPlane local_plane_for_star(const ElasticGraph& G, int center,
                                   const LayoutOptions& options,
                                   const OrderingPlane& fallback) {
  if (!options.data || !options.partition) return fallback;
  std::set<int> star_vertices{center};
  for (int u : G.neighbors()[static_cast<size_t>(center)]) star_vertices.insert(u);

  std::vector<Eigen::Index> rows;
  const auto& assignment = options.partition->assignment;
  for (size_t i = 0; i < assignment.size(); ++i)
    if (star_vertices.count(assignment[i])) rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.size() < 3) return fallback;

  const DataMatrix& X = *options.data;
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), X.cols());
  GapMask gaps(static_cast<Eigen::Index>(rows.size()), X.cols());
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = X.values().row(rows[i]);
    gaps.row(static_cast<Eigen::Index>(i)) = X.gaps().row(rows[i]);
    w(static_cast<Eigen::Index>(i)) = X.weights()(rows[i]);
  }
  try {
    DataMatrix local(std::move(sub), std::move(gaps), std::move(w));
    std::mt19937_64 rng(12345);  // ordering heuristic only; fixed stream
    PcaBasis basis = fit_components(
        local, static_cast<int>(std::min<Eigen::Index>(2, std::min(local.rows() - 1, local.cols()))),
        rng);
    if (basis.count() < 1) return fallback;
    return global_plane(basis, X.cols());
  } catch (const Error&) {
    return fallback;
  }
}

double plane_angle(const OrderingPlane& p, const Eigen::VectorXd& point) {
  const Eigen::VectorXd d = point - p.origin;
  return std::atan2(d.dot(p.axis2), d.dot(p.axis1));
}

bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto orient = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                   const Eigen::Vector2d& r) {
    const double v = (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    return v > 1e-12 ? 1 : (v < -1e-12 ? -1 : 0);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

TreeLayout layout_metro_map(const ElasticGraph& tree, const Embedding& phi,
                            const PcaBasis& basis, const LayoutOptions& options) {
  check_tree(tree);
  const int n = tree.vertex_count();

  TreeLayout layout;
  layout.root = pick_root(tree, phi);
  layout.positions = Eigen::MatrixXd::Zero(n, 2);
  layout.angles.assign(static_cast<size_t>(n), 0.0);
  for (const auto& e : tree.edges()) layout.edges.emplace_back(e.a, e.b);

  double mean_len = 0.0;
  for (const auto& e : tree.edges()) mean_len += (phi.row(e.a) - phi.row(e.b)).norm();
  if (!tree.edges().empty()) mean_len /= static_cast<double>(tree.edges().size());
  layout.scale = mean_len > 0.0 ? 1.0 / mean_len : 1.0;

  const OrderingPlane global = global_plane(basis, phi.cols());

  // Depth-first placement. Children share the circle equally with the
  // inbound edge; their order comes from the principal-plane angles.
  struct Frame {
    int vertex;
    int parent;
    double inbound;  // direction parent -> vertex
  };
  std::vector<Frame> stack{{layout.root, -1, 0.0}};
  std::vector<bool> placed(static_cast<size_t>(n), false);
  placed[static_cast<size_t>(layout.root)] = true;

  while (!stack.empty()) {
    const Frame frame = stack.back();
    stack.pop_back();

    std::vector<int> children;
    for (int u : tree.neighbors()[static_cast<size_t>(frame.vertex)])
      if (u != frame.parent) children.push_back(u);
    if (children.empty()) continue;

    const OrderingPlane plane =
        options.local_plane
            ? local_plane_for_star(tree, frame.vertex, options, global)
            : global;
    std::vector<std::pair<double, int>> order;
    for (int c : children)
      order.emplace_back(plane_angle(plane, phi.row(c).transpose()), c);
    std::sort(order.begin(), order.end());

    const int degree = tree.degree(frame.vertex);
    const double gap = 2.0 * M_PI / static_cast<double>(degree);
    // The inbound edge, as seen from this vertex, points back to the parent.
    const double base = frame.parent < 0 ? -gap : frame.inbound + M_PI;

    for (size_t j = 0; j < order.size(); ++j) {
      const int child = order[j].second;
      const double direction = base + gap * static_cast<double>(j + 1);
      const double length =
          layout.scale * (phi.row(frame.vertex) - phi.row(child)).norm();
      layout.positions.row(child) =
          layout.positions.row(frame.vertex) +
          length * Eigen::RowVector2d(std::cos(direction), std::sin(direction));
      layout.angles[static_cast<size_t>(child)] = direction;
      placed[static_cast<size_t>(child)] = true;
      stack.push_back(Frame{child, frame.vertex, direction});
    }
  }

  // Count crossings between non-adjacent edges; the ordering heuristic does
  // not try to repair them.
  for (size_t i = 0; i < layout.edges.size(); ++i) {
    for (size_t j = i + 1; j < layout.edges.size(); ++j) {
      const auto& [a, b] = layout.edges[i];
      const auto& [c, d] = layout.edges[j];
      if (a == c || a == d || b == c || b == d) continue;
      if (segments_cross(layout.positions.row(a), layout.positions.row(b),
                         layout.positions.row(c), layout.positions.row(d)))
        ++layout.crossings;
    }
  }
  return layout;
}

PieStats pie_statistics(const Partition& partition,
                        const std::vector<std::string>& labels) {
  if (labels.size() != partition.assignment.size())
    throw Error("dimension-mismatch", "label count does not match observation count");
  PieStats stats;
  std::set<std::string> distinct(labels.begin(), labels.end());
  stats.classes.assign(distinct.begin(), distinct.end());
  std::map<std::string, int> class_index;
  for (size_t i = 0; i < stats.classes.size(); ++i)
    class_index[stats.classes[i]] = static_cast<int>(i);

  const int vertices = partition.targets();
  stats.counts.assign(static_cast<size_t>(vertices),
                      std::vector<int>(stats.classes.size(), 0));
  stats.totals.assign(static_cast<size_t>(vertices), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int v = partition.assignment[i];
    ++stats.counts[static_cast<size_t>(v)][static_cast<size_t>(class_index[labels[i]])];
    ++stats.totals[static_cast<size_t>(v)];
  }
  return stats;
}

namespace {

const char* kPalette[] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
                          "#a65628", "#f781bf", "#999999", "#66c2a5", "#fc8d62"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string svg_num(double v) {
  // Fixed precision keeps the output stable and compact.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void emit_svg(std::ostream& out, const TreeLayout& layout, const PieStats& pies,
              const SvgStyle& style) {
  const Eigen::Index n = layout.positions.rows();
  if (static_cast<Eigen::Index>(pies.totals.size()) != n)
    throw Error("dimension-mismatch", "pie stats do not match the layout");

  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  if (n > 0) {
    min_x = layout.positions.col(0).minCoeff();
    max_x = layout.positions.col(0).maxCoeff();
    min_y = layout.positions.col(1).minCoeff();
    max_y = layout.positions.col(1).maxCoeff();
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
  const double draw = style.size - 2.0 * style.margin;
  const double s = draw / span;
  auto px = [&](double x) { return style.margin + (x - min_x) * s; };
  auto py = [&](double y) { return style.margin + (max_y - y) * s; };

  const double width = style.margin * 2.0 + (max_x - min_x) * s;
  const double height = style.margin * 2.0 + (max_y - min_y) * s +
                        18.0 * static_cast<double>(pies.classes.size()) + 8.0;

  int max_total = 1;
  for (int t : pies.totals) max_total = std::max(max_total, t);

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width)
      << "\" height=\"" << svg_num(height) << "\" viewBox=\"0 0 " << svg_num(width)
      << " " << svg_num(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (const auto& [a, b] : layout.edges) {
    out << "<line x1=\"" << svg_num(px(layout.positions(a, 0))) << "\" y1=\""
        << svg_num(py(layout.positions(a, 1))) << "\" x2=\""
        << svg_num(px(layout.positions(b, 0))) << "\" y2=\""
        << svg_num(py(layout.positions(b, 1))) << "\" stroke=\"#444444\" stroke-width=\""
        << svg_num(style.edge_width) << "\"/>\n";
  }

  for (Eigen::Index v = 0; v < n; ++v) {
    const double cx = px(layout.positions(v, 0));
    const double cy = py(layout.positions(v, 1));
    const int total = pies.totals[static_cast<size_t>(v)];
    const double radius =
        style.max_node_radius * std::sqrt(static_cast<double>(total) /
                                          static_cast<double>(max_total));
    if (total == 0) {
      out << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy)
          << "\" r=\"0\" fill=\"none\" stroke=\"#444444\"/>\n";
      continue;
    }
    // Single-class nodes draw as plain discs; otherwise one wedge per class.
    int present_classes = 0;
    size_t only_class = 0;
    for (size_t c = 0; c < pies.classes.size(); ++c) {
      if (pies.counts[static_cast<size_t>(v)][c] > 0) {
        ++present_classes;
        only_class = c;
      }
    }
    if (present_classes == 1) {
      out << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy) << "\" r=\""
          << svg_num(radius) << "\" fill=\"" << kPalette[only_class % kPaletteSize]
          << "\" stroke=\"#222222\" stroke-width=\"0.5\"/>\n";
      continue;
    }
    double angle = -M_PI / 2.0;
    for (size_t c = 0; c < pies.classes.size(); ++c) {
      const int count = pies.counts[static_cast<size_t>(v)][c];
      if (count == 0) continue;
      const double sweep =
          2.0 * M_PI * static_cast<double>(count) / static_cast<double>(total);
      const double x0 = cx + radius * std::cos(angle);
      const double y0 = cy + radius * std::sin(angle);
      const double x1 = cx + radius * std::cos(angle + sweep);
      const double y1 = cy + radius * std::sin(angle + sweep);
      const int large = sweep > M_PI ? 1 : 0;
      out << "<path d=\"M " << svg_num(cx) << " " << svg_num(cy) << " L " << svg_num(x0)
          << " " << svg_num(y0) << " A " << svg_num(radius) << " " << svg_num(radius)
          << " 0 " << large << " 1 " << svg_num(x1) << " " << svg_num(y1)
          << " Z\" fill=\"" << kPalette[c % kPaletteSize]
          << "\" stroke=\"#222222\" stroke-width=\"0.5\"/>\n";
      angle += sweep;
    }
  }

  double legend_y = style.margin * 2.0 + (max_y - min_y) * s + 12.0;
  for (size_t c = 0; c < pies.classes.size(); ++c) {
    out << "<rect x=\"" << svg_num(style.margin) << "\" y=\"" << svg_num(legend_y - 9.0)
        << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[c % kPaletteSize]
        << "\"/>\n";
    out << "<text x=\"" << svg_num(style.margin + 18.0) << "\" y=\"" << svg_num(legend_y)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << pies.classes[c]
        << "</text>\n";
    legend_y += 18.0;
  }
  out << "</svg>\n";
}

void write_layout_json(std::ostream& out, const TreeLayout& layout,
                       const PieStats& pies) {
  out << "{\n  \"root\": " << layout.root << ",\n";
  out << "  \"scale\": " << format_double(layout.scale) << ",\n";
  out << "  \"crossings\": " << layout.crossings << ",\n";
  out << "  \"positions\": [";
  for (Eigen::Index v = 0; v < layout.positions.rows(); ++v) {
    if (v) out << ", ";
    out << "[" << format_double(layout.positions(v, 0)) << ", "
        << format_double(layout.positions(v, 1)) << "]";
  }
  out << "],\n  \"angles\": [";
  for (size_t v = 0; v < layout.angles.size(); ++v) {
    if (v) out << ", ";
    out << format_double(layout.angles[v]);
  }
  out << "],\n  \"edges\": [";
  for (size_t i = 0; i < layout.edges.size(); ++i) {
    if (i) out << ", ";
    out << "[" << layout.edges[i].first << ", " << layout.edges[i].second << "]";
  }
  out << "],\n  \"classes\": [";
  for (size_t c = 0; c < pies.classes.size(); ++c) {
    if (c) out << ", ";
    out << "\"" << pies.classes[c] << "\"";
  }
  out << "],\n  \"pies\": [";
  for (size_t v = 0; v < pies.counts.size(); ++v) {
    if (v) out << ", ";
    out << "[";
    for (size_t c = 0; c < pies.counts[v].size(); ++c) {
      if (c) out << ", ";
      out << pies.counts[v][c];
    }
    out << "]";
  }
  out << "]\n}\n";
}

}  // namespace pgm
