#ifndef PGM_LAYOUT_HPP
#define PGM_LAYOUT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "pgm/elastic_graph.hpp"
#include "pgm/pca.hpp"

namespace pgm {

/// Schematic 2D tree layout: equiangular stars, edge lengths proportional
/// to the multidimensional ones, root at the origin with its first child
/// along +x.
struct TreeLayout {
  Eigen::MatrixXd positions;  // |V| x 2
  int root = 0;
  std::vector<double> angles;  // inbound direction per vertex (root: 0)
  std::vector<std::pair<int, int>> edges;
  double scale = 1.0;  // 2D length = scale * embedded length
  int crossings = 0;   // detected (not repaired) edge crossings
};

struct LayoutOptions {
  /// Order star leaves by their projection on a local principal plane
  /// fitted to the points assigned near each star instead of the global one.
  bool local_plane = false;
  const DataMatrix* data = nullptr;     // local_plane only
  const Partition* partition = nullptr; // local_plane only
};

/// Requires an acyclic connected graph. Child order at each vertex follows
/// the angular order of the children's projections on the principal plane.
TreeLayout layout_metro_map(const ElasticGraph& tree, const Embedding& phi,
                            const PcaBasis& basis, const LayoutOptions& options = {});

/// Per-vertex class histogram of projected points.
struct PieStats {
  std::vector<std::string> classes;      // sorted distinct labels
  std::vector<std::vector<int>> counts;  // per vertex, per class
  std::vector<int> totals;               // per vertex
};

PieStats pie_statistics(const Partition& partition,
                        const std::vector<std::string>& labels);

struct SvgStyle {
  double size = 640.0;        // canvas long edge, pixels
  double margin = 48.0;
  double max_node_radius = 18.0;
  double edge_width = 2.0;
};

/// Deterministic SVG: edges as lines, nodes as pie charts with area
/// proportional to projected counts, plus a class legend.
void emit_svg(std::ostream& out, const TreeLayout& layout, const PieStats& pies,
              const SvgStyle& style = {});

/// Layout + pies as JSON for downstream tooling.
void write_layout_json(std::ostream& out, const TreeLayout& layout,
                       const PieStats& pies);

}  // namespace pgm

#endif
