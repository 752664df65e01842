#include "pgm/complex.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace pgm {

int CubicComplex::product_vertex_count() const {
  int total = 1;
  for (const auto& g : factors) total *= g.vertex_count();
  return total;
}

namespace {

std::vector<int> strides_of(const std::vector<ElasticGraph>& factors) {
  const int r = static_cast<int>(factors.size());
  std::vector<int> stride(static_cast<size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i)
    stride[static_cast<size_t>(i)] =
        stride[static_cast<size_t>(i + 1)] * factors[static_cast<size_t>(i + 1)].vertex_count();
  return stride;
}

}  // namespace

int CubicComplex::tuple_to_index(const std::vector<int>& tuple) const {
  if (tuple.size() != factors.size())
    throw Error("dimension-mismatch", "tuple rank does not match complex rank");
  const auto stride = strides_of(factors);
  int idx = 0;
  for (size_t i = 0; i < tuple.size(); ++i) idx += tuple[i] * stride[i];
  return idx;
}

std::vector<int> CubicComplex::index_to_tuple(int index) const {
  const auto stride = strides_of(factors);
  std::vector<int> tuple(factors.size());
  for (size_t i = 0; i < factors.size(); ++i) {
    tuple[i] = index / stride[i];
    index %= stride[i];
  }
  return tuple;
}

ElasticGraph cartesian_product(const std::vector<ElasticGraph>& factors) {
  if (factors.empty()) throw Error("invariant-violation", "product of zero factors");
  const auto stride = strides_of(factors);
  int total = 1;
  for (const auto& g : factors) total *= g.vertex_count();

  std::vector<Edge> edges;
  std::vector<Star> stars;
  CubicComplex lookup{factors};
  for (int p = 0; p < total; ++p) {
    const std::vector<int> tuple = lookup.index_to_tuple(p);
    for (size_t f = 0; f < factors.size(); ++f) {
      const ElasticGraph& g = factors[f];
      const int here = tuple[f];
      for (const auto& e : g.edges()) {
        if (e.a == here)  // each factor edge contributes once per copy
          edges.push_back(Edge{p, p + (e.b - e.a) * stride[f], e.lambda});
      }
      for (const auto& s : g.stars()) {
        if (s.center != here) continue;
        Star copy;
        copy.center = p;
        copy.mu = s.mu;
        for (int leaf : s.leaves) copy.leaves.push_back(p + (leaf - here) * stride[f]);
        stars.push_back(std::move(copy));
      }
    }
  }
  return ElasticGraph(total, std::move(edges), std::move(stars));
}

EnergyBreakdown product_energy_check(const std::vector<ElasticGraph>& factors,
                                     const Embedding& phi) {
  CubicComplex lookup{factors};
  if (phi.rows() != lookup.product_vertex_count())
    throw Error("dimension-mismatch", "embedding does not cover the product");
  const auto stride = strides_of(factors);

  EnergyBreakdown out;
  for (int p = 0; p < static_cast<int>(phi.rows()); ++p) {
    const std::vector<int> tuple = lookup.index_to_tuple(p);
    for (size_t f = 0; f < factors.size(); ++f) {
      const ElasticGraph& g = factors[f];
      const int here = tuple[f];
      for (const auto& e : g.edges())
        if (e.a == here)
          out.stretch +=
              e.lambda *
              (phi.row(p) - phi.row(p + (e.b - e.a) * stride[f])).squaredNorm();
      for (const auto& s : g.stars()) {
        if (s.center != here) continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.cols());
        for (int leaf : s.leaves) mean += phi.row(p + (leaf - here) * stride[f]);
        mean /= static_cast<double>(s.order());
        out.bending += s.mu * (phi.row(p) - mean).squaredNorm();
      }
    }
  }
  return out;
}

namespace {

/// New product embedding after replacing factor `f` by a transformed copy.
/// Old vertices carry their positions over; vertices whose factor-f
/// coordinate is new are seeded by `op`.
Embedding remap_embedding(const CubicComplex& before, const Embedding& phi,
                          const CubicComplex& after, int f, GrammarOpKind op, int site,
                          const SeedContext& ctx, const ElasticGraph& product_before) {
  const ElasticGraph& old_factor = before.factors[static_cast<size_t>(f)];
  const int old_count = old_factor.vertex_count();
  const int new_count = after.factors[static_cast<size_t>(f)].vertex_count();
  const int total_after = after.product_vertex_count();
  Embedding out(total_after, phi.cols());

  // Map a new factor-f vertex index back to the old one; -1 marks created.
  auto back_map = [&](int nf) -> int {
    switch (op) {
      case GrammarOpKind::add_node:
      case GrammarOpKind::bisect_edge:
        return nf < old_count ? nf : -1;
      case GrammarOpKind::remove_leaf: {
        return nf >= site ? nf + 1 : nf;
      }
      case GrammarOpKind::remove_edge: {
        const int drop = old_factor.edges()[static_cast<size_t>(site)].b;
        return nf >= drop ? nf + 1 : nf;
      }
    }
    return nf;
  };
  (void)new_count;

  for (int p = 0; p < total_after; ++p) {
    std::vector<int> tuple = after.index_to_tuple(p);
    const int nf = tuple[static_cast<size_t>(f)];
    const int of = back_map(nf);
    if (of >= 0) {
      tuple[static_cast<size_t>(f)] = of;
      out.row(p) = phi.row(before.tuple_to_index(tuple));
      continue;
    }
    if (op == GrammarOpKind::bisect_edge) {
      const Edge& e = old_factor.edges()[static_cast<size_t>(site)];
      std::vector<int> ta = tuple, tb = tuple;
      ta[static_cast<size_t>(f)] = e.a;
      tb[static_cast<size_t>(f)] = e.b;
      out.row(p) = 0.5 * (phi.row(before.tuple_to_index(ta)) +
                          phi.row(before.tuple_to_index(tb)));
    } else {  // add_node
      std::vector<int> tp = tuple;
      tp[static_cast<size_t>(f)] = site;
      const int parent = before.tuple_to_index(tp);
      out.row(p) = seed_new_vertex_position(product_before, phi, parent, ctx);
    }
  }
  return out;
}

}  // namespace

ProductGrowthResult grow_product(const DataMatrix& X, const CubicComplex& complex,
                                 const Embedding& phi0,
                                 const std::vector<Grammar>& sequence,
                                 const ComplexityBudget& budget,
                                 const GrowParams& params) {
  if (sequence.empty()) throw Error("invariant-violation", "empty grammar sequence");
  if (complex.rank() < 1) throw Error("invariant-violation", "complex has no factors");
  for (const auto& g : complex.factors)
    if (!g.is_primitive())
      throw Error("invariant-violation", "grammar growth needs primitive factors");

  ProductGrowthResult result{complex, phi0, {}, {}};
  int applications = 0;
  for (size_t round = 0; applications < budget.cc_max; ++round) {
    const Grammar& grammar = sequence[round % sequence.size()];
    const ElasticGraph product = cartesian_product(result.complex.factors);
    if (result.embedding.rows() != product.vertex_count())
      throw Error("dimension-mismatch", "embedding does not match the product");
    const Partition current_partition = partition_by_vertices(X, result.embedding);
    SeedContext ctx{&X, &current_partition};

    struct ProductCandidate {
      CubicComplex complex;
      Embedding embedding;
      EnergyBreakdown energy;
      int factor;
      GrammarOpKind op;
      int site;
    };
    std::vector<ProductCandidate> permissible;

    for (int f = 0; f < result.complex.rank(); ++f) {
      for (GrammarOpKind op : grammar) {
        const ElasticGraph& factor = result.complex.factors[static_cast<size_t>(f)];
        const int site_count = [&] {
          switch (op) {
            case GrammarOpKind::add_node: return factor.vertex_count();
            case GrammarOpKind::bisect_edge:
            case GrammarOpKind::remove_edge:
              return static_cast<int>(factor.edges().size());
            case GrammarOpKind::remove_leaf: return factor.vertex_count();
          }
          return 0;
        }();
        for (int site = 0; site < site_count; ++site) {
          if (op == GrammarOpKind::remove_leaf &&
              (factor.degree(site) != 1 || factor.vertex_count() < 2))
            continue;
          if ((op == GrammarOpKind::remove_edge || op == GrammarOpKind::remove_leaf) &&
              factor.vertex_count() < 2)
            continue;
          ElasticGraph transformed =
              apply_op_topology(op, factor, site, params.lambda, params.mu);
          if (structural_complexity(transformed, budget.policy) > budget.sc_max)
            continue;
          CubicComplex next = result.complex;
          next.factors[static_cast<size_t>(f)] = std::move(transformed);
          Embedding seeded = remap_embedding(result.complex, result.embedding, next, f,
                                             op, site, ctx, product);
          permissible.push_back(
              ProductCandidate{std::move(next), std::move(seeded), {}, f, op, site});
        }
      }
    }
    if (permissible.empty()) break;

    const OptimizeParams& opt =
        params.exhaustive ? params.final_opt : params.candidate_opt;
    int best = -1;
    for (size_t i = 0; i < permissible.size(); ++i) {
      try {
        const ElasticGraph candidate_product =
            cartesian_product(permissible[i].complex.factors);
        OptimizeResult r =
            optimize_embedding(X, candidate_product, permissible[i].embedding, opt);
        permissible[i].embedding = std::move(r.embedding);
        permissible[i].energy = r.trace.back();
        if (best < 0 ||
            permissible[i].energy.total() <
                permissible[static_cast<size_t>(best)].energy.total())
          best = static_cast<int>(i);
      } catch (const Error& err) {
        result.warnings.push_back(
            std::string("candidate factor ") + std::to_string(permissible[i].factor) +
            " " + grammar_op_name(permissible[i].op) + " at site " +
            std::to_string(permissible[i].site) + " skipped: " + err.what());
      }
    }
    if (best < 0) break;

    ProductCandidate& adopted = permissible[static_cast<size_t>(best)];
    const ElasticGraph adopted_product = cartesian_product(adopted.complex.factors);
    OptimizeResult refined =
        optimize_embedding(X, adopted_product, adopted.embedding, params.final_opt);
    result.complex = std::move(adopted.complex);
    result.embedding = std::move(refined.embedding);

    ProductGrowthRecord record;
    record.round = static_cast<int>(round);
    record.factor = adopted.factor;
    record.op = adopted.op;
    record.site = adopted.site;
    record.sc = structural_complexity(
        result.complex.factors[static_cast<size_t>(adopted.factor)], budget.policy);
    record.energy = refined.trace.back();
    record.product_vertex_count = result.complex.product_vertex_count();
    result.log.push_back(record);
    ++applications;
  }
  return result;
}

void write_complex(std::ostream& out, const CubicComplex& complex,
                   const Embedding& phi) {
  out << "pgm-complex 1\n";
  out << "factors " << complex.rank() << "\n";
  for (const auto& g : complex.factors) write_graph(out, g);
  write_positions(out, phi);
}

std::pair<CubicComplex, Embedding> read_complex(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-complex" || version != 1)
    throw Error("parse-error", "not a complex file");
  std::string kw;
  int r = 0;
  in >> kw >> r;
  if (kw != "factors") throw Error("parse-error", "expected factors");
  CubicComplex complex;
  for (int i = 0; i < r; ++i) complex.factors.push_back(read_graph(in));
  Embedding phi = read_positions(in);
  if (phi.rows() != complex.product_vertex_count())
    throw Error("parse-error", "positions do not cover the product");
  return {std::move(complex), std::move(phi)};
}

}  // namespace pgm
