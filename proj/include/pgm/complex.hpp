#ifndef PGM_COMPLEX_HPP
#define PGM_COMPLEX_HPP

#include <iosfwd>
#include <random>
#include <vector>

#include "pgm/grammar.hpp"

namespace pgm {

/// Cartesian product of elastic graphs. Vertices are factor-vertex tuples,
/// indexed lexicographically with the last factor fastest.
struct CubicComplex {
  std::vector<ElasticGraph> factors;

  int rank() const { return static_cast<int>(factors.size()); }
  int product_vertex_count() const;

  /// Product index of the tuple; tuple[i] indexes a vertex of factors[i].
  int tuple_to_index(const std::vector<int>& tuple) const;
  std::vector<int> index_to_tuple(int index) const;
};

/// Materializes the product graph: for every factor, a copy of it per
/// combination of the other factors' vertices; edges and stars are the
/// union over all copies, moduli inherited from the factor elements.
ElasticGraph cartesian_product(const std::vector<ElasticGraph>& factors);

/// Energy of an embedding computed factor copy by factor copy, without
/// materializing the product (test-oriented: must equal elastic_energy of
/// the materialized product).
EnergyBreakdown product_energy_check(const std::vector<ElasticGraph>& factors,
                                     const Embedding& phi);

struct ProductGrowthRecord {
  int round = 0;
  int factor = 0;
  GrammarOpKind op = GrammarOpKind::add_node;
  int site = 0;
  double sc = 0.0;
  EnergyBreakdown energy;
  int product_vertex_count = 0;
};

struct ProductGrowthResult {
  CubicComplex complex;
  Embedding embedding;  // on the materialized product
  std::vector<ProductGrowthRecord> log;
  std::vector<std::string> warnings;
};

/// Grammar growth where every candidate applies one operation to one factor
/// (the saving over enumerating applications on the whole product). The
/// structural ceiling applies to the transformed factor. The embedding is
/// re-optimized on the re-materialized product; vertices created by a
/// factor operation inherit interpolated positions uniformly across copies.
ProductGrowthResult grow_product(const DataMatrix& X, const CubicComplex& complex,
                                 const Embedding& phi0,
                                 const std::vector<Grammar>& sequence,
                                 const ComplexityBudget& budget,
                                 const GrowParams& params);

void write_complex(std::ostream& out, const CubicComplex& complex,
                   const Embedding& phi);
std::pair<CubicComplex, Embedding> read_complex(std::istream& in);

}  // namespace pgm

#endif
