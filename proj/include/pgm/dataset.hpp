#ifndef PGM_DATASET_HPP
#define PGM_DATASET_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgm/error.hpp"

namespace pgm {

using GapMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// One observation with possibly missing coordinates. A gap flag set to
/// true means the coordinate is absent; its stored value is meaningless.
struct GappedVector {
  Eigen::VectorXd values;
  Eigen::Array<bool, Eigen::Dynamic, 1> gaps;

  /// Complete vector, no gaps.
  explicit GappedVector(Eigen::VectorXd v)
      : values(std::move(v)),
        gaps(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(values.size(), false)) {}

  GappedVector(Eigen::VectorXd v, Eigen::Array<bool, Eigen::Dynamic, 1> g);

  Eigen::Index size() const { return values.size(); }
  bool present(Eigen::Index i) const { return !gaps(i); }
  bool has_gaps() const { return gaps.any(); }
};

/// N weighted observations in R^m with a per-cell gap mask.
/// Immutable after construction.
class DataMatrix {
 public:
  /// Validates: N >= 1, m >= 1, weights positive, no fully-gapped row,
  /// every column has at least one present value.
  DataMatrix(Eigen::MatrixXd values, GapMask gaps, Eigen::VectorXd weights);

  static DataMatrix complete(Eigen::MatrixXd values);
  static DataMatrix complete(Eigen::MatrixXd values, Eigen::VectorXd weights);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const GapMask& gaps() const { return gaps_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_weight() const { return total_weight_; }
  bool has_gaps() const { return has_gaps_; }

  GappedVector row(Eigen::Index i) const;

 private:
  Eigen::MatrixXd values_;
  GapMask gaps_;
  Eigen::VectorXd weights_;
  double total_weight_;
  bool has_gaps_;
};

/// Scalar product restricted to coordinates present in both vectors.
/// Empty shared support gives 0.
double gapped_dot(const GappedVector& x, const GappedVector& y);

/// Euclidean distance restricted to shared-present coordinates.
/// Throws "degenerate-support" when no coordinate is shared.
double gapped_distance(const GappedVector& x, const GappedVector& y);

/// Squared distance from a gapped observation to a complete point,
/// restricted to the observation's present coordinates.
double gapped_sqdist_to_point(const Eigen::MatrixXd& values, const GapMask& gaps,
                              Eigen::Index row, const Eigen::VectorXd& point);

/// Weighted mean; for gapped data the per-coordinate weighted mean over
/// present cells (the minimizer of the weighted sum of squared gapped
/// distances).
Eigen::VectorXd mean_point(const DataMatrix& X);

/// Root of the weighted mean squared distance to the nearest point of Y
/// (rows of Y are the candidate points).
double msd_weighted(const DataMatrix& X, const Eigen::MatrixXd& Y);

/// Max distance from any observation to the mean point.
double data_radius(const DataMatrix& X);

struct TableOptions {
  char delimiter = ',';
  std::string gap_token = "NA";
  bool header = false;
  std::optional<int> weight_column;  // zero-based, counted over all columns
  std::optional<int> label_column;   // zero-based; excluded from the matrix
};

struct LoadedTable {
  DataMatrix data;
  std::vector<std::string> labels;        // empty unless label_column set
  std::vector<std::string> column_names;  // empty unless header
};

/// Parses delimited numeric text into a DataMatrix. Cells equal to the gap
/// token become gaps. Malformed cells raise "parse-error" with row/column;
/// rows violating DataMatrix invariants raise "invariant-violation".
LoadedTable load_table(std::istream& in, const TableOptions& options = {});

/// Reads a FASTA stream: lines starting with '>' are headers, everything
/// else is concatenated into one sequence.
std::string read_fasta(std::istream& in);

/// Samples n_fragments windows of fragment_width symbols (uniform start
/// positions, with replacement) and returns per-fragment frequencies of the
/// 64 non-overlapping triplets read from the window start. Triplets
/// containing a non-ACGT symbol are skipped and the frequencies
/// renormalized over counted triplets.
DataMatrix triplet_frequencies(const std::string& sequence, int fragment_width,
                               int n_fragments, std::mt19937_64& rng);

/// Column order of triplet_frequencies output: AAA, AAC, AAG, AAT, ACA, ...
std::string triplet_name(int index);

}  // namespace pgm

#endif
