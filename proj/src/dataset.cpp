#include "pgm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

namespace pgm {

GappedVector::GappedVector(Eigen::VectorXd v, Eigen::Array<bool, Eigen::Dynamic, 1> g)
    : values(std::move(v)), gaps(std::move(g)) {
  if (values.size() != gaps.size())
    throw Error("dimension-mismatch", "gap mask length does not match vector length");
  if (values.size() == 0 || gaps.all())
    throw Error("invariant-violation", "vector has no present coordinate");
}

DataMatrix::DataMatrix(Eigen::MatrixXd values, GapMask gaps, Eigen::VectorXd weights)
    : values_(std::move(values)), gaps_(std::move(gaps)), weights_(std::move(weights)) {
  const Eigen::Index n = values_.rows();
  const Eigen::Index m = values_.cols();
  if (n < 1 || m < 1) throw Error("invariant-violation", "dataset must be at least 1x1");
  if (gaps_.rows() != n || gaps_.cols() != m)
    throw Error("dimension-mismatch", "gap mask shape does not match values");
  if (weights_.size() != n)
    throw Error("dimension-mismatch", "weight vector length does not match row count");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights_(i) > 0.0))
      throw Error("invariant-violation",
                  "weight of row " + std::to_string(i) + " is not positive");
    if (gaps_.row(i).all())
      throw Error("invariant-violation", "row " + std::to_string(i) + " is fully gapped");
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (gaps_.col(j).all())
      throw Error("invariant-violation",
                  "column " + std::to_string(j) + " has no present value");
  }
  total_weight_ = weights_.sum();
  has_gaps_ = gaps_.any();
}

DataMatrix DataMatrix::complete(Eigen::MatrixXd values) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(values.rows());
  return complete(std::move(values), std::move(w));
}

DataMatrix DataMatrix::complete(Eigen::MatrixXd values, Eigen::VectorXd weights) {
  GapMask gaps = GapMask::Constant(values.rows(), values.cols(), false);
  return DataMatrix(std::move(values), std::move(gaps), std::move(weights));
}

GappedVector DataMatrix::row(Eigen::Index i) const {
  return GappedVector(values_.row(i).transpose(), gaps_.row(i).transpose());
}

double gapped_dot(const GappedVector& x, const GappedVector& y) {
  if (x.size() != y.size())
    throw Error("dimension-mismatch", "vectors differ in length");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x.present(i) && y.present(i)) acc += x.values(i) * y.values(i);
  return acc;
}

double gapped_distance(const GappedVector& x, const GappedVector& y) {
  if (x.size() != y.size())
    throw Error("dimension-mismatch", "vectors differ in length");
  double acc = 0.0;
  bool shared = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.present(i) && y.present(i)) {
      const double d = x.values(i) - y.values(i);
      acc += d * d;
      shared = true;
    }
  }
  if (!shared)
    throw Error("degenerate-support", "vectors share no present coordinate");
  return std::sqrt(acc);
}

double gapped_sqdist_to_point(const Eigen::MatrixXd& values, const GapMask& gaps,
                              Eigen::Index row, const Eigen::VectorXd& point) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    if (!gaps(row, j)) {
      const double d = values(row, j) - point(j);
      acc += d * d;
    }
  }
  return acc;
}

Eigen::VectorXd mean_point(const DataMatrix& X) {
  const Eigen::Index m = X.cols();
  if (!X.has_gaps()) {
    Eigen::VectorXd mean = X.values().transpose() * X.weights();
    return mean / X.total_weight();
  }
  Eigen::VectorXd num = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double w = X.weights()(i);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!X.gaps()(i, j)) {
        num(j) += w * X.values()(i, j);
        den(j) += w;
      }
    }
  }
  return num.array() / den.array();  // den > 0 by the column-presence invariant
}

double msd_weighted(const DataMatrix& X, const Eigen::MatrixXd& Y) {
  if (Y.rows() < 1) throw Error("invariant-violation", "point set is empty");
  if (Y.cols() != X.cols())
    throw Error("dimension-mismatch", "point set dimension does not match data");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < Y.rows(); ++k) {
      const double d = gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                              Y.row(k).transpose());
      if (d < best) best = d;
    }
    acc += X.weights()(i) * best;
  }
  return std::sqrt(acc / X.total_weight());
}

double data_radius(const DataMatrix& X) {
  const Eigen::VectorXd mean = mean_point(X);
  double best = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    best = std::max(best, gapped_sqdist_to_point(X.values(), X.gaps(), i, mean));
  return std::sqrt(best);
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

LoadedTable load_table(std::istream& in, const TableOptions& options) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> column_names;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line, options.delimiter);
    if (first && options.header) {
      for (auto& c : cells) column_names.push_back(trim(c));
      first = false;
      continue;
    }
    first = false;
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw Error("empty-input", "no data rows");

  const size_t ncols = rows[0].size();
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != ncols)
      throw Error("parse-error", "row " + std::to_string(i) + " has " +
                                     std::to_string(rows[i].size()) + " cells, expected " +
                                     std::to_string(ncols));
  }
  if (options.weight_column && (*options.weight_column < 0 ||
                                static_cast<size_t>(*options.weight_column) >= ncols))
    throw Error("parse-error", "weight column out of range");
  if (options.label_column && (*options.label_column < 0 ||
                               static_cast<size_t>(*options.label_column) >= ncols))
    throw Error("parse-error", "label column out of range");

  std::vector<int> value_cols;
  for (size_t j = 0; j < ncols; ++j) {
    const int ji = static_cast<int>(j);
    if (options.weight_column && *options.weight_column == ji) continue;
    if (options.label_column && *options.label_column == ji) continue;
    value_cols.push_back(ji);
  }
  if (value_cols.empty()) throw Error("empty-input", "no value columns left");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(value_cols.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, m);
  GapMask gaps = GapMask::Constant(n, m, false);
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
  std::vector<std::string> labels;

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::string cell = trim(rows[i][value_cols[j]]);
      if (cell == options.gap_token) {
        gaps(i, j) = true;
        continue;
      }
      double v;
      if (!parse_double(cell, v))
        throw Error("parse-error", "row " + std::to_string(i) + " column " +
                                       std::to_string(value_cols[j]) +
                                       ": cannot parse '" + cell + "'");
      values(i, j) = v;
    }
    if (options.weight_column) {
      const std::string cell = trim(rows[i][*options.weight_column]);
      double w;
      if (!parse_double(cell, w))
        throw Error("parse-error", "row " + std::to_string(i) + " column " +
                                       std::to_string(*options.weight_column) +
                                       ": cannot parse weight '" + cell + "'");
      weights(i) = w;
    }
    if (options.label_column) labels.push_back(trim(rows[i][*options.label_column]));
  }

  std::vector<std::string> value_names;
  if (!column_names.empty()) {
    for (int j : value_cols)
      if (static_cast<size_t>(j) < column_names.size())
        value_names.push_back(column_names[j]);
  }
  return LoadedTable{DataMatrix(std::move(values), std::move(gaps), std::move(weights)),
                     std::move(labels), std::move(value_names)};
}

std::string read_fasta(std::istream& in) {
  std::string seq, line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '>') continue;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c)))
        seq.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return seq;
}

namespace {

int base_index(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return -1;
  }
}

}  // namespace

std::string triplet_name(int index) {
  static const char bases[] = "ACGT";
  std::string s(3, 'A');
  s[0] = bases[(index >> 4) & 3];
  s[1] = bases[(index >> 2) & 3];
  s[2] = bases[index & 3];
  return s;
}

DataMatrix triplet_frequencies(const std::string& sequence, int fragment_width,
                               int n_fragments, std::mt19937_64& rng) {
  if (fragment_width < 3)
    throw Error("invariant-violation", "fragment width must be at least 3");
  if (static_cast<int>(sequence.size()) < fragment_width)
    throw Error("sequence-too-short",
                "sequence length " + std::to_string(sequence.size()) +
                    " is below fragment width " + std::to_string(fragment_width));
  if (n_fragments < 1) throw Error("invariant-violation", "need at least one fragment");

  const int max_start = static_cast<int>(sequence.size()) - fragment_width;
  std::uniform_int_distribution<int> start_dist(0, max_start);
  const int triplets_per_fragment = fragment_width / 3;

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n_fragments, 64);
  for (int f = 0; f < n_fragments; ++f) {
    const int start = start_dist(rng);
    int counted = 0;
    for (int t = 0; t < triplets_per_fragment; ++t) {
      const int pos = start + 3 * t;
      const int a = base_index(sequence[pos]);
      const int b = base_index(sequence[pos + 1]);
      const int c = base_index(sequence[pos + 2]);
      if (a < 0 || b < 0 || c < 0) continue;  // skip triplets with non-ACGT symbols
      values(f, (a << 4) | (b << 2) | c) += 1.0;
      ++counted;
    }
    if (counted == 0)
      throw Error("invariant-violation",
                  "fragment at position " + std::to_string(start) +
                      " contains no valid triplet");
    values.row(f) /= static_cast<double>(counted);
  }
  return DataMatrix::complete(std::move(values));
}

}  // namespace pgm
