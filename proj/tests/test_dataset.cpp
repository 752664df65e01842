#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "pgm/dataset.hpp"

using namespace pgm;

namespace {

GappedVector gv(std::vector<double> values, std::vector<bool> gaps = {}) {
  const Eigen::Index m = static_cast<Eigen::Index>(values.size());
  Eigen::VectorXd v(m);
  Eigen::Array<bool, Eigen::Dynamic, 1> g(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    v(i) = values[static_cast<size_t>(i)];
    g(i) = gaps.empty() ? false : gaps[static_cast<size_t>(i)];
  }
  return GappedVector(std::move(v), std::move(g));
}

DataMatrix matrix_of(std::vector<std::vector<double>> rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd values(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      values(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return DataMatrix::complete(std::move(values));
}

}  // namespace

TEST_CASE("gapped dot product") {
  CHECK(gapped_dot(gv({1, 0, 3}, {false, true, false}),
                   gv({2, 5, 0}, {false, false, true})) == doctest::Approx(2.0));
  CHECK(gapped_dot(gv({1, 2}), gv({1, 2})) == doctest::Approx(5.0));
  CHECK(gapped_dot(gv({0, 4}, {true, false}), gv({7, 0}, {false, true})) == 0.0);
}

TEST_CASE("gapped distance") {
  CHECK(gapped_distance(gv({1, 0, 3}, {false, true, false}),
                        gv({2, 5, 0}, {false, false, true})) == doctest::Approx(1.0));
  const GappedVector x = gv({1.5, -2.0, 0.25});
  CHECK(gapped_distance(x, x) == 0.0);
  CHECK(gapped_distance(gv({0, 0}), gv({3, 4})) == doctest::Approx(5.0));
  CHECK_THROWS_AS(gapped_distance(gv({0, 4}, {true, false}), gv({7, 0}, {false, true})),
                  Error);
}

TEST_CASE("gapped forms reduce to standard ones without gaps") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd a = pgm::test::random_matrix(6, 1, rng);
    const Eigen::VectorXd b = pgm::test::random_matrix(6, 1, rng);
    CHECK(gapped_dot(GappedVector(a), GappedVector(b)) ==
          doctest::Approx(a.dot(b)).epsilon(1e-12));
    CHECK(gapped_distance(GappedVector(a), GappedVector(b)) ==
          doctest::Approx((a - b).norm()).epsilon(1e-12));
  }
}

TEST_CASE("gapped distance symmetry") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> va, vb;
    std::vector<bool> ga, gb;
    for (int i = 0; i < 5; ++i) {
      va.push_back(unit(rng));
      vb.push_back(unit(rng));
      ga.push_back(unit(rng) < 0.3);
      gb.push_back(unit(rng) < 0.3);
    }
    ga[0] = gb[0] = false;  // keep one shared coordinate
    const GappedVector a = gv(va, ga), b = gv(vb, gb);
    CHECK(gapped_distance(a, b) == gapped_distance(b, a));
    CHECK(gapped_distance(a, a) == 0.0);
  }
}

TEST_CASE("mean point of complete data") {
  CHECK(mean_point(matrix_of({{0, 0}, {2, 0}, {1, 3}})).isApprox(
      Eigen::Vector2d(1.0, 1.0)));
  const Eigen::Vector2d single(4.0, -1.0);
  CHECK(mean_point(matrix_of({{4, -1}})).isApprox(single));
}

TEST_CASE("gapped mean point matches a brute-force grid search") {
  Eigen::MatrixXd values(2, 2);
  values << 1, 0, 3, 4;
  GapMask gaps(2, 2);
  gaps << false, true, false, false;
  const DataMatrix X(values, gaps, Eigen::Vector2d(1, 1));

  const Eigen::VectorXd mean = mean_point(X);
  CHECK(mean(0) == doctest::Approx(2.0));
  CHECK(mean(1) == doctest::Approx(4.0));

  // Exhaustive search over a fine grid around the returned point.
  auto objective = [&](double y0, double y1) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double d2 = 0.0;
      if (!X.gaps()(i, 0)) d2 += (X.values()(i, 0) - y0) * (X.values()(i, 0) - y0);
      if (!X.gaps()(i, 1)) d2 += (X.values()(i, 1) - y1) * (X.values()(i, 1) - y1);
      acc += d2;
    }
    return acc;
  };
  const double best = objective(mean(0), mean(1));
  for (double y0 = 0.0; y0 <= 4.0; y0 += 0.05)
    for (double y1 = 2.0; y1 <= 6.0; y1 += 0.05)
      CHECK(objective(y0, y1) >= best - 1e-12);
}

TEST_CASE("mean point is a stationary minimizer of the gapped objective") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd values = pgm::test::random_matrix(12, 4, rng);
  GapMask gaps = GapMask::Constant(12, 4, false);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (i % 3 == 0 && unit(rng) < 0.4) gaps(i, j) = true;
  for (Eigen::Index i = 0; i < 12; ++i)
    if (gaps.row(i).all()) gaps(i, 0) = false;
  Eigen::VectorXd weights(12);
  for (Eigen::Index i = 0; i < 12; ++i) weights(i) = 0.5 + unit(rng);
  const DataMatrix X(values, gaps, weights);

  auto objective = [&](const Eigen::VectorXd& y) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      acc += X.weights()(i) * gapped_sqdist_to_point(X.values(), X.gaps(), i, y);
    return acc;
  };
  const Eigen::VectorXd mean = mean_point(X);
  const double at_mean = objective(mean);
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (double h : {1e-4, -1e-4}) {
      Eigen::VectorXd y = mean;
      y(j) += h;
      CHECK(objective(y) >= at_mean - 1e-9);
    }
  }
}

TEST_CASE("weighted mean squared distance") {
  Eigen::MatrixXd Y1(1, 2);
  Y1 << 1, 0;
  CHECK(msd_weighted(matrix_of({{0, 0}, {2, 0}}), Y1) == doctest::Approx(1.0));

  const DataMatrix X = matrix_of({{0, 1}, {2, 3}, {-1, 0.5}});
  CHECK(msd_weighted(X, X.values()) == 0.0);

  Eigen::MatrixXd values(2, 2);
  values << 0, 0, 4, 0;
  const DataMatrix W = DataMatrix::complete(values, Eigen::Vector2d(1, 3));
  Eigen::MatrixXd origin(1, 2);
  origin << 0, 0;
  CHECK(msd_weighted(W, origin) == doctest::Approx(std::sqrt(12.0)));
}

TEST_CASE("adding a candidate point never worsens msd") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 20; ++t) {
    const DataMatrix X = pgm::test::random_dataset(15, 3, rng);
    const Eigen::MatrixXd Y = pgm::test::random_matrix(4, 3, rng);
    Eigen::MatrixXd bigger(5, 3);
    bigger.topRows(4) = Y;
    bigger.row(4) = pgm::test::random_matrix(1, 3, rng);
    CHECK(msd_weighted(X, bigger) <= msd_weighted(X, Y) + 1e-12);
  }
}

TEST_CASE("data radius") {
  CHECK(data_radius(matrix_of({{-1, 0}, {1, 0}})) == doctest::Approx(1.0));
  CHECK(data_radius(matrix_of({{3, 3}})) == 0.0);

  const DataMatrix X = matrix_of({{0, 0}, {0, 4}, {3, 0}});
  const Eigen::VectorXd mean = mean_point(X);
  CHECK(mean.isApprox(Eigen::Vector2d(1.0, 4.0 / 3.0)));
  double expected = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    expected = std::max(expected, (X.values().row(i).transpose() - mean).norm());
  CHECK(data_radius(X) == doctest::Approx(expected));
}

TEST_CASE("load_table basics") {
  std::istringstream in("1,2\n3,4\n");
  const LoadedTable t = load_table(in);
  CHECK(t.data.rows() == 2);
  CHECK(t.data.cols() == 2);
  CHECK_FALSE(t.data.has_gaps());
  CHECK(t.data.values()(1, 1) == 4.0);
}

TEST_CASE("load_table gap token") {
  std::istringstream in("1,NA\n3,4\n");
  const LoadedTable t = load_table(in);
  CHECK(t.data.gaps()(0, 1));
  CHECK_FALSE(t.data.gaps()(0, 0));
}

TEST_CASE("load_table error contracts") {
  {
    std::istringstream in("1,x\n");
    try {
      load_table(in);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.category() == "parse-error");
      CHECK(std::string(e.what()).find("row 0") != std::string::npos);
      CHECK(std::string(e.what()).find("column 1") != std::string::npos);
    }
  }
  {
    std::istringstream in("");
    CHECK_THROWS_AS(load_table(in), Error);
  }
  {
    std::istringstream in("NA,NA\n1,2\n");  // fully gapped row
    CHECK_THROWS_AS(load_table(in), Error);
  }
  {
    std::istringstream in("NA,1\nNA,2\n");  // empty column
    CHECK_THROWS_AS(load_table(in), Error);
  }
}

TEST_CASE("load_table header, weights and labels") {
  std::istringstream in("a,b,w,cls\n1,2,2.5,x\n3,4,1,y\n");
  TableOptions options;
  options.header = true;
  options.weight_column = 2;
  options.label_column = 3;
  const LoadedTable t = load_table(in, options);
  CHECK(t.data.cols() == 2);
  CHECK(t.data.weights()(0) == 2.5);
  CHECK(t.labels == std::vector<std::string>{"x", "y"});
  CHECK(t.column_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("fasta reading concatenates sequence lines") {
  std::istringstream in(">header line\nacgt\nACGT\n>another\nTT\n");
  CHECK(read_fasta(in) == "ACGTACGTTT");
}

TEST_CASE("triplet frequencies of a uniform sequence") {
  std::mt19937_64 rng(1);
  const DataMatrix X = triplet_frequencies("AAAAAA", 6, 1, rng);
  CHECK(X.cols() == 64);
  CHECK(X.values()(0, 0) == doctest::Approx(1.0));  // AAA is column 0
  CHECK(X.values().row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("triplet frequency rows lie on the simplex") {
  std::mt19937_64 rng(2);
  std::string sequence;
  std::uniform_int_distribution<int> base(0, 3);
  for (int i = 0; i < 2000; ++i) sequence.push_back("ACGT"[base(rng)]);
  sequence[100] = 'N';  // skipped triplets renormalize the rest
  const DataMatrix X = triplet_frequencies(sequence, 300, 50, rng);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    CHECK(X.values().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(X.values().row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("periodic sequence maps every fragment to one repeated triplet") {
  std::string sequence;
  for (int i = 0; i < 100; ++i) sequence += "ACG";
  std::mt19937_64 rng(3);
  const DataMatrix X = triplet_frequencies(sequence, 30, 40, rng);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int nonzero = 0;
    for (Eigen::Index j = 0; j < 64; ++j)
      if (X.values()(i, j) > 0.0) ++nonzero;
    CHECK(nonzero == 1);  // each window reads one triplet in a fixed phase
    CHECK(X.values().row(i).maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("triplet frequency errors") {
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(triplet_frequencies("ACGT", 10, 1, rng), Error);
  CHECK_THROWS_AS(triplet_frequencies("ACGTACGT", 2, 1, rng), Error);
  CHECK_THROWS_AS(triplet_frequencies("NNNNNN", 6, 1, rng), Error);
}

TEST_CASE("triplet names order") {
  CHECK(triplet_name(0) == "AAA");
  CHECK(triplet_name(1) == "AAC");
  CHECK(triplet_name(63) == "TTT");
}

TEST_CASE("data matrix invariants") {
  Eigen::MatrixXd values(2, 2);
  values << 1, 2, 3, 4;
  CHECK_THROWS_AS(DataMatrix::complete(values, Eigen::Vector2d(1.0, 0.0)), Error);
  GapMask gaps(2, 2);
  gaps << true, true, false, false;
  CHECK_THROWS_AS(DataMatrix(values, gaps, Eigen::Vector2d(1, 1)), Error);
}
