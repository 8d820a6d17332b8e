#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"

#include "augforge/data.hpp"
#include "augforge/error.hpp"
#include "test_support.hpp"

using namespace augforge;

namespace {

LabeledDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

ParseError parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError(ParseError::Kind::io, 0, "");
}

LabeledDataset labelled(const std::vector<int>& labels, int dim = 2) {
  LabeledDataset ds;
  ds.labels = labels;
  ds.num_classes = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
  ds.features = augforge::testing::random_matrix(static_cast<Eigen::Index>(labels.size()), dim, labels.size());
  return ds;
}

}  // namespace

TEST_CASE("parse_dataset reads labels, features and class count") {
  const LabeledDataset ds = parse("0,1.0,2.0\n1,3.0,4.0\n");
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(ds.features(1, 0) == 3.0);
  CHECK(ds.features(1, 1) == 4.0);

  const LabeledDataset crlf = parse("2,1e-3,-5\r\n\r\n0,0.5,7\r\n");
  CHECK(crlf.size() == 2);
  CHECK(crlf.num_classes == 3);
  CHECK(crlf.features(0, 0) == 1e-3);

  // A file holding only one class still describes a binary task.
  CHECK(parse("0,1.0\n0,2.0\n").num_classes == 2);
}

TEST_CASE("parse_dataset errors carry kind and line") {
  CHECK(parse_error("").kind() == ParseError::Kind::no_samples);
  CHECK(parse_error("\n\n").kind() == ParseError::Kind::no_samples);

  const ParseError ragged = parse_error("0,1.0,2.0\n1,1.0,2.0,3.0\n");
  CHECK(ragged.kind() == ParseError::Kind::ragged_row);
  CHECK(ragged.line() == 2);

  const ParseError text = parse_error("0,1.0\n1,abc\n");
  CHECK(text.kind() == ParseError::Kind::non_numeric);
  CHECK(text.line() == 2);

  const ParseError neg = parse_error("0,1.0\n0,2.0\n-1,3.0\n");
  CHECK(neg.kind() == ParseError::Kind::negative_label);
  CHECK(neg.line() == 3);

  CHECK(parse_error("x,1.0\n").kind() == ParseError::Kind::non_numeric);
  CHECK(parse_error("0\n").kind() == ParseError::Kind::ragged_row);
  CHECK(parse_error("0,nan\n").kind() == ParseError::Kind::non_numeric);
  CHECK(parse_error("0,1.0,\n").kind() == ParseError::Kind::non_numeric);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("dataset CSV round-trips exactly") {
  SyntheticSpec spec = SyntheticSpec::two_class(7, 2.0, 1.0, 20, 3);
  const LabeledDataset ds = make_synthetic(spec);
  augforge::testing::TempDir dir;
  save_dataset(ds, dir / "d.csv");
  CHECK(load_dataset(dir / "d.csv") == ds);
}

TEST_CASE("split sizes, stratification and determinism") {
  std::vector<int> labels(1000);
  for (int i = 0; i < 1000; ++i) labels[static_cast<std::size_t>(i)] = i < 600 ? 0 : 1;
  const LabeledDataset ds = labelled(labels);

  const auto [train, test] = split(ds, SplitSpec{0.5, 9, true});
  CHECK(train.size() == 500);
  CHECK(test.size() == 500);
  CHECK(train.class_counts() == std::vector<std::size_t>{300, 200});

  const auto plain = split_indices(ds, SplitSpec{0.5, 9, false});
  CHECK(plain.train.size() == 500);
  CHECK(plain.test.size() == 500);

  const auto a = split_indices(ds, SplitSpec{0.5, 4, true});
  const auto b = split_indices(ds, SplitSpec{0.5, 4, true});
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(split_indices(ds, SplitSpec{0.5, 5, true}).train != a.train);

  CHECK_THROWS_AS(split_indices(ds, SplitSpec{0.0, 1, true}), ConfigError);
  CHECK_THROWS_AS(split_indices(ds, SplitSpec{1.0, 1, true}), ConfigError);
  CHECK_THROWS_AS(split_indices(labelled({0, 1}), SplitSpec{0.1, 1, false}), ConfigError);
}

TEST_CASE("split is disjoint and covering across random datasets") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(10, 200)(rng);
    const int k = std::uniform_int_distribution<int>(2, 4)(rng);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < k ? i : std::uniform_int_distribution<int>(0, k - 1)(rng);
    const LabeledDataset ds = labelled(labels);
    const double fraction = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
    const bool stratified = trial % 2 == 0;
    SplitIndices s;
    try {
      s = split_indices(ds, SplitSpec{fraction, rng(), stratified});
    } catch (const ConfigError&) {
      continue;  // a side would be empty
    }
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(static_cast<std::size_t>(n));
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
    if (stratified) {
      const auto full = ds.class_counts();
      const auto part = ds.subset(s.train).class_counts();
      for (int c = 0; c < k; ++c)
        CHECK(std::abs(static_cast<double>(part[c]) - fraction * static_cast<double>(full[c])) <= 1.0);
    }
  }
}

TEST_CASE("one_hot and argmax") {
  CHECK(one_hot(0, 2) == Vector::Unit(2, 0));
  CHECK(one_hot(1, 2) == Vector::Unit(2, 1));
  Vector five(5);
  five << 0, 0, 0, 1, 0;
  CHECK(one_hot(3, 5) == five);
  CHECK_THROWS_AS(one_hot(2, 2), ConfigError);
  CHECK_THROWS_AS(one_hot(-1, 2), ConfigError);

  for (int k = 2; k <= 6; ++k)
    for (int c = 0; c < k; ++c) CHECK(argmax(one_hot(c, k).transpose()) == c);

  Eigen::RowVectorXd tie(3);
  tie << 0.4, 0.4, 0.2;
  CHECK(argmax(tie) == 0);

  const std::vector<int> labels{2, 0, 1, 1};
  CHECK(argmax_rows(one_hot_rows(labels, 3)) == labels);
}

TEST_CASE("synthetic data: separable task, degenerate covariance, determinism") {
  const int dim = 10;
  SyntheticSpec spec;
  spec.dim = dim;
  spec.class_means = {{Vector::Constant(dim, -1.0)}, {Vector::Constant(dim, 1.0)}};
  spec.cov_scale = 0.5;
  spec.samples_per_class = {1000, 1000};
  spec.seed = 5;
  const LabeledDataset train = make_synthetic(spec);
  spec.seed = 6;
  const LabeledDataset test = make_synthetic(spec);
  CHECK(train.size() == 2000);
  CHECK(train.class_counts() == std::vector<std::size_t>{1000, 1000});

  // Fisher discriminant fitted on train, scored on test.
  Vector m0 = Vector::Zero(dim), m1 = Vector::Zero(dim);
  for (std::size_t i = 0; i < train.size(); ++i)
    (train.labels[i] ? m1 : m0) += train.features.row(static_cast<Eigen::Index>(i)).transpose() / 1000.0;
  Matrix scatter = Matrix::Zero(dim, dim);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Vector d = train.features.row(static_cast<Eigen::Index>(i)).transpose() - (train.labels[i] ? m1 : m0);
    scatter += d * d.transpose();
  }
  const Vector w = scatter.ldlt().solve(m1 - m0);
  const double threshold = w.dot(m0 + m1) / 2.0;
  int correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    correct += (test.features.row(static_cast<Eigen::Index>(i)).dot(w) > threshold) == (test.labels[i] == 1);
  CHECK(correct / 2000.0 > 0.95);

  SyntheticSpec flat = spec;
  flat.cov_scale = 0.0;
  const LabeledDataset exact = make_synthetic(flat);
  for (std::size_t i = 0; i < exact.size(); ++i)
    CHECK(exact.features.row(static_cast<Eigen::Index>(i)).transpose() == flat.class_means[exact.labels[i]][0]);

  CHECK(make_synthetic(spec) == make_synthetic(spec));
}

TEST_CASE("synthetic data: per-dimension variance and two-class helper") {
  SyntheticSpec spec;
  spec.dim = 4;
  spec.class_means = {{Vector::Zero(4)}, {Vector::Zero(4)}};
  spec.cov_scale = 0.7;
  spec.samples_per_class = {50000, 50000};
  spec.seed = 17;
  const LabeledDataset ds = make_synthetic(spec);
  const Eigen::RowVectorXd mean = ds.features.colwise().mean();
  const Eigen::RowVectorXd var = (ds.features.rowwise() - mean).array().square().colwise().mean();
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(var(c) == doctest::Approx(0.7).epsilon(0.1));

  const SyntheticSpec two = SyntheticSpec::two_class(20, 3.0, 1.0, 10, 1, 2);
  REQUIRE(two.class_means.size() == 2);
  CHECK((two.class_means[0][0] - two.class_means[1][0]).norm() == doctest::Approx(3.0));
  CHECK((two.class_means[0][0] + two.class_means[1][0]).norm() == doctest::Approx(0.0).epsilon(1e-12));

  SyntheticSpec bad = spec;
  bad.dim = 1;
  CHECK_THROWS_AS(make_synthetic(bad), ConfigError);
  bad = spec;
  bad.cov_scale = -1.0;
  CHECK_THROWS_AS(make_synthetic(bad), ConfigError);
}

TEST_CASE("mixture components are picked per class") {
  SyntheticSpec spec;
  spec.dim = 2;
  spec.class_means = {{Vector::Constant(2, -5.0), Vector::Constant(2, 5.0)}, {Vector::Zero(2)}};
  spec.cov_scale = 0.0;
  spec.samples_per_class = {400, 10};
  spec.seed = 3;
  const LabeledDataset ds = make_synthetic(spec);
  int low = 0, high = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != 0) continue;
    (ds.features(static_cast<Eigen::Index>(i), 0) < 0 ? low : high)++;
  }
  CHECK(low + high == 400);
  CHECK(low > 150);
  CHECK(high > 150);
}

TEST_CASE("batch sampling without replacement") {
  const LabeledDataset ds = labelled({0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0});
  const std::size_t n = ds.size();

  Rng rng(3);
  const Batch full = sample_batch(ds, n, rng);
  std::vector<std::size_t> idx = full.indices;
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> expected(n);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(idx == expected);
  for (std::size_t r = 0; r < n; ++r) {
    CHECK(full.inputs.row(static_cast<Eigen::Index>(r)) == ds.features.row(static_cast<Eigen::Index>(full.indices[r])));
    CHECK(argmax(full.targets.row(static_cast<Eigen::Index>(r))) == ds.labels[full.indices[r]]);
    CHECK(full.targets.row(static_cast<Eigen::Index>(r)).sum() == 1.0);
  }

  BatchSampler a(n, 9), b(n, 9);
  std::vector<std::size_t> seq_a, seq_b;
  for (int i = 0; i < 8; ++i) {
    auto x = a.next_indices(3);
    auto y = b.next_indices(3);
    seq_a.insert(seq_a.end(), x.begin(), x.end());
    seq_b.insert(seq_b.end(), y.begin(), y.end());
  }
  CHECK(seq_a == seq_b);
  // Each epoch (12 consecutive indices) is a permutation.
  for (std::size_t e = 0; e < 2; ++e) {
    std::vector<std::size_t> epoch(seq_a.begin() + e * n, seq_a.begin() + (e + 1) * n);
    std::sort(epoch.begin(), epoch.end());
    CHECK(epoch == expected);
  }

  BatchSampler c(n, 1);
  CHECK_THROWS_AS(c.next_indices(0), ConfigError);
  CHECK_THROWS_AS(c.next_indices(n + 1), ConfigError);
  CHECK_THROWS_AS(sample_batch(ds, 0, rng), ConfigError);
}
