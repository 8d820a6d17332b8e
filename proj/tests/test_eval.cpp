#include <cmath>
#include <numeric>

#include "doctest.h"

#include "augforge/error.hpp"
#include "augforge/eval.hpp"
#include "test_support.hpp"

using namespace augforge;
using augforge::testing::random_matrix;

namespace {

// Row-normalized random probabilities.
Matrix random_probs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Matrix p = random_matrix(rows, cols, seed).array().exp();
  for (Eigen::Index r = 0; r < rows; ++r) p.row(r) /= p.row(r).sum();
  return p;
}

// Perceptron run to convergence. Returns true with a strictly separating
// hyperplane as certificate, false if none is found within the budget.
bool separable_by_perceptron(const LabeledDataset& ds, int max_epochs = 10000) {
  const Eigen::Index d = ds.features.cols();
  Vector w = Vector::Zero(d + 1);
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    int mistakes = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      Vector x(d + 1);
      x << ds.features.row(static_cast<Eigen::Index>(i)).transpose(), 1.0;
      const double y = ds.labels[i] == 1 ? 1.0 : -1.0;
      if (y * w.dot(x) <= 0.0) {
        w += y * x;
        ++mistakes;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

ClassifierOptions small_classifier(std::uint64_t seed) {
  ClassifierOptions o;
  o.hidden = {16};
  o.epochs = 40;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("normal-approximation significance test") {
  const double p = binomial_p_value(530, 1000, 0.5, SignificanceTest::normal_approximation);
  const double z = 0.03 / std::sqrt(0.25 / 1000);
  CHECK(z == doctest::Approx(1.897).epsilon(1e-3));
  CHECK(p == doctest::Approx(0.0289).epsilon(1e-2));
  CHECK(p < 0.05);

  CHECK(binomial_p_value(500, 1000, 0.5, SignificanceTest::normal_approximation) == 0.5);

  const std::vector<int> truth(1000, 1);
  std::vector<int> pred(1000, 0);
  std::fill(pred.begin(), pred.begin() + 563, 1);
  const EvalReport r = report_from_predictions(pred, truth, 0.5);
  CHECK(r.accuracy == 0.563);
  CHECK(r.correct == 563);
  CHECK(r.n == 1000);
  CHECK(r.significant_at_5pct);

  // Same accuracy, more samples, smaller p.
  double previous = 1.0;
  for (std::size_t n : {100u, 200u, 400u, 800u, 1600u}) {
    const double pn = binomial_p_value(n * 55 / 100, n, 0.5, SignificanceTest::normal_approximation);
    CHECK(pn < previous);
    previous = pn;
  }

  CHECK_THROWS_AS(binomial_p_value(1, 0, 0.5, SignificanceTest::normal_approximation), ConfigError);
  CHECK_THROWS_AS(binomial_p_value(5, 4, 0.5, SignificanceTest::normal_approximation), ConfigError);
  CHECK_THROWS_AS(report_from_predictions(std::vector<int>{}, std::vector<int>{}, 0.5), ConfigError);
}

TEST_CASE("exact binomial tail") {
  // Direct summation with exact binomial coefficients for small n.
  auto tail = [](int k, int n, double c) {
    double s = 0.0;
    for (int i = k; i <= n; ++i) {
      double coef = 1.0;
      for (int j = 1; j <= i; ++j) coef = coef * (n - i + j) / j;
      s += coef * std::pow(c, i) * std::pow(1 - c, n - i);
    }
    return s;
  };
  for (int n : {1, 5, 12, 30}) {
    for (int k = 0; k <= n; ++k) {
      for (double c : {0.5, 1.0 / 3.0}) {
        CHECK(binomial_p_value(static_cast<std::size_t>(k), static_cast<std::size_t>(n), c,
                               SignificanceTest::exact_binomial) ==
              doctest::Approx(tail(k, n, c)).epsilon(1e-9));
      }
    }
  }
  CHECK(binomial_p_value(0, 10, 0.5, SignificanceTest::exact_binomial) == 1.0);
}

TEST_CASE("train_classifier fits separable data and is deterministic") {
  const LabeledDataset ds = make_synthetic(SyntheticSpec::two_class(5, 8.0, 1.0, 100, 4));
  REQUIRE(separable_by_perceptron(ds));
  const MlpModel m = train_classifier(ds, small_classifier(1));
  CHECK(evaluate(m, ds, 0.5).accuracy > 0.99);
  CHECK(train_classifier(ds, small_classifier(1)) == m);
  CHECK_FALSE(train_classifier(ds, small_classifier(2)) == m);

  ClassifierOptions none = small_classifier(1);
  none.epochs = 0;
  const MlpModel untrained = train_classifier(ds, none);
  CHECK(untrained == init_model(std::vector<int>{5, 16, 2}, Activation::tanh, Activation::softmax,
                                derive_seed(1, "classifier-init")));

  ClassifierOptions logistic = small_classifier(3);
  logistic.hidden.clear();
  CHECK(train_classifier(ds, logistic).layer_dims == std::vector<int>{5, 2});

  CHECK_THROWS_AS(train_classifier(LabeledDataset{}, small_classifier(1)), ConfigError);
}

TEST_CASE("evaluate reports exact accuracy") {
  const LabeledDataset ds = make_synthetic(SyntheticSpec::two_class(4, 1.0, 1.0, 37, 5));
  const MlpModel m = train_classifier(ds, small_classifier(2));
  const EvalReport r = evaluate(m, ds, 0.5);
  CHECK(r.n == 74);
  CHECK(r.accuracy * 74 == doctest::Approx(static_cast<double>(r.correct)));
  CHECK(r.p_value_vs_chance >= 0.0);
  CHECK(r.p_value_vs_chance <= 1.0);
  CHECK_THROWS_AS(evaluate(m, LabeledDataset{}, 0.5), ConfigError);
}

TEST_CASE("bag_predict worked examples") {
  Matrix a(1, 2), b(1, 2);
  a << 0.6, 0.4;
  b << 0.2, 0.8;
  const std::vector<Matrix> probs{a, b};
  CHECK(bag_predict_from_probs(probs, std::vector<double>{0.5, 0.5}) == std::vector<int>{1});
  CHECK(bag_predict_from_probs(probs, std::vector<double>{1.0, 0.0}) == std::vector<int>{0});
  CHECK_THROWS_AS(bag_predict_from_probs(probs, std::vector<double>{1.0}), ConfigError);

  const LabeledDataset ds = make_synthetic(SyntheticSpec::two_class(4, 1.0, 1.0, 30, 6));
  const MlpModel m1 = train_classifier(ds, small_classifier(1));
  const MlpModel m2 = train_classifier(ds, small_classifier(5));
  const std::vector<const MlpModel*> one{&m1}, two{&m1, &m2};
  CHECK(bag_predict(one, std::vector<double>{1.0}, ds.features) == predict(m1, ds.features));
  CHECK(bag_predict(two, std::vector<double>{1.0, 0.0}, ds.features) == predict(m1, ds.features));
  CHECK(bag_predict(two, std::vector<double>{0.0, 1.0}, ds.features) == predict(m2, ds.features));
}

TEST_CASE("tune_bag_weights: corner dominance and uniform tie-break") {
  const int n = 200;
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  const Matrix perfect = one_hot_rows(labels, 2) * 0.8 + Matrix::Constant(n, 2, 0.1);
  Matrix coin(n, 2);
  std::mt19937_64 rng(2);
  for (int i = 0; i < n; ++i) {
    const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    coin.row(i) << p, 1 - p;
  }
  const std::vector<Matrix> mixed{perfect, coin};
  const BagWeights w = tune_bag_weights_from_probs(mixed, labels, 0.05);
  CHECK(w.validation_accuracy == 1.0);
  CHECK(std::abs(w.weights[0] + w.weights[1] - 1.0) <= 1e-9);

  const std::vector<Matrix> same{coin, coin};
  const BagWeights u = tune_bag_weights_from_probs(same, labels, 0.05);
  CHECK(u.weights == std::vector<double>{0.5, 0.5});

  CHECK_THROWS_AS(tune_bag_weights_from_probs(std::vector<Matrix>{}, labels, 0.05), ConfigError);
  CHECK_THROWS_AS(tune_bag_weights_from_probs(mixed, labels, 0.3), ConfigError);
  CHECK_THROWS_AS(tune_bag_weights_from_probs(mixed, std::vector<int>{}, 0.05), ConfigError);
}

TEST_CASE("tune_bag_weights matches a brute-force simplex scan") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const int n = 120;
    std::vector<int> labels(n);
    std::mt19937_64 rng(seed);
    for (auto& y : labels) y = static_cast<int>(rng() % 3);
    const std::vector<Matrix> probs{random_probs(n, 3, seed * 10 + 1), random_probs(n, 3, seed * 10 + 2),
                                    random_probs(n, 3, seed * 10 + 3)};

    int best = -1;
    double best_spread = 0.0;
    std::vector<double> best_w;
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; i + j <= 20; ++j) {
        const double w[3] = {i / 20.0, j / 20.0, (20 - i - j) / 20.0};
        int correct = 0;
        for (int r = 0; r < n; ++r) {
          int arg = 0;
          double top = -1.0;
          for (int c = 0; c < 3; ++c) {
            const double s = w[0] * probs[0](r, c) + w[1] * probs[1](r, c) + w[2] * probs[2](r, c);
            if (s > top) {
              top = s;
              arg = c;
            }
          }
          correct += arg == labels[static_cast<std::size_t>(r)];
        }
        double spread = 0.0;
        for (double x : w) spread += (x - 1.0 / 3.0) * (x - 1.0 / 3.0);
        if (correct > best || (correct == best && spread < best_spread - 1e-12)) {
          best = correct;
          best_spread = spread;
          best_w.assign(w, w + 3);
        }
      }
    }

    const BagWeights got = tune_bag_weights_from_probs(probs, labels, 0.05);
    CHECK(got.validation_accuracy == doctest::Approx(best / static_cast<double>(n)));
    REQUIRE(got.weights.size() == 3);
    for (int c = 0; c < 3; ++c) CHECK(got.weights[c] == doctest::Approx(best_w[c]).epsilon(1e-12));
    double single = 0.0;
    for (const auto& p : probs) {
      const auto pred = argmax_rows(p);
      single = std::max(single, report_from_predictions(pred, labels, 1.0 / 3).accuracy);
    }
    CHECK(got.validation_accuracy >= single);
  }
}

TEST_CASE("size_sweep on a tiny task") {
  const LabeledDataset train = make_synthetic(SyntheticSpec::two_class(4, 3.0, 1.0, 40, 1, 7));
  const LabeledDataset test = make_synthetic(SyntheticSpec::two_class(4, 3.0, 1.0, 40, 2, 7));
  SweepOptions o;
  o.ns = {20, 40, 80};
  o.n_fake = 200;
  o.cgan.noise_dim = 3;
  o.cgan.generator_hidden = {8};
  o.cgan.discriminator_hidden = {8};
  o.cgan.batch_size = 8;
  o.cgan.pretrain_iters = 20;
  o.cgan.finetune_iters = 20;
  o.baseline.epochs = o.reference.epochs = o.fake.epochs = 5;
  o.seed = 4;
  o.threads = 2;

  const SweepResult a = size_sweep(train, test, o);
  REQUIRE(a.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.records[i].n == o.ns[i]);
    CHECK(a.records[i].acc_fake_as_test >= 0.0);
    CHECK(a.records[i].acc_fake_as_test <= 1.0);
    CHECK(a.records[i].acc_fake_as_train >= 0.0);
    CHECK(a.records[i].acc_fake_as_train <= 1.0);
  }
  // Subsets are prefixes of one permutation, hence nested.
  std::vector<std::size_t> order = a.subset_order;
  std::sort(order.begin(), order.end());
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK(order == all);

  o.threads = 1;
  const SweepResult b = size_sweep(train, test, o);
  CHECK(b.subset_order == a.subset_order);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b.records[i].acc_fake_as_test == a.records[i].acc_fake_as_test);
    CHECK(b.records[i].acc_fake_as_train == a.records[i].acc_fake_as_train);
  }

  SweepOptions too_big = o;
  too_big.ns = {20, 81};
  CHECK_THROWS_AS(size_sweep(train, test, too_big), ConfigError);
  SweepOptions unordered = o;
  unordered.ns = {40, 20};
  CHECK_THROWS_AS(size_sweep(train, test, unordered), ConfigError);

  augforge::testing::TempDir dir;
  write_sweep_csv(a, dir / "sweep.csv");
  const std::string csv = augforge::testing::read_file(dir / "sweep.csv");
  CHECK(csv.rfind("N,acc_fake_as_test,acc_fake_as_train\n20,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  write_report_csv({{"C_b", "synthetic", evaluate(train_classifier(train, small_classifier(1)), test, 0.5)}},
                   dir / "report.csv");
  const std::string report = augforge::testing::read_file(dir / "report.csv");
  CHECK(report.rfind("classifier,dataset,n,accuracy,p_value,significant\nC_b,synthetic,80,", 0) == 0);
}
