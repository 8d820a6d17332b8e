#include "augforge/eval.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "augforge/error.hpp"
#include "augforge/parallel.hpp"
#include "parse_util.hpp"

namespace augforge {

MlpModel train_classifier(const LabeledDataset& train, const ClassifierOptions& options) {
  if (train.empty()) throw ConfigError("cannot train a classifier on an empty dataset");
  train.validate();
  if (options.epochs < 0 || options.batch_size < 1) throw ConfigError("invalid classifier training options");
  std::vector<int> dims{train.dim()};
  dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
  dims.push_back(train.num_classes);
  MlpModel model = init_model(dims, options.hidden_activation, Activation::softmax,
                              derive_seed(options.seed, "classifier-init"));
  if (options.epochs == 0) return model;

  OptimizerState opt = OptimizerState::for_model(model, options.optimizer);
  BatchSampler sampler(train.size(), derive_seed(options.seed, "classifier-batches"));
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), train.size());
  const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
  Matrix grad;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const Batch b = sampler.next(train, batch);
      const ForwardTrace trace = forward_trace(model, b.inputs);
      const double loss = mean_categorical_cross_entropy(trace.output(), b.targets, &grad);
      if (!std::isfinite(loss)) throw NumericalError("non-finite classifier loss", epoch);
      optimizer_step(model, backward(model, trace, grad), opt);
    }
  }
  return model;
}

std::vector<int> predict(const MlpModel& model, const Matrix& features) {
  return argmax_rows(forward(model, features));
}

double binomial_p_value(std::size_t correct, std::size_t n, double chance, SignificanceTest test) {
  if (n == 0) throw ConfigError("significance test needs n > 0");
  if (correct > n) throw ConfigError("correct count exceeds n");
  if (!(chance > 0.0 && chance < 1.0)) throw ConfigError("chance level must lie in (0, 1)");
  if (test == SignificanceTest::normal_approximation) {
    const double acc = static_cast<double>(correct) / static_cast<double>(n);
    const double z = (acc - chance) / std::sqrt(chance * (1.0 - chance) / static_cast<double>(n));
    return 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  if (correct == 0) return 1.0;
  // log-sum-exp over the upper tail
  const double ln_c = std::log(chance), ln_q = std::log1p(-chance);
  const double ln_n = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> terms;
  terms.reserve(n - correct + 1);
  for (std::size_t i = correct; i <= n; ++i) {
    const double di = static_cast<double>(i);
    terms.push_back(ln_n - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + di * ln_c +
                    static_cast<double>(n - i) * ln_q);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return std::min(1.0, std::exp(top) * sum);
}

EvalReport report_from_predictions(std::span<const int> predicted, std::span<const int> truth, double chance,
                                   SignificanceTest test) {
  if (predicted.size() != truth.size()) throw ConfigError("prediction and label counts differ");
  if (truth.empty()) throw ConfigError("cannot evaluate on an empty test set");
  EvalReport r;
  r.n = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) r.correct += predicted[i] == truth[i];
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
  r.p_value_vs_chance = binomial_p_value(r.correct, r.n, chance, test);
  r.significant_at_5pct = r.p_value_vs_chance < 0.05;
  return r;
}

EvalReport evaluate(const MlpModel& model, const LabeledDataset& test, double chance, SignificanceTest kind) {
  if (test.empty()) throw ConfigError("cannot evaluate on an empty test set");
  const auto pred = predict(model, test.features);
  return report_from_predictions(pred, test.labels, chance, kind);
}

// ---------------------------------------------------------------------------

namespace {

Matrix weighted_sum(std::span<const Matrix> probs, std::span<const double> weights) {
  Matrix combined = Matrix::Zero(probs[0].rows(), probs[0].cols());
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (weights[i] != 0.0) combined += weights[i] * probs[i];
  return combined;
}

// Visits every composition of `total` into `parts` non-negative integers in
// lexicographic order.
template <typename Visit>
void for_each_composition(int total, std::size_t parts, Visit&& visit) {
  std::vector<int> counts(parts, 0);
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == parts) {
      counts[pos] = remaining;
      visit(counts);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  rec(rec, 0, total);
}

}  // namespace

BagWeights tune_bag_weights_from_probs(std::span<const Matrix> probs, std::span<const int> labels,
                                       double grid_step) {
  if (probs.empty()) throw ConfigError("bagging needs at least one model");
  if (labels.empty()) throw ConfigError("bagging needs a non-empty validation set");
  for (const auto& p : probs)
    if (p.rows() != static_cast<Eigen::Index>(labels.size()) || p.cols() != probs[0].cols())
      throw ConfigError("probability matrices disagree in shape");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ConfigError("grid step must lie in (0, 1]");
  const int steps = static_cast<int>(std::lround(1.0 / grid_step));
  if (std::abs(steps * grid_step - 1.0) > 1e-9) throw ConfigError("1 / grid_step must be an integer");

  const auto m = static_cast<long>(probs.size());
  long best_correct = -1;
  long best_spread = 0;
  std::vector<int> best_counts;
  std::vector<double> w(probs.size());
  for_each_composition(steps, probs.size(), [&](const std::vector<int>& counts) {
    for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / steps;
    const Matrix combined = weighted_sum(probs, w);
    long correct = 0;
    for (Eigen::Index r = 0; r < combined.rows(); ++r) correct += argmax(combined.row(r)) == labels[r];
    // Distance from uniform, scaled to stay integral: sum (m c_i - S)^2.
    long spread = 0;
    for (int c : counts) spread += (m * c - steps) * (m * c - steps);
    if (correct > best_correct || (correct == best_correct && spread < best_spread)) {
      best_correct = correct;
      best_spread = spread;
      best_counts = counts;
    }
  });

  BagWeights out;
  for (int c : best_counts) out.weights.push_back(static_cast<double>(c) / steps);
  out.validation_accuracy = static_cast<double>(best_correct) / static_cast<double>(labels.size());
  return out;
}

BagWeights tune_bag_weights(std::span<const MlpModel* const> models, const LabeledDataset& validation,
                            double grid_step) {
  if (models.empty()) throw ConfigError("bagging needs at least one model");
  std::vector<Matrix> probs;
  for (const MlpModel* m : models) probs.push_back(forward(*m, validation.features));
  return tune_bag_weights_from_probs(probs, validation.labels, grid_step);
}

std::vector<int> bag_predict_from_probs(std::span<const Matrix> probs, std::span<const double> weights) {
  if (probs.empty() || probs.size() != weights.size()) throw ConfigError("need one weight per model");
  for (const auto& p : probs)
    if (p.rows() != probs[0].rows() || p.cols() != probs[0].cols())
      throw ConfigError("probability matrices disagree in shape");
  return argmax_rows(weighted_sum(probs, weights));
}

std::vector<int> bag_predict(std::span<const MlpModel* const> models, std::span<const double> weights,
                             const Matrix& features) {
  if (models.empty() || models.size() != weights.size()) throw ConfigError("need one weight per model");
  std::vector<Matrix> probs;
  for (const MlpModel* m : models) probs.push_back(forward(*m, features));
  return bag_predict_from_probs(probs, weights);
}

// ---------------------------------------------------------------------------

SweepResult size_sweep(const LabeledDataset& full_train, const LabeledDataset& test,
                       const SweepOptions& options) {
  if (options.ns.empty()) throw ConfigError("sweep needs at least one N");
  for (std::size_t i = 0; i < options.ns.size(); ++i) {
    if (options.ns[i] < 2) throw ConfigError("sweep N values must be >= 2");
    if (i > 0 && options.ns[i] <= options.ns[i - 1]) throw ConfigError("sweep N values must be strictly increasing");
  }
  if (static_cast<std::size_t>(options.ns.back()) > full_train.size())
    throw ConfigError("sweep N=" + std::to_string(options.ns.back()) + " exceeds the " +
                      std::to_string(full_train.size()) + " available training samples");
  if (options.n_fake < 1) throw ConfigError("n_fake must be positive");
  if (test.empty()) throw ConfigError("sweep needs a non-empty test set");

  SweepResult result;
  result.subset_order.resize(full_train.size());
  std::iota(result.subset_order.begin(), result.subset_order.end(), 0);
  {
    Rng rng = make_rng(options.seed, "sweep-subset-order");
    for (std::size_t i = result.subset_order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(result.subset_order[i - 1], result.subset_order[pick(rng)]);
    }
  }

  ClassifierOptions reference = options.reference;
  reference.seed = derive_seed(options.seed, "sweep-reference");
  const MlpModel reference_model = train_classifier(full_train, reference);
  const double chance = 1.0 / full_train.num_classes;

  result.records.resize(options.ns.size());
  parallel_for(options.ns.size(), options.threads, [&](std::size_t arm) {
    const int n = options.ns[arm];
    const std::string tag = "sweep-" + std::to_string(n);
    const LabeledDataset subset =
        full_train.subset(std::span<const std::size_t>(result.subset_order).first(static_cast<std::size_t>(n)));

    ClassifierOptions base = options.baseline;
    base.seed = derive_seed(options.seed, tag + "-baseline");
    const MlpModel baseline = train_classifier(subset, base);

    CGanConfig cfg = options.cgan;
    cfg.seed = derive_seed(options.seed, tag + "-cgan");
    const TrainedCGan gan = train_cgan(options.pretrain ? *options.pretrain : subset, subset, baseline, cfg);
    Rng gen_rng = make_rng(options.seed, tag + "-generate");
    const LabeledDataset fake = generate(gan, balanced_counts(options.n_fake, full_train.num_classes), gen_rng);

    ClassifierOptions fake_opts = options.fake;
    fake_opts.seed = derive_seed(options.seed, tag + "-fake-classifier");
    const MlpModel fake_model = train_classifier(fake, fake_opts);

    result.records[arm] = {n, evaluate(reference_model, fake, chance).accuracy,
                           evaluate(fake_model, test, chance).accuracy};
  });
  return result;
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "classifier,dataset,n,accuracy,p_value,significant\n";
  for (const auto& r : rows)
    out << r.classifier << ',' << r.dataset << ',' << r.report.n << ',' << detail::format_double(r.report.accuracy)
        << ',' << detail::format_double(r.report.p_value_vs_chance) << ',' << (r.report.significant_at_5pct ? 1 : 0)
        << '\n';
}

void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "N,acc_fake_as_test,acc_fake_as_train\n";
  for (const auto& r : sweep.records)
    out << r.n << ',' << detail::format_double(r.acc_fake_as_test) << ','
        << detail::format_double(r.acc_fake_as_train) << '\n';
}

}  // namespace augforge
