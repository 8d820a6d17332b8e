#include "augforge/cgan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "augforge/error.hpp"
#include "parse_util.hpp"

namespace augforge {

LambdaSchedule LambdaSchedule::parse(std::string_view text) {
  LambdaSchedule s;
  for (std::string_view entry : detail::split_list(text, ',')) {
    const auto at = entry.find('@');
    if (at == std::string_view::npos) {
      s.points.emplace_back(0.0, detail::parse_double(entry, "lambda"));
    } else {
      s.points.emplace_back(detail::parse_double(entry.substr(at + 1), "lambda fraction"),
                            detail::parse_double(entry.substr(0, at), "lambda"));
    }
  }
  s.validate();
  return s;
}

std::string LambdaSchedule::format() const {
  std::string out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) out += ',';
    out += detail::format_double(points[i].second);
    if (points[i].first != 0.0) out += "@" + detail::format_double(points[i].first);
  }
  return out;
}

void LambdaSchedule::validate() const {
  if (points.empty()) throw ConfigError("lambda schedule is empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [f, v] = points[i];
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("lambda fraction must lie in [0, 1]");
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda values must be finite and >= 0");
    if (i > 0 && !(f > points[i - 1].first)) throw ConfigError("lambda fractions must be strictly increasing");
  }
}

double lambda_at(const LambdaSchedule& schedule, double iteration_fraction) {
  if (schedule.points.empty()) throw ConfigError("lambda schedule is empty");
  if (!(iteration_fraction >= 0.0 && iteration_fraction <= 1.0))
    throw ConfigError("iteration fraction must lie in [0, 1]");
  double value = schedule.points.front().second;
  for (const auto& [f, v] : schedule.points)
    if (iteration_fraction >= f) value = v;
  return value;
}

void CGanConfig::validate() const {
  if (noise_dim < 1) throw ConfigError("noise_dim must be positive");
  lambda_schedule.validate();
  if (!(smoothing_target > 0.5 && smoothing_target <= 1.0))
    throw ConfigError("smoothing target must lie in (0.5, 1]");
  if (!(input_noise_variance >= 0.0) || !std::isfinite(input_noise_variance))
    throw ConfigError("input noise variance must be >= 0");
  if (gen_updates_min < 1 || gen_updates_max < gen_updates_min)
    throw ConfigError("generator updates need 1 <= min <= max");
  if (batch_size < 4) throw ConfigError("cgan batch size must be at least 4");
  if (pretrain_iters < 0 || finetune_iters < 0) throw ConfigError("iteration counts must be >= 0");
  for (int h : generator_hidden)
    if (h < 1) throw ConfigError("generator hidden widths must be positive");
  for (int h : discriminator_hidden)
    if (h < 1) throw ConfigError("discriminator hidden widths must be positive");
}

std::vector<int> CGanConfig::generator_dims(int feature_dim, int num_classes) const {
  std::vector<int> dims{noise_dim + num_classes};
  dims.insert(dims.end(), generator_hidden.begin(), generator_hidden.end());
  dims.push_back(feature_dim);
  return dims;
}

std::vector<int> CGanConfig::discriminator_dims(int feature_dim, int num_classes) const {
  std::vector<int> dims{feature_dim + num_classes};
  dims.insert(dims.end(), discriminator_hidden.begin(), discriminator_hidden.end());
  dims.push_back(1);
  return dims;
}

Matrix FeatureScaling::to_raw(const Matrix& standardized) const {
  Matrix out = standardized * stddev.asDiagonal();
  out.rowwise() += mean.transpose();
  return out;
}

Matrix FeatureScaling::to_standard(const Matrix& raw) const {
  Matrix out = raw.rowwise() - mean.transpose();
  return out * stddev.cwiseInverse().asDiagonal();
}

std::string_view to_string(TrainingPhase phase) {
  return phase == TrainingPhase::pretrain ? "pretrain" : "finetune";
}

// ---------------------------------------------------------------------------

NormalizedBatch normalize_batch(const Matrix& features) {
  if (features.rows() < 2) throw ConfigError("normalize_batch needs at least two rows");
  NormalizedBatch out;
  out.mean = features.colwise().mean().transpose();
  out.values = features.rowwise() - out.mean.transpose();
  out.stddev = (out.values.array().square().colwise().sum() / static_cast<double>(features.rows()))
                   .sqrt()
                   .transpose();
  for (Eigen::Index j = 0; j < out.stddev.size(); ++j) {
    if (out.stddev(j) < 1e-12)
      out.stddev(j) = 1.0;
    else
      out.values.col(j) /= out.stddev(j);
  }
  return out;
}

Matrix inject_noise(const Matrix& features, double variance, Rng& rng) {
  if (!(variance >= 0.0)) throw ConfigError("noise variance must be >= 0");
  if (variance == 0.0) return features;
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  Matrix out = features;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += normal(rng);
  return out;
}

double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake,
                          double smoothing_target) {
  if (d_real.empty() || d_fake.empty()) throw ConfigError("discriminator loss needs real and fake scores");
  double real = 0.0, fake = 0.0;
  for (double p : d_real) real += binary_cross_entropy(p, smoothing_target);
  for (double p : d_fake) fake += binary_cross_entropy(p, 0.0);
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

GeneratorLoss generator_loss(double d_fake, std::span<const double> c_probs, std::span<const double> y_f,
                             double lambda) {
  GeneratorLoss l;
  l.adversarial = binary_cross_entropy(d_fake, 1.0);
  l.classifier = categorical_cross_entropy(c_probs, y_f);
  l.total = l.adversarial + lambda * l.classifier;
  return l;
}

GeneratorLoss generator_loss(std::span<const double> d_fake, const Matrix& c_probs, const Matrix& y_f,
                             double lambda) {
  if (static_cast<Eigen::Index>(d_fake.size()) != c_probs.rows() || c_probs.rows() != y_f.rows())
    throw ConfigError("generator loss: batch sizes differ");
  GeneratorLoss l;
  for (double p : d_fake) l.adversarial += binary_cross_entropy(p, 1.0);
  l.adversarial /= static_cast<double>(d_fake.size());
  l.classifier = mean_categorical_cross_entropy(c_probs, y_f);
  l.total = l.adversarial + lambda * l.classifier;
  return l;
}

Matrix concat_condition(const Matrix& features, const Matrix& onehot) {
  if (features.rows() != onehot.rows()) throw ConfigError("concat: row counts differ");
  Matrix out(features.rows(), features.cols() + onehot.cols());
  out << features, onehot;
  return out;
}

DiscriminatorStep discriminator_step(const MlpModel& discriminator, const Matrix& real_pairs,
                                     const Matrix& fake_pairs, double smoothing_target) {
  const Eigen::Index nr = real_pairs.rows(), nf = fake_pairs.rows();
  Matrix stacked(nr + nf, real_pairs.cols());
  stacked << real_pairs, fake_pairs;
  const ForwardTrace trace = forward_trace(discriminator, stacked);
  const Matrix& out = trace.output();

  Matrix grad(nr + nf, 1);
  for (Eigen::Index i = 0; i < nr; ++i)
    grad(i, 0) = binary_cross_entropy_grad(out(i, 0), smoothing_target) / static_cast<double>(nr);
  for (Eigen::Index i = 0; i < nf; ++i)
    grad(nr + i, 0) = binary_cross_entropy_grad(out(nr + i, 0), 0.0) / static_cast<double>(nf);

  DiscriminatorStep step;
  const auto scores = out.col(0);
  step.loss = discriminator_loss({scores.data(), static_cast<std::size_t>(nr)},
                                 {scores.data() + nr, static_cast<std::size_t>(nf)}, smoothing_target);
  step.grads = backward(discriminator, trace, grad);
  return step;
}

GeneratorStep generator_step(const MlpModel& generator, const MlpModel& discriminator,
                             const MlpModel& baseline, const FeatureScaling& scaling, const Matrix& noise,
                             const Matrix& y_f, double lambda, double adversarial_weight) {
  const Eigen::Index n = noise.rows();
  const Eigen::Index d = generator.output_dim();
  const ForwardTrace g_trace = forward_trace(generator, concat_condition(noise, y_f));
  const Matrix& x_f = g_trace.output();

  // Adversarial path through D.
  const ForwardTrace d_trace = forward_trace(discriminator, concat_condition(x_f, y_f));
  const Matrix& d_out = d_trace.output();
  Matrix d_grad(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) d_grad(i, 0) = binary_cross_entropy_grad(d_out(i, 0), 1.0) / n;
  const Gradients through_d = backward(discriminator, d_trace, d_grad);

  // Classifier path through the frozen baseline, in raw feature space.
  const ForwardTrace c_trace = forward_trace(baseline, scaling.to_raw(x_f));
  Matrix c_grad;
  mean_categorical_cross_entropy(c_trace.output(), y_f, &c_grad);
  const Gradients through_c = backward(baseline, c_trace, c_grad);

  Matrix dx = adversarial_weight * through_d.input.leftCols(d) +
              lambda * (through_c.input * scaling.stddev.asDiagonal());

  GeneratorStep step;
  const auto scores = d_out.col(0);
  step.loss = generator_loss({scores.data(), static_cast<std::size_t>(n)}, c_trace.output(), y_f, lambda);
  step.loss.total = adversarial_weight * step.loss.adversarial + lambda * step.loss.classifier;
  step.grads = backward(generator, g_trace, dx);
  return step;
}

// ---------------------------------------------------------------------------

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

FeatureScaling dataset_scaling(const LabeledDataset& ds) {
  const NormalizedBatch nb = normalize_batch(ds.features);
  return {nb.mean, nb.stddev};
}

}  // namespace

TrainedCGan train_cgan(const LabeledDataset& pretrain, const LabeledDataset& finetune,
                       const MlpModel& baseline, const CGanConfig& config) {
  config.validate();
  pretrain.validate();
  finetune.validate();
  const int d = finetune.dim();
  const int k = finetune.num_classes;
  if (pretrain.dim() != d) throw ConfigError("pretrain and finetune feature dims differ");
  if (pretrain.num_classes != k) throw ConfigError("pretrain and finetune class counts differ");
  if (baseline.input_dim() != d) throw ConfigError("baseline input dim does not match feature dim");
  if (baseline.output_dim() != k || baseline.output_activation != Activation::softmax)
    throw ConfigError("baseline must output softmax probabilities over the classes");
  if (config.pretrain_iters > 0 && pretrain.size() < 2) throw ConfigError("pretrain set needs >= 2 samples");
  if (config.finetune_iters > 0 && finetune.size() < 2) throw ConfigError("finetune set needs >= 2 samples");

  TrainedCGan gan;
  gan.config = config;
  gan.num_classes = k;
  gan.baseline_hash = model_hash(baseline);
  gan.generator = init_model(config.generator_dims(d, k), config.generator_activation, Activation::linear,
                             derive_seed(config.seed, "cgan-generator-init"));
  gan.discriminator = init_model(config.discriminator_dims(d, k), config.discriminator_activation,
                                 Activation::sigmoid, derive_seed(config.seed, "cgan-discriminator-init"));
  OptimizerState g_opt = OptimizerState::for_model(gan.generator, config.generator_optimizer);
  OptimizerState d_opt = OptimizerState::for_model(gan.discriminator, config.discriminator_optimizer);

  Rng noise_rng = make_rng(config.seed, "cgan-noise");
  Rng update_rng = make_rng(config.seed, "cgan-generator-updates");
  Rng label_rng = make_rng(config.seed, "cgan-fake-labels");
  std::uniform_int_distribution<int> update_count(config.gen_updates_min, config.gen_updates_max);

  const long total = static_cast<long>(config.pretrain_iters) + config.finetune_iters;
  long global = 0;
  gan.scaling = dataset_scaling(config.finetune_iters > 0 || config.pretrain_iters == 0 ? finetune : pretrain);
  gan.telemetry.reserve(static_cast<std::size_t>(total));

  auto run_phase = [&](const LabeledDataset& ds, TrainingPhase phase, int iterations) {
    if (iterations == 0) return;
    const FeatureScaling scaling = dataset_scaling(ds);
    gan.scaling = scaling;
    const std::size_t half = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size / 2), ds.size());
    BatchSampler sampler(ds.size(), derive_seed(config.seed, std::string("cgan-sampler-") +
                                                                  std::string(to_string(phase))));
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    auto fake_conditions = [&](std::size_t n) {
      std::vector<int> labels(n);
      for (auto& y : labels) y = ds.labels[pick(label_rng)];
      return one_hot_rows(labels, k);
    };
    const auto rows = static_cast<Eigen::Index>(half);

    for (int it = 0; it < iterations; ++it, ++global) {
      const double fraction = total > 1 ? static_cast<double>(global) / static_cast<double>(total - 1) : 1.0;
      const double lambda = lambda_at(config.lambda_schedule, fraction);

      // Discriminator update on half real, half fake.
      const Batch real = sampler.next(ds, half);
      Matrix x_real = normalize_batch(real.inputs).values;
      if (phase == TrainingPhase::finetune) x_real = inject_noise(x_real, config.input_noise_variance, noise_rng);
      const Matrix y_fake = fake_conditions(half);
      const Matrix eta = gaussian_matrix(rows, config.noise_dim, noise_rng);
      const Matrix x_fake = forward(gan.generator, concat_condition(eta, y_fake));
      const DiscriminatorStep ds_step = discriminator_step(
          gan.discriminator, concat_condition(x_real, real.targets), concat_condition(x_fake, y_fake),
          config.smoothing_target);
      if (!std::isfinite(ds_step.loss)) throw NumericalError("non-finite discriminator loss", global);
      optimizer_step(gan.discriminator, ds_step.grads, d_opt);

      // u generator updates through D and the frozen baseline.
      const int u = update_count(update_rng);
      double g1 = 0.0, g2 = 0.0;
      for (int step = 0; step < u; ++step) {
        const Matrix y_g = fake_conditions(half);
        const Matrix eta_g = gaussian_matrix(rows, config.noise_dim, noise_rng);
        const GeneratorStep gs =
            generator_step(gan.generator, gan.discriminator, baseline, scaling, eta_g, y_g, lambda);
        if (!std::isfinite(gs.loss.total)) throw NumericalError("non-finite generator loss", global);
        optimizer_step(gan.generator, gs.grads, g_opt);
        g1 += gs.loss.adversarial;
        g2 += gs.loss.classifier;
      }
      gan.telemetry.push_back({global, phase, ds_step.loss, g1 / u, g2 / u, lambda, u});
    }
  };

  try {
    run_phase(pretrain, TrainingPhase::pretrain, config.pretrain_iters);
    run_phase(finetune, TrainingPhase::finetune, config.finetune_iters);
  } catch (const NumericalError& e) {
    if (e.iteration() >= 0) throw;
    throw NumericalError(e.what(), global);
  }
  return gan;
}

std::vector<int> balanced_counts(int n, int num_classes) {
  if (n < 0 || num_classes < 1) throw ConfigError("invalid balanced count request");
  std::vector<int> counts(num_classes, n / num_classes);
  for (int c = 0; c < n % num_classes; ++c) ++counts[c];
  return counts;
}

LabeledDataset generate(const TrainedCGan& cgan, std::span<const int> n_per_class, Rng& rng) {
  if (static_cast<int>(n_per_class.size()) != cgan.num_classes)
    throw ConfigError("generate: need one count per class");
  long total = 0;
  for (int n : n_per_class) {
    if (n < 0) throw ConfigError("generate: negative sample count");
    total += n;
  }
  if (total == 0) throw ConfigError("generate: all-zero request");

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));
  for (int c = 0; c < cgan.num_classes; ++c) labels.insert(labels.end(), n_per_class[c], c);
  const Matrix eta = gaussian_matrix(total, cgan.noise_dim(), rng);
  const Matrix x = forward(cgan.generator, concat_condition(eta, one_hot_rows(labels, cgan.num_classes)));

  LabeledDataset out;
  out.features = cgan.scaling.to_raw(x);
  out.labels = std::move(labels);
  out.num_classes = cgan.num_classes;
  if (!out.features.allFinite()) throw NumericalError("generator produced non-finite features");
  return out;
}

}  // namespace augforge
