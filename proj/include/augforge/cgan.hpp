#pragma once

// Conditional GAN with a frozen baseline classifier in the generator loss.
//
//   discriminator:  L_D  = BCE(D([x_r; y_r]), s) + BCE(D([x_f; y_f]), 0)
//   generator:      L_G  = L_G1 + lambda * L_G2
//                   L_G1 = -log D([x_f; y_f])
//                   L_G2 = CE(y_f, C(x_f))
//
// with x_f = G([eta; y_f]), s the one-sided smoothing target, and C never
// updated. Real features are standardized per batch; the generator therefore
// works in standardized space and its output is mapped back through the
// dataset's mean/std before it reaches C or leaves `generate`.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "augforge/data.hpp"
#include "augforge/nn.hpp"
#include "augforge/rng.hpp"

namespace augforge {

/// Piecewise-constant lambda over the run's iteration fraction. Each point
/// (fraction, value) takes effect from `fraction` onward.
struct LambdaSchedule {
  std::vector<std::pair<double, double>> points;

  /// 0.5 until 80% of the run, then 2.0.
  static LambdaSchedule default_schedule() { return {{{0.0, 0.5}, {0.8, 2.0}}}; }

  /// "v0,v1@f1,v2@f2,..." where an entry without "@f" starts at fraction 0.
  static LambdaSchedule parse(std::string_view text);
  std::string format() const;
  void validate() const;
};

double lambda_at(const LambdaSchedule& schedule, double iteration_fraction);

struct CGanConfig {
  int noise_dim = 16;
  LambdaSchedule lambda_schedule = LambdaSchedule::default_schedule();
  double smoothing_target = 0.9;
  double input_noise_variance = 0.02;
  int gen_updates_min = 1;
  int gen_updates_max = 3;
  int batch_size = 64;  // discriminator batch: half real, half fake
  int pretrain_iters = 2000;
  int finetune_iters = 1000;
  std::vector<int> generator_hidden{128, 128};
  std::vector<int> discriminator_hidden{64, 32};
  Activation generator_activation = Activation::tanh;
  Activation discriminator_activation = Activation::tanh;
  OptimizerConfig generator_optimizer{};
  OptimizerConfig discriminator_optimizer{};
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<int> generator_dims(int feature_dim, int num_classes) const;
  std::vector<int> discriminator_dims(int feature_dim, int num_classes) const;
};

/// Per-dimension affine map between raw and standardized features.
struct FeatureScaling {
  Vector mean;
  Vector stddev;

  Matrix to_raw(const Matrix& standardized) const;
  Matrix to_standard(const Matrix& raw) const;
};

enum class TrainingPhase { pretrain, finetune };
std::string_view to_string(TrainingPhase phase);

struct IterationRecord {
  long iteration = 0;
  TrainingPhase phase = TrainingPhase::pretrain;
  double loss_d = 0.0;
  double loss_g1 = 0.0;  // mean over this iteration's generator updates
  double loss_g2 = 0.0;
  double lambda = 0.0;
  int gen_updates = 0;
};

struct TrainedCGan {
  MlpModel generator;      // [noise_dim + K, ..., d], linear output
  MlpModel discriminator;  // [d + K, ..., 1], sigmoid output
  std::uint64_t baseline_hash = 0;
  FeatureScaling scaling;
  int num_classes = 2;
  CGanConfig config;
  std::vector<IterationRecord> telemetry;

  int feature_dim() const { return generator.output_dim(); }
  int noise_dim() const { return generator.input_dim() - num_classes; }
};

// ---------------------------------------------------------------------------
// Building blocks

struct NormalizedBatch {
  Matrix values;
  Vector mean;
  Vector stddev;  // population std; 1 for near-constant columns
};

/// Column standardization. Columns with std < 1e-12 are only centred.
NormalizedBatch normalize_batch(const Matrix& features);

/// Adds i.i.d. N(0, variance) to every entry.
Matrix inject_noise(const Matrix& features, double variance, Rng& rng);

/// Batch-mean BCE of real scores against the smoothing target plus batch-mean
/// BCE of fake scores against 0.
double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake,
                          double smoothing_target);

struct GeneratorLoss {
  double total = 0.0;
  double adversarial = 0.0;  // L_G1
  double classifier = 0.0;   // L_G2
};

GeneratorLoss generator_loss(double d_fake, std::span<const double> c_probs, std::span<const double> y_f,
                             double lambda);
/// Batch means over rows.
GeneratorLoss generator_loss(std::span<const double> d_fake, const Matrix& c_probs, const Matrix& y_f,
                             double lambda);

/// Row-wise [features, onehot] concatenation.
Matrix concat_condition(const Matrix& features, const Matrix& onehot);

struct DiscriminatorStep {
  double loss = 0.0;
  Gradients grads;
};

/// L_D and its gradient w.r.t. discriminator parameters. Both pair matrices
/// are already [x; y] concatenations.
DiscriminatorStep discriminator_step(const MlpModel& discriminator, const Matrix& real_pairs,
                                     const Matrix& fake_pairs, double smoothing_target);

struct GeneratorStep {
  GeneratorLoss loss;
  Gradients grads;
};

/// adversarial_weight * L_G1 + lambda * L_G2 and its gradient w.r.t.
/// generator parameters, flowing through both D and the frozen C.
GeneratorStep generator_step(const MlpModel& generator, const MlpModel& discriminator,
                             const MlpModel& baseline, const FeatureScaling& scaling, const Matrix& noise,
                             const Matrix& y_f, double lambda, double adversarial_weight = 1.0);

/// Full pre-train then fine-tune protocol. `baseline` is only read.
TrainedCGan train_cgan(const LabeledDataset& pretrain, const LabeledDataset& finetune,
                       const MlpModel& baseline, const CGanConfig& config);

/// n_per_class[k] samples G([eta; onehot(k)]) per class, eta ~ N(0, I), in
/// raw feature space. Rows are grouped by class in ascending order.
LabeledDataset generate(const TrainedCGan& cgan, std::span<const int> n_per_class, Rng& rng);

/// Splits n as evenly as possible over K classes (earlier classes get the
/// remainder).
std::vector<int> balanced_counts(int n, int num_classes);

// ---------------------------------------------------------------------------
// Persistence: generator.model, discriminator.model and an
// `AUGFORGE-CGAN v1` manifest in one directory.

/// Flat key/value view of a config (keys as used under `cgan.` in run
/// configs). Unknown keys in set_config_entry throw ConfigError.
std::vector<std::pair<std::string, std::string>> config_entries(const CGanConfig& config);
void set_config_entry(CGanConfig& config, std::string_view key, std::string_view value);

void save_cgan(const TrainedCGan& cgan, const std::filesystem::path& dir);
TrainedCGan load_cgan(const std::filesystem::path& dir);

void write_telemetry(const std::vector<IterationRecord>& telemetry, const std::filesystem::path& path);

}  // namespace augforge
