#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "augforge/cgan.hpp"
#include "augforge/data.hpp"
#include "augforge/nn.hpp"

namespace augforge {

struct ClassifierOptions {
  std::vector<int> hidden{32};
  Activation hidden_activation = Activation::tanh;
  int epochs = 30;
  int batch_size = 32;
  OptimizerConfig optimizer{};
  std::uint64_t seed = 0;
};

/// Softmax MLP [d, hidden..., K] trained with mini-batch categorical
/// cross-entropy. epochs == 0 returns the initialized model.
MlpModel train_classifier(const LabeledDataset& train, const ClassifierOptions& options);

std::vector<int> predict(const MlpModel& model, const Matrix& features);

enum class SignificanceTest { normal_approximation, exact_binomial };

struct EvalReport {
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double p_value_vs_chance = 0.5;
  bool significant_at_5pct = false;
};

/// One-sided p-value for "accuracy > chance". The normal approximation uses
/// z = (acc - chance) / sqrt(chance (1 - chance) / n); the exact variant sums
/// the binomial upper tail P(X >= correct).
double binomial_p_value(std::size_t correct, std::size_t n, double chance, SignificanceTest test);

EvalReport report_from_predictions(std::span<const int> predicted, std::span<const int> truth, double chance,
                                   SignificanceTest test = SignificanceTest::normal_approximation);
EvalReport evaluate(const MlpModel& model, const LabeledDataset& test, double chance,
                    SignificanceTest kind = SignificanceTest::normal_approximation);

struct BagWeights {
  std::vector<double> weights;
  std::vector<std::size_t> holdout_indices;  // filled by callers that carve the validation set
  double validation_accuracy = 0.0;
};

/// Exhaustive grid over the weight simplex at `grid_step` resolution
/// (1/grid_step must be an integer). Picks the best validation accuracy of
/// argmax(sum_i w_i p_i); ties go to the weights closest to uniform.
BagWeights tune_bag_weights_from_probs(std::span<const Matrix> probs, std::span<const int> labels,
                                       double grid_step = 0.05);
BagWeights tune_bag_weights(std::span<const MlpModel* const> models, const LabeledDataset& validation,
                            double grid_step = 0.05);

std::vector<int> bag_predict_from_probs(std::span<const Matrix> probs, std::span<const double> weights);
std::vector<int> bag_predict(std::span<const MlpModel* const> models, std::span<const double> weights,
                             const Matrix& features);

struct SweepRecord {
  int n = 0;
  double acc_fake_as_test = 0.0;
  double acc_fake_as_train = 0.0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<std::size_t> subset_order;  // the nested prefix order used for every N
};

struct SweepOptions {
  std::vector<int> ns{500, 1000, 2000, 4000, 8000};
  int n_fake = 10000;
  CGanConfig cgan{};
  ClassifierOptions baseline{};   // C_b on each N-subset
  ClassifierOptions reference{};  // C_b_full on the whole training set
  ClassifierOptions fake{};       // classifier trained on fake data
  /// External data for the pre-training phase; when null each arm pre-trains
  /// on its own N-subset.
  const LabeledDataset* pretrain = nullptr;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Fake-as-test / fake-as-train accuracies as the cGAN's training set grows.
/// Subsets are nested prefixes of one stratified shuffle of `full_train`.
SweepResult size_sweep(const LabeledDataset& full_train, const LabeledDataset& test,
                       const SweepOptions& options);

// CSV emitters
struct ReportRow {
  std::string classifier;
  std::string dataset;
  EvalReport report;
};
void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace augforge
