#pragma once

// Declarative run description: flat `section.key=value` lines, `#` comments.
//
//   seed=7
//   out=runs/demo
//   data.train=train.csv          # or synth.* keys for an in-memory dataset
//   cgan.lambda=0.5,2.0@0.8
//   tsne.perplexity=30

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "augforge/cgan.hpp"
#include "augforge/data.hpp"
#include "augforge/eval.hpp"
#include "augforge/tsne.hpp"

namespace augforge {

/// Two-class Gaussian stand-in used when no dataset files are given. The
/// pre-training set is a related task whose class axis is rotated by
/// `pretrain_angle_deg` away from the target task's axis.
struct SyntheticSettings {
  int dim = 50;
  int train_per_class = 250;
  int test_per_class = 1000;
  int pretrain_per_class = 5000;  // 0 disables the pre-training set
  double separation = 2.0;
  double cov = 1.0;
  double pretrain_separation = 2.0;
  double pretrain_angle_deg = 30.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  std::optional<std::filesystem::path> train_path, pretrain_path, test_path, fake_path;
  std::optional<SyntheticSettings> synthetic;
  double holdout_fraction = 0.2;

  ClassifierOptions classifier{};
  CGanConfig cgan{};
  int n_fake = 10000;

  double grid_step = 0.05;
  SignificanceTest significance = SignificanceTest::normal_approximation;
  std::vector<std::string> classifiers{"cb", "cf", "ct"};

  std::vector<int> sweep_ns{500, 1000, 2000, 4000, 8000};
  bool sweep_use_pretrain = false;

  TsneConfig tsne{};
  std::size_t tsne_subsample = 2000;

  /// Throws ConfigError for invalid values or missing referenced files.
  void validate() const;
};

/// Applies one `key=value` setting. Unknown keys throw ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// Applies a `key=value` string.
void apply_setting(RunConfig& config, std::string_view assignment);

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunData {
  LabeledDataset train;
  std::optional<LabeledDataset> test;
  std::optional<LabeledDataset> pretrain;
  std::string train_name = "train";
  std::string test_name = "test";
};

/// Loads dataset files, or builds the synthetic datasets from the run seed.
RunData resolve_data(const RunConfig& config);

/// The two-class synthetic datasets for `settings` (train, test, pretrain).
RunData make_synthetic_data(const SyntheticSettings& settings, std::uint64_t seed);

}  // namespace augforge
