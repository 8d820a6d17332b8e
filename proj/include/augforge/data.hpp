#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "augforge/nn.hpp"
#include "augforge/rng.hpp"

namespace augforge {

/// Feature matrix (one sample per row) with class ids in [0, num_classes).
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 2;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool empty() const { return labels.empty(); }

  void validate() const;
  std::vector<std::size_t> class_counts() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.num_classes == b.num_classes && a.labels == b.labels && a.features == b.features;
  }
};

/// Reads `label,f1,...,fd` rows (no header, LF or CRLF). The class count is
/// max label + 1. Parse failures throw ParseError with the offending line.
LabeledDataset load_dataset(const std::filesystem::path& path);
LabeledDataset parse_dataset(std::istream& in);

/// Writes the same CSV format using shortest round-trip float formatting.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
void write_dataset(std::ostream& out, const LabeledDataset& ds);

struct SplitSpec {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic shuffled split. Stratified splits place round(fraction * n_k)
/// samples of each class k in train.
SplitIndices split_indices(const LabeledDataset& ds, const SplitSpec& spec);
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec);

Vector one_hot(int label, int num_classes);
Matrix one_hot_rows(std::span<const int> labels, int num_classes);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row);
std::vector<int> argmax_rows(const Matrix& scores);

/// Gaussian mixture stand-in for precomputed sentence embeddings. Each class
/// owns one or more component means; a sample picks one of its class's
/// components uniformly and adds N(0, cov_scale * I) noise.
struct SyntheticSpec {
  int dim = 100;
  std::vector<std::vector<Vector>> class_means;
  double cov_scale = 1.0;
  std::vector<int> samples_per_class;
  std::uint64_t seed = 0;

  /// Two classes centred at +/- (separation / 2) * u for a fixed unit vector u
  /// derived from `direction_seed`, so the centres are `separation` apart.
  static SyntheticSpec two_class(int dim, double separation, double cov_scale, int per_class,
                                 std::uint64_t seed, std::uint64_t direction_seed = 0);

  void validate() const;
};

LabeledDataset make_synthetic(const SyntheticSpec& spec);

struct Batch {
  Matrix inputs;
  Matrix targets;  // one-hot rows
  std::vector<std::size_t> indices;
};

/// Streams indices of consecutive random permutations, so sampling is without
/// replacement inside an epoch. A batch that straddles an epoch boundary takes
/// the remainder of one permutation and the head of the next.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed);

  std::vector<std::size_t> next_indices(std::size_t batch_size);
  Batch next(const LabeledDataset& ds, std::size_t batch_size);
  std::uint64_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
};

/// One-shot batch draw without replacement.
Batch sample_batch(const LabeledDataset& ds, std::size_t batch_size, Rng& rng);

}  // namespace augforge
