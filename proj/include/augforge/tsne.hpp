#pragma once

// Exact O(n^2) t-SNE: perplexity-calibrated Gaussian affinities in feature
// space, Student-t (1 dof) kernel in 2-D, KL(P||Q) minimized by gradient
// descent with momentum, per-coordinate gains and early exaggeration.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "augforge/data.hpp"
#include "augforge/nn.hpp"

namespace augforge {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  bool adaptive_gains = true;
  double min_gain = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate(std::size_t n) const;
};

/// Pairwise squared Euclidean distances.
Matrix squared_distances(const Matrix& points);

struct ConditionalRow {
  Vector probs;  // p_{j|i}; entry `self` is 0
  double entropy_bits = 0.0;
};

/// p_{j|i} proportional to exp(-beta * d_ij) over j != self, where
/// beta = 1 / (2 sigma^2) and d_ij are squared distances.
ConditionalRow conditional_distribution(const Vector& sq_dists, std::size_t self, double beta);

struct Calibration {
  double beta = 1.0;
  double entropy_bits = 0.0;
  int steps = 0;
};

/// Bisection on beta until |H - log2(perplexity)| <= tolerance_bits or
/// max_steps is reached.
Calibration calibrate_bandwidth(const Vector& sq_dists, std::size_t self, double perplexity,
                                double tolerance_bits = 1e-6, int max_steps = 200);

struct AffinityResult {
  Matrix P;             // symmetric, zero diagonal, sums to 1
  Vector beta;          // calibrated precision per point
  Vector entropy_bits;  // achieved entropy per point
};

/// Requires n >= 3 and 1 < perplexity < n - 1. Exact duplicate points are
/// separated by 1e-10 jitter before distances are taken.
AffinityResult pairwise_affinities(const Matrix& features, double perplexity, int threads = 1);

double kl_divergence(const Matrix& P, const Matrix& coords);
Matrix kl_gradient(const Matrix& P, const Matrix& coords);

enum class PointSource { real, fake };

struct EmbeddingResult {
  Matrix coords;  // n x 2
  std::vector<PointSource> source_tags;
  double final_kl = 0.0;
  double kl_after_exaggeration = 0.0;
  std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL) checkpoints
};

/// Embeds all rows; n < 4 uses uniform affinities since no bandwidth is
/// identifiable. Throws NumericalError on a non-finite KL or coordinate.
EmbeddingResult tsne_embed(const Matrix& features, const TsneConfig& config);

/// Subsamples `subsample` points from each source (without replacement,
/// seeded), embeds the union jointly and tags rows real-first. An infeasible
/// perplexity is lowered to (n - 1) / 2.
EmbeddingResult project_real_vs_fake(const LabeledDataset& real, const LabeledDataset& fake, std::size_t subsample,
                                     const TsneConfig& config);

/// Fraction of real points whose nearest fake point is farther than the median
/// real-to-nearest-real distance in the embedding. NaN if a source is empty.
double coverage_statistic(const EmbeddingResult& result);

/// `x,y,source` rows with a header line.
void write_embedding_csv(const EmbeddingResult& result, const std::filesystem::path& path);

}  // namespace augforge
