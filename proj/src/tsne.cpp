#include "augforge/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "augforge/error.hpp"
#include "augforge/parallel.hpp"
#include "augforge/rng.hpp"
#include "parse_util.hpp"

namespace augforge {

void TsneConfig::validate(std::size_t n) const {
  if (!(perplexity > 1.0)) throw ConfigError("perplexity must exceed 1");
  if (n >= 4 && !(perplexity < static_cast<double>(n) - 1.0))
    throw ConfigError("perplexity " + detail::format_double(perplexity) + " infeasible for n=" + std::to_string(n));
  if (iterations < 0 || exaggeration_iters < 0 || iterations < exaggeration_iters)
    throw ConfigError("iterations must cover the early-exaggeration phase");
  if (!(learning_rate > 0.0)) throw ConfigError("t-SNE learning rate must be positive");
  if (!(exaggeration >= 1.0)) throw ConfigError("exaggeration factor must be >= 1");
  if (!(min_gain > 0.0)) throw ConfigError("min gain must be positive");
}

Matrix squared_distances(const Matrix& points) {
  const Vector norms = points.rowwise().squaredNorm();
  Matrix d = -2.0 * points * points.transpose();
  d.colwise() += norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

ConditionalRow conditional_distribution(const Vector& sq_dists, std::size_t self, double beta) {
  const auto n = sq_dists.size();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != static_cast<Eigen::Index>(self)) dmin = std::min(dmin, sq_dists(j));
  ConditionalRow row;
  row.probs.resize(n);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = j == static_cast<Eigen::Index>(self) ? 0.0 : std::exp(-beta * (sq_dists(j) - dmin));
    row.probs(j) = v;
    sum += v;
  }
  row.probs /= sum;
  double h = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    if (row.probs(j) > 0.0) h -= row.probs(j) * std::log2(row.probs(j));
  row.entropy_bits = h;
  return row;
}

Calibration calibrate_bandwidth(const Vector& sq_dists, std::size_t self, double perplexity, double tolerance_bits,
                                int max_steps) {
  const double target = std::log2(perplexity);
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  Calibration c;
  c.beta = 1.0;
  for (c.steps = 1; c.steps <= max_steps; ++c.steps) {
    c.entropy_bits = conditional_distribution(sq_dists, self, c.beta).entropy_bits;
    const double diff = c.entropy_bits - target;
    if (std::abs(diff) <= tolerance_bits) break;
    // Entropy falls as beta grows.
    if (diff > 0.0) {
      lo = c.beta;
      c.beta = std::isinf(hi) ? c.beta * 2.0 : 0.5 * (c.beta + hi);
    } else {
      hi = c.beta;
      c.beta = 0.5 * (c.beta + lo);
    }
  }
  c.steps = std::min(c.steps, max_steps);
  return c;
}

AffinityResult pairwise_affinities(const Matrix& features, double perplexity, int threads) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < 3) throw ConfigError("affinities need at least three points");
  if (!(perplexity > 1.0 && perplexity < static_cast<double>(n) - 1.0))
    throw ConfigError("perplexity " + detail::format_double(perplexity) + " infeasible for n=" + std::to_string(n));

  Matrix d = squared_distances(features);
  bool duplicates = false;
  for (std::size_t i = 0; i < n && !duplicates; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (d(i, j) == 0.0) {
        duplicates = true;
        break;
      }
  if (duplicates) {
    Rng rng = make_rng(0, "tsne-duplicate-jitter");
    std::normal_distribution<double> normal(0.0, 1e-10);
    Matrix jittered = features;
    for (Eigen::Index r = 0; r < jittered.rows(); ++r)
      for (Eigen::Index c = 0; c < jittered.cols(); ++c) jittered(r, c) += normal(rng);
    d = squared_distances(jittered);
  }

  AffinityResult out;
  out.beta.resize(n);
  out.entropy_bits.resize(n);
  Matrix cond(n, n);  // column i holds p_{.|i}
  parallel_for(n, threads, [&](std::size_t i) {
    const Vector row = d.col(i);
    const Calibration cal = calibrate_bandwidth(row, i, perplexity);
    const ConditionalRow cr = conditional_distribution(row, i, cal.beta);
    cond.col(i) = cr.probs;
    out.beta(i) = cal.beta;
    out.entropy_bits(i) = cr.entropy_bits;
  });
  out.P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  out.P.diagonal().setZero();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Student-t kernel normalizer Z = sum_{i != j} 1 / (1 + |y_i - y_j|^2).
double kernel_normalizer(const Matrix& y) {
  const Eigen::Index n = y.rows();
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      row += 1.0 / (1.0 + dx * dx + dy * dy);
    }
    z += row;
  }
  return 2.0 * z;
}

void gradient_into(const Matrix& P, const Matrix& y, double p_scale, Matrix& grad, int threads) {
  const Eigen::Index n = y.rows();
  const double inv_z = 1.0 / kernel_normalizer(y);
  grad.resize(n, 2);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    const double* p = P.col(i).data();
    const double yi0 = y(i, 0), yi1 = y(i, 1);
    double g0 = 0.0, g1 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = yi0 - y(j, 0), dy = yi1 - y(j, 1);
      const double w = 1.0 / (1.0 + dx * dx + dy * dy);
      const double m = (p_scale * p[j] - w * inv_z) * w;
      g0 += m * dx;
      g1 += m * dy;
    }
    grad(i, 0) = 4.0 * g0;
    grad(i, 1) = 4.0 * g1;
  });
}

}  // namespace

double kl_divergence(const Matrix& P, const Matrix& coords) {
  if (coords.cols() != 2 || P.rows() != coords.rows() || P.cols() != coords.rows())
    throw ConfigError("kl_divergence: shape mismatch");
  const Eigen::Index n = coords.rows();
  const double log_z = std::log(kernel_normalizer(coords));
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || P(j, i) <= 0.0) continue;
      const double dx = coords(i, 0) - coords(j, 0), dy = coords(i, 1) - coords(j, 1);
      // log q_ij = -log(1 + d^2) - log Z
      kl += P(j, i) * (std::log(P(j, i)) + std::log1p(dx * dx + dy * dy) + log_z);
    }
  return std::max(0.0, kl);
}

Matrix kl_gradient(const Matrix& P, const Matrix& coords) {
  if (coords.cols() != 2 || P.rows() != coords.rows() || P.cols() != coords.rows())
    throw ConfigError("kl_gradient: shape mismatch");
  Matrix grad;
  gradient_into(P, coords, 1.0, grad, 1);
  return grad;
}

EmbeddingResult tsne_embed(const Matrix& features, const TsneConfig& config) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < 2) throw ConfigError("t-SNE needs at least two points");
  if (!features.allFinite()) throw ConfigError("t-SNE input has non-finite features");
  config.validate(n);

  Matrix P;
  if (n < 4) {
    P = Matrix::Constant(n, n, 1.0 / static_cast<double>(n * (n - 1)));
    P.diagonal().setZero();
  } else {
    P = pairwise_affinities(features, config.perplexity, config.threads).P;
  }

  Rng rng = make_rng(config.seed, "tsne-init");
  std::normal_distribution<double> normal(0.0, 1e-2);  // variance 1e-4
  EmbeddingResult result;
  Matrix& y = result.coords;
  y.resize(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    y(i, 0) = normal(rng);
    y(i, 1) = normal(rng);
  }

  Matrix grad, update = Matrix::Zero(y.rows(), 2), gains = Matrix::Ones(y.rows(), 2);
  auto checkpoint = [&](int iter) {
    const double kl = kl_divergence(P, y);
    if (!std::isfinite(kl) || !y.allFinite()) throw NumericalError("non-finite t-SNE objective", iter);
    result.kl_trace.emplace_back(iter, kl);
    return kl;
  };

  result.kl_after_exaggeration = config.exaggeration_iters == 0 ? checkpoint(0) : 0.0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    const bool exaggerating = iter < config.exaggeration_iters;
    gradient_into(P, y, exaggerating ? config.exaggeration : 1.0, grad, config.threads);
    const double momentum = iter < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;
    if (config.adaptive_gains) {
      for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index c = 0; c < 2; ++c) {
          const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
          gains(i, c) = std::max(config.min_gain, same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2);
        }
    }
    update = momentum * update - config.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();

    if (iter + 1 == config.exaggeration_iters) result.kl_after_exaggeration = checkpoint(iter);
    else if ((iter + 1) % 50 == 0 || iter + 1 == config.iterations) checkpoint(iter);
    else if (!y.allFinite()) throw NumericalError("non-finite t-SNE coordinates", iter);
  }
  result.final_kl = result.kl_trace.empty() ? checkpoint(config.iterations) : result.kl_trace.back().second;
  result.source_tags.assign(n, PointSource::real);
  return result;
}

EmbeddingResult project_real_vs_fake(const LabeledDataset& real, const LabeledDataset& fake, std::size_t subsample,
                                     const TsneConfig& config) {
  if (subsample == 0) throw ConfigError("subsample must be positive");
  if (subsample > real.size() || subsample > fake.size())
    throw ConfigError("subsample " + std::to_string(subsample) + " exceeds a source's size");
  if (real.dim() != fake.dim()) throw ConfigError("real and fake feature dims differ");

  auto pick = [&](std::size_t n, std::string_view stream) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(config.seed, stream);
    for (std::size_t i = 0; i < subsample; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, n - 1);
      std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(subsample);
    return idx;
  };
  const auto real_idx = pick(real.size(), "tsne-subsample-real");
  const auto fake_idx = pick(fake.size(), "tsne-subsample-fake");

  const auto m = static_cast<Eigen::Index>(subsample);
  Matrix joint(2 * m, real.dim());
  for (Eigen::Index i = 0; i < m; ++i) {
    joint.row(i) = real.features.row(static_cast<Eigen::Index>(real_idx[i]));
    joint.row(m + i) = fake.features.row(static_cast<Eigen::Index>(fake_idx[i]));
  }

  TsneConfig cfg = config;
  const double n = static_cast<double>(2 * subsample);
  if (2 * subsample >= 4 && !(cfg.perplexity < n - 1.0)) cfg.perplexity = (n - 1.0) / 2.0;
  EmbeddingResult result = tsne_embed(joint, cfg);
  for (std::size_t i = subsample; i < 2 * subsample; ++i) result.source_tags[i] = PointSource::fake;
  return result;
}

double coverage_statistic(const EmbeddingResult& result) {
  std::vector<Eigen::Index> real, fake;
  for (std::size_t i = 0; i < result.source_tags.size(); ++i)
    (result.source_tags[i] == PointSource::real ? real : fake).push_back(static_cast<Eigen::Index>(i));
  if (real.size() < 2 || fake.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Matrix& y = result.coords;
  auto dist2 = [&](Eigen::Index a, Eigen::Index b) { return (y.row(a) - y.row(b)).squaredNorm(); };

  std::vector<double> real_nn(real.size()), fake_nn(real.size());
  for (std::size_t a = 0; a < real.size(); ++a) {
    double best_r = std::numeric_limits<double>::infinity(), best_f = best_r;
    for (std::size_t b = 0; b < real.size(); ++b)
      if (a != b) best_r = std::min(best_r, dist2(real[a], real[b]));
    for (Eigen::Index f : fake) best_f = std::min(best_f, dist2(real[a], f));
    real_nn[a] = std::sqrt(best_r);
    fake_nn[a] = std::sqrt(best_f);
  }
  std::vector<double> sorted = real_nn;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  std::size_t uncovered = 0;
  for (double d : fake_nn) uncovered += d > median;
  return static_cast<double>(uncovered) / static_cast<double>(real.size());
}

void write_embedding_csv(const EmbeddingResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "x,y,source\n";
  for (Eigen::Index i = 0; i < result.coords.rows(); ++i)
    out << detail::format_double(result.coords(i, 0)) << ',' << detail::format_double(result.coords(i, 1)) << ','
        << (result.source_tags[i] == PointSource::real ? "real" : "fake") << '\n';
}

}  // namespace augforge
