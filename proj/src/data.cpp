#include "augforge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "augforge/error.hpp"

namespace augforge {

void LabeledDataset::validate() const {
  if (num_classes < 2) throw ConfigError("dataset needs at least two classes");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ConfigError("feature rows and label count differ");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw ConfigError("label " + std::to_string(y) + " out of range");
  if (!features.allFinite()) throw ConfigError("dataset contains non-finite features");
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[y];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

LabeledDataset parse_dataset(std::istream& in) {
  std::vector<int> labels;
  std::vector<double> values;
  long dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = row.find(',', start);
      cells.push_back(trim(row.substr(start, comma == std::string_view::npos ? row.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }

    long label = 0;
    {
      const auto cell = cells[0];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty())
        throw ParseError(ParseError::Kind::non_numeric, line_no, "label '" + std::string(cell) + "' is not an integer");
      if (label < 0) throw ParseError(ParseError::Kind::negative_label, line_no, "negative label " + std::to_string(label));
    }
    const long d = static_cast<long>(cells.size()) - 1;
    if (d < 1) throw ParseError(ParseError::Kind::ragged_row, line_no, "row has no features");
    if (dim < 0) dim = d;
    if (d != dim)
      throw ParseError(ParseError::Kind::ragged_row, line_no,
                       "row has " + std::to_string(d) + " features, expected " + std::to_string(dim));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = cells[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v))
        throw ParseError(ParseError::Kind::non_numeric, line_no, "feature '" + std::string(cell) + "' is not a finite number");
      values.push_back(v);
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw ParseError(ParseError::Kind::no_samples, 0, "no samples");

  LabeledDataset ds;
  ds.labels = std::move(labels);
  ds.features.resize(static_cast<Eigen::Index>(ds.labels.size()), dim);
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) ds.features(r, c) = values[r * dim + c];
  // A single-class file still describes a binary task.
  ds.num_classes = std::max(2, *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::io, 0, "cannot open " + path.string());
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const LabeledDataset& ds) {
  char buf[64];
  std::string line;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line = std::to_string(ds.labels[i]);
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ds.features(static_cast<Eigen::Index>(i), c));
      line += ',';
      line.append(buf, ptr);
    }
    line += '\n';
    out << line;
  }
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dataset(out, ds);
  if (!out) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

namespace {

void shuffle_in_place(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

SplitIndices split_indices(const LabeledDataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  Rng rng(spec.seed);
  SplitIndices out;
  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    for (auto& members : by_class) {
      shuffle_in_place(members, rng);
      const auto take = static_cast<std::size_t>(std::llround(spec.train_fraction * members.size()));
      out.train.insert(out.train.end(), members.begin(), members.begin() + take);
      out.test.insert(out.test.end(), members.begin() + take, members.end());
    }
    shuffle_in_place(out.train, rng);
    shuffle_in_place(out.test, rng);
  } else {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, rng);
    const auto take = static_cast<std::size_t>(std::llround(spec.train_fraction * order.size()));
    out.train.assign(order.begin(), order.begin() + take);
    out.test.assign(order.begin() + take, order.end());
  }
  if (out.train.empty() || out.test.empty())
    throw ConfigError("train fraction " + std::to_string(spec.train_fraction) + " leaves a split empty for n=" +
                      std::to_string(ds.size()));
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

Vector one_hot(int label, int num_classes) {
  if (label < 0 || label >= num_classes)
    throw ConfigError("label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
  Vector v = Vector::Zero(num_classes);
  v(label) = 1.0;
  return v;
}

Matrix one_hot_rows(std::span<const int> labels, int num_classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw ConfigError("label out of range for one-hot");
    m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return m;
}

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = static_cast<int>(j);
  return best;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) out[r] = argmax(scores.row(r));
  return out;
}

// ---------------------------------------------------------------------------

SyntheticSpec SyntheticSpec::two_class(int dim, double separation, double cov_scale, int per_class,
                                       std::uint64_t seed, std::uint64_t direction_seed) {
  if (dim < 2) throw ConfigError("synthetic dim must be at least 2");
  Rng rng = make_rng(direction_seed, "synthetic-direction");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(dim);
  for (int j = 0; j < dim; ++j) u(j) = normal(rng);
  u.normalize();
  SyntheticSpec spec;
  spec.dim = dim;
  spec.class_means = {{(separation / 2.0) * u}, {(-separation / 2.0) * u}};
  spec.cov_scale = cov_scale;
  spec.samples_per_class = {per_class, per_class};
  spec.seed = seed;
  return spec;
}

void SyntheticSpec::validate() const {
  if (dim < 2) throw ConfigError("synthetic dim must be at least 2");
  if (class_means.size() < 2) throw ConfigError("synthetic spec needs at least two classes");
  if (samples_per_class.size() != class_means.size())
    throw ConfigError("samples_per_class must list one count per class");
  if (!(cov_scale >= 0.0) || !std::isfinite(cov_scale)) throw ConfigError("covariance scale must be non-negative");
  for (const auto& comps : class_means) {
    if (comps.empty()) throw ConfigError("every class needs at least one component mean");
    for (const auto& m : comps)
      if (m.size() != dim || !m.allFinite()) throw ConfigError("component mean has wrong dimension");
  }
  for (int n : samples_per_class)
    if (n < 1) throw ConfigError("samples per class must be positive");
}

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int k = static_cast<int>(spec.class_means.size());
  const long total = std::accumulate(spec.samples_per_class.begin(), spec.samples_per_class.end(), 0L);
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(spec.cov_scale);

  LabeledDataset ds;
  ds.num_classes = k;
  ds.features.resize(total, spec.dim);
  ds.labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c) {
    const auto& comps = spec.class_means[c];
    std::uniform_int_distribution<std::size_t> pick(0, comps.size() - 1);
    for (int s = 0; s < spec.samples_per_class[c]; ++s, ++row) {
      const Vector& mean = comps.size() == 1 ? comps[0] : comps[pick(rng)];
      for (int j = 0; j < spec.dim; ++j) ds.features(row, j) = mean(j) + sd * normal(rng);
      ds.labels.push_back(c);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

BatchSampler::BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed), order_(n) {
  if (n == 0) throw ConfigError("cannot sample batches from an empty dataset");
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  shuffle_in_place(order_, rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next_indices(std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > n_) throw ConfigError("batch size exceeds dataset size");
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    if (cursor_ == n_) {
      reshuffle();
      ++epoch_;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

Batch BatchSampler::next(const LabeledDataset& ds, std::size_t batch_size) {
  Batch b;
  b.indices = next_indices(batch_size);
  b.inputs.resize(static_cast<Eigen::Index>(batch_size), ds.features.cols());
  std::vector<int> labels(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(b.indices[i]));
    labels[i] = ds.labels[b.indices[i]];
  }
  b.targets = one_hot_rows(labels, ds.num_classes);
  return b;
}

Batch sample_batch(const LabeledDataset& ds, std::size_t batch_size, Rng& rng) {
  BatchSampler sampler(ds.size(), rng());
  return sampler.next(ds, batch_size);
}

}  // namespace augforge
