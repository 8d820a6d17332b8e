#include "augforge/run_config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "augforge/error.hpp"
#include "parse_util.hpp"

namespace augforge {

namespace {

SyntheticSettings& synth(RunConfig& c) {
  if (!c.synthetic) c.synthetic.emplace();
  return *c.synthetic;
}

int to_int(std::string_view v, std::string_view key) { return static_cast<int>(detail::parse_int(v, key)); }

}  // namespace

void apply_setting(RunConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const std::string key(detail::trim(raw_key));
  const std::string_view value = detail::trim(raw_value);
  using detail::parse_double;

  if (key == "seed") c.seed = detail::parse_u64(value, key);
  else if (key == "out") c.out_dir = std::string(value);
  else if (key == "data.train") c.train_path = std::string(value);
  else if (key == "data.pretrain") c.pretrain_path = std::string(value);
  else if (key == "data.test") c.test_path = std::string(value);
  else if (key == "data.fake") c.fake_path = std::string(value);
  else if (key == "data.holdout") c.holdout_fraction = parse_double(value, key);
  else if (key == "synth.dim") synth(c).dim = to_int(value, key);
  else if (key == "synth.train_per_class") synth(c).train_per_class = to_int(value, key);
  else if (key == "synth.test_per_class") synth(c).test_per_class = to_int(value, key);
  else if (key == "synth.pretrain_per_class") synth(c).pretrain_per_class = to_int(value, key);
  else if (key == "synth.separation") synth(c).separation = parse_double(value, key);
  else if (key == "synth.cov") synth(c).cov = parse_double(value, key);
  else if (key == "synth.pretrain_separation") synth(c).pretrain_separation = parse_double(value, key);
  else if (key == "synth.pretrain_angle") synth(c).pretrain_angle_deg = parse_double(value, key);
  else if (key == "classifier.hidden") c.classifier.hidden = detail::parse_int_list(value, key);
  else if (key == "classifier.activation") c.classifier.hidden_activation = parse_activation(value);
  else if (key == "classifier.epochs") c.classifier.epochs = to_int(value, key);
  else if (key == "classifier.batch") c.classifier.batch_size = to_int(value, key);
  else if (key == "classifier.lr") c.classifier.optimizer.learning_rate = parse_double(value, key);
  else if (key == "classifier.weight_decay") c.classifier.optimizer.weight_decay = parse_double(value, key);
  else if (key == "cgan.n_fake") c.n_fake = to_int(value, key);
  else if (key.rfind("cgan.", 0) == 0) set_config_entry(c.cgan, std::string_view(key).substr(5), value);
  else if (key == "eval.grid_step") c.grid_step = parse_double(value, key);
  else if (key == "eval.test") {
    if (value == "normal") c.significance = SignificanceTest::normal_approximation;
    else if (value == "exact") c.significance = SignificanceTest::exact_binomial;
    else throw ConfigError("eval.test must be 'normal' or 'exact'");
  } else if (key == "eval.exact_binomial") {
    c.significance = detail::parse_bool(value, key) ? SignificanceTest::exact_binomial
                                                   : SignificanceTest::normal_approximation;
  } else if (key == "eval.classifiers") {
    c.classifiers.clear();
    for (auto item : detail::split_list(value, ',')) c.classifiers.emplace_back(item);
  } else if (key == "sweep.ns") c.sweep_ns = detail::parse_int_list(value, key);
  else if (key == "sweep.use_pretrain") c.sweep_use_pretrain = detail::parse_bool(value, key);
  else if (key == "tsne.perplexity") c.tsne.perplexity = parse_double(value, key);
  else if (key == "tsne.iterations") c.tsne.iterations = to_int(value, key);
  else if (key == "tsne.learning_rate") c.tsne.learning_rate = parse_double(value, key);
  else if (key == "tsne.exaggeration") c.tsne.exaggeration = parse_double(value, key);
  else if (key == "tsne.exaggeration_iters") {
    c.tsne.exaggeration_iters = to_int(value, key);
  } else if (key == "tsne.momentum_switch") {
    c.tsne.momentum_switch_iter = to_int(value, key);
  } else if (key == "tsne.subsample") {
    const auto v = detail::parse_int(value, key);
    if (v < 0) throw ConfigError("tsne.subsample must be >= 0");
    c.tsne_subsample = static_cast<std::size_t>(v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_setting(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    try {
      apply_setting(c, s);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in);
}

void RunConfig::validate() const {
  for (const auto* p : {&train_path, &pretrain_path, &test_path})
    if (*p && !std::filesystem::exists(**p)) throw ConfigError("dataset file not found: " + (*p)->string());
  if (!train_path && !synthetic) throw ConfigError("no training data: set data.train or synth.* keys");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("data.holdout must lie in (0, 1)");
  if (synthetic) {
    const auto& s = *synthetic;
    if (s.dim < 2) throw ConfigError("synth.dim must be >= 2");
    if (s.train_per_class < 1 || s.test_per_class < 1 || s.pretrain_per_class < 0)
      throw ConfigError("synth sample counts must be positive");
    if (!(s.cov >= 0.0)) throw ConfigError("synth.cov must be >= 0");
  }
  if (classifier.epochs < 0 || classifier.batch_size < 1) throw ConfigError("invalid classifier options");
  for (int h : classifier.hidden)
    if (h < 1) throw ConfigError("classifier hidden widths must be positive");
  cgan.validate();
  if (n_fake < 1) throw ConfigError("cgan.n_fake must be positive");
  for (const auto& name : classifiers)
    if (name != "cb" && name != "cf" && name != "ct")
      throw ConfigError("eval.classifiers entries must be cb, cf or ct");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ConfigError("eval.grid_step must lie in (0, 1]");
}

// ---------------------------------------------------------------------------

RunData make_synthetic_data(const SyntheticSettings& s, std::uint64_t seed) {
  Rng rng = make_rng(seed, "synth-direction");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(s.dim), v(s.dim);
  for (int j = 0; j < s.dim; ++j) u(j) = normal(rng);
  for (int j = 0; j < s.dim; ++j) v(j) = normal(rng);
  u.normalize();
  v -= v.dot(u) * u;
  v.normalize();

  auto along = [&](const Vector& axis, double separation, int per_class, std::string_view stream) {
    SyntheticSpec spec;
    spec.dim = s.dim;
    spec.class_means = {{(separation / 2.0) * axis}, {(-separation / 2.0) * axis}};
    spec.cov_scale = s.cov;
    spec.samples_per_class = {per_class, per_class};
    spec.seed = derive_seed(seed, stream);
    return make_synthetic(spec);
  };

  RunData data;
  data.train = along(u, s.separation, s.train_per_class, "synth-train");
  data.test = along(u, s.separation, s.test_per_class, "synth-test");
  if (s.pretrain_per_class > 0) {
    const double angle = s.pretrain_angle_deg * std::numbers::pi / 180.0;
    const Vector axis = std::cos(angle) * u + std::sin(angle) * v;
    data.pretrain = along(axis, s.pretrain_separation, s.pretrain_per_class, "synth-pretrain");
  }
  data.train_name = "synthetic";
  data.test_name = "synthetic-test";
  return data;
}

RunData resolve_data(const RunConfig& config) {
  RunData data;
  if (config.train_path) {
    data.train = load_dataset(*config.train_path);
    data.train_name = config.train_path->stem().string();
  } else if (config.synthetic) {
    data = make_synthetic_data(*config.synthetic, config.seed);
  } else {
    throw ConfigError("no training data: set data.train or synth.* keys");
  }
  if (config.test_path) {
    data.test = load_dataset(*config.test_path);
    data.test_name = config.test_path->stem().string();
  }
  if (config.pretrain_path) data.pretrain = load_dataset(*config.pretrain_path);

  // A split may miss the highest class id, so the sets agree on the widest K.
  int k = data.train.num_classes;
  for (auto* ds : {&data.test, &data.pretrain}) {
    if (!*ds) continue;
    if ((*ds)->dim() != data.train.dim()) throw ConfigError("dataset feature dims disagree with the training set");
    k = std::max(k, (*ds)->num_classes);
  }
  data.train.num_classes = k;
  for (auto* ds : {&data.test, &data.pretrain})
    if (*ds) (*ds)->num_classes = k;
  return data;
}

}  // namespace augforge
