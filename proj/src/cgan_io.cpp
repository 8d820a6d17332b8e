#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "augforge/cgan.hpp"
#include "augforge/error.hpp"
#include "parse_util.hpp"

namespace augforge {

namespace {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

std::string vector_line(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += detail::format_double(v(i));
  }
  return out;
}

Vector parse_vector_line(std::string_view s) {
  std::vector<double> values;
  for (auto item : detail::split_list(s, ' '))
    if (!item.empty()) values.push_back(detail::parse_double(item, "manifest vector"));
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const CGanConfig& c) {
  using detail::format_double;
  return {
      {"noise_dim", std::to_string(c.noise_dim)},
      {"lambda", c.lambda_schedule.format()},
      {"smoothing", format_double(c.smoothing_target)},
      {"noise_variance", format_double(c.input_noise_variance)},
      {"gen_updates", std::to_string(c.gen_updates_min) + "," + std::to_string(c.gen_updates_max)},
      {"batch", std::to_string(c.batch_size)},
      {"pretrain_iters", std::to_string(c.pretrain_iters)},
      {"finetune_iters", std::to_string(c.finetune_iters)},
      {"generator_hidden", detail::join(c.generator_hidden)},
      {"discriminator_hidden", detail::join(c.discriminator_hidden)},
      {"generator_activation", std::string(to_string(c.generator_activation))},
      {"discriminator_activation", std::string(to_string(c.discriminator_activation))},
      {"optimizer", std::string(to_string(c.generator_optimizer.kind))},
      {"g_lr", format_double(c.generator_optimizer.learning_rate)},
      {"d_lr", format_double(c.discriminator_optimizer.learning_rate)},
      {"beta1", format_double(c.generator_optimizer.beta1)},
      {"seed", std::to_string(c.seed)},
  };
}

void set_config_entry(CGanConfig& c, std::string_view key, std::string_view value) {
  const std::string k(key);
  if (k == "noise_dim") {
    c.noise_dim = static_cast<int>(detail::parse_int(value, k));
  } else if (k == "lambda") {
    c.lambda_schedule = LambdaSchedule::parse(value);
  } else if (k == "smoothing") {
    c.smoothing_target = detail::parse_double(value, k);
  } else if (k == "noise_variance") {
    c.input_noise_variance = detail::parse_double(value, k);
  } else if (k == "gen_updates") {
    const auto v = detail::parse_int_list(value, k);
    if (v.size() == 1) {
      c.gen_updates_min = c.gen_updates_max = v[0];
    } else if (v.size() == 2) {
      c.gen_updates_min = v[0];
      c.gen_updates_max = v[1];
    } else {
      throw ConfigError("gen_updates takes 'n' or 'min,max'");
    }
  } else if (k == "batch") {
    c.batch_size = static_cast<int>(detail::parse_int(value, k));
  } else if (k == "pretrain_iters") {
    c.pretrain_iters = static_cast<int>(detail::parse_int(value, k));
  } else if (k == "finetune_iters") {
    c.finetune_iters = static_cast<int>(detail::parse_int(value, k));
  } else if (k == "generator_hidden") {
    c.generator_hidden = detail::parse_int_list(value, k);
  } else if (k == "discriminator_hidden") {
    c.discriminator_hidden = detail::parse_int_list(value, k);
  } else if (k == "generator_activation") {
    c.generator_activation = parse_activation(detail::trim(value));
  } else if (k == "discriminator_activation") {
    c.discriminator_activation = parse_activation(detail::trim(value));
  } else if (k == "optimizer") {
    c.generator_optimizer.kind = c.discriminator_optimizer.kind = parse_optimizer(detail::trim(value));
  } else if (k == "g_lr") {
    c.generator_optimizer.learning_rate = detail::parse_double(value, k);
  } else if (k == "d_lr") {
    c.discriminator_optimizer.learning_rate = detail::parse_double(value, k);
  } else if (k == "beta1") {
    c.generator_optimizer.beta1 = c.discriminator_optimizer.beta1 = detail::parse_double(value, k);
  } else if (k == "seed") {
    c.seed = detail::parse_u64(value, k);
  } else {
    throw ConfigError("unknown cgan key '" + k + "'");
  }
}

void save_cgan(const TrainedCGan& cgan, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_model(cgan.generator, dir / "generator.model");
  save_model(cgan.discriminator, dir / "discriminator.model");
  std::ofstream out(dir / "cgan.manifest", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "cgan.manifest").string());
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cgan.baseline_hash));
  out << "AUGFORGE-CGAN v1\n";
  out << "num_classes: " << cgan.num_classes << '\n';
  out << "feature_dim: " << cgan.feature_dim() << '\n';
  out << "baseline_hash: " << hash << '\n';
  out << "scaling_mean: " << vector_line(cgan.scaling.mean) << '\n';
  out << "scaling_std: " << vector_line(cgan.scaling.stddev) << '\n';
  for (const auto& [k, v] : config_entries(cgan.config)) out << "cgan." << k << ": " << v << '\n';
}

TrainedCGan load_cgan(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "cgan.manifest";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line)) throw MalformedModelError("empty cgan manifest");
  {
    std::istringstream hs(line);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "AUGFORGE-CGAN") throw MalformedModelError("not a cgan manifest");
    if (version != "v1") throw ModelVersionError("unsupported cgan manifest version '" + version + "'");
  }
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw MalformedModelError("bad manifest line '" + line + "'");
    fields[line.substr(0, colon)] = std::string(detail::trim(std::string_view(line).substr(colon + 1)));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw MalformedModelError("manifest missing '" + key + "'");
    return it->second;
  };

  TrainedCGan gan;
  try {
    gan.num_classes = static_cast<int>(detail::parse_int(get("num_classes"), "num_classes"));
    gan.baseline_hash = detail::parse_u64("0x" + get("baseline_hash"), "baseline_hash");
    gan.scaling.mean = parse_vector_line(get("scaling_mean"));
    gan.scaling.stddev = parse_vector_line(get("scaling_std"));
    for (const auto& [k, v] : fields)
      if (k.rfind("cgan.", 0) == 0) set_config_entry(gan.config, k.substr(5), v);
  } catch (const ConfigError& e) {
    throw MalformedModelError(std::string("cgan manifest: ") + e.what());
  }
  gan.generator = load_model(dir / "generator.model");
  gan.discriminator = load_model(dir / "discriminator.model");
  const auto d = detail::parse_int(get("feature_dim"), "feature_dim");
  if (gan.generator.output_dim() != d || gan.scaling.mean.size() != d || gan.scaling.stddev.size() != d ||
      gan.discriminator.input_dim() != d + gan.num_classes)
    throw ModelShapeError("cgan manifest dims do not match model files");
  return gan;
}

void write_telemetry(const std::vector<IterationRecord>& telemetry, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "iter,phase,L_D,L_G1,L_G2,lambda,u\n";
  for (const auto& r : telemetry) {
    out << r.iteration << ',' << to_string(r.phase) << ',' << detail::format_double(r.loss_d) << ','
        << detail::format_double(r.loss_g1) << ',' << detail::format_double(r.loss_g2) << ','
        << detail::format_double(r.lambda) << ',' << r.gen_updates << '\n';
  }
}

}  // namespace augforge
