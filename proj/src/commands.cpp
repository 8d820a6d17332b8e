#include "augforge/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "augforge/cgan.hpp"
#include "augforge/error.hpp"
#include "augforge/eval.hpp"
#include "augforge/parallel.hpp"
#include "augforge/svg.hpp"
#include "augforge/tsne.hpp"
#include "parse_util.hpp"

namespace augforge {

namespace {

ClassifierOptions classifier_options(const RunConfig& config, std::string_view role) {
  ClassifierOptions opts = config.classifier;
  opts.seed = derive_seed(config.seed, std::string("classifier-") + std::string(role));
  return opts;
}

SplitIndices holdout_carve(const RunConfig& config, const LabeledDataset& train) {
  return split_indices(train, {1.0 - config.holdout_fraction, derive_seed(config.seed, "holdout-carve"), true});
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

bool wants(const RunConfig& config, std::string_view name) {
  return std::find(config.classifiers.begin(), config.classifiers.end(), name) != config.classifiers.end();
}

}  // namespace

void cmd_synth(const SynthOptions& o, std::ostream& log) {
  if (o.dim < 2) throw ConfigError("--dim must be >= 2");
  if (o.per_class < 1) throw ConfigError("--per-class must be >= 1");
  if (o.classes < 2) throw ConfigError("--classes must be >= 2");
  if (!(o.cov >= 0.0)) throw ConfigError("--cov must be >= 0");
  if (o.output.empty()) throw ConfigError("-o/--output is required");

  SyntheticSpec spec;
  if (o.classes == 2) {
    spec = SyntheticSpec::two_class(o.dim, o.separation, o.cov, o.per_class, derive_seed(o.seed, "synth-data"),
                                    derive_seed(o.seed, "synth-direction"));
  } else {
    Rng rng = make_rng(o.seed, "synth-direction");
    std::normal_distribution<double> normal(0.0, 1.0);
    spec.dim = o.dim;
    for (int c = 0; c < o.classes; ++c) {
      Vector mean(o.dim);
      for (int j = 0; j < o.dim; ++j) mean(j) = normal(rng);
      spec.class_means.push_back({(o.separation / 2.0) * mean.normalized()});
    }
    spec.cov_scale = o.cov;
    spec.samples_per_class.assign(o.classes, o.per_class);
    spec.seed = derive_seed(o.seed, "synth-data");
  }
  const LabeledDataset ds = make_synthetic(spec);
  if (o.output.has_parent_path()) std::filesystem::create_directories(o.output.parent_path());
  save_dataset(ds, o.output);
  log << "n=" << ds.size() << " d=" << ds.dim() << " K=" << ds.num_classes << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunData data = resolve_data(config);
  const SplitIndices carve = holdout_carve(config, data.train);
  const LabeledDataset train = data.train.subset(carve.train);
  std::filesystem::create_directories(config.out_dir);
  log << "[train] " << train.size() << " training samples, " << carve.test.size() << " held out, d=" << train.dim()
      << '\n';

  const MlpModel baseline = train_classifier(train, classifier_options(config, "cb"));
  save_model(baseline, config.out_dir / "baseline.model");

  CGanConfig cgan_cfg = config.cgan;
  cgan_cfg.seed = derive_seed(config.seed, "cgan");
  const LabeledDataset& pretrain = data.pretrain ? *data.pretrain : train;
  log << "[train] cgan: " << cgan_cfg.pretrain_iters << " pre-train iterations on " << pretrain.size()
      << " samples, " << cgan_cfg.finetune_iters << " fine-tune iterations\n";
  const TrainedCGan gan = train_cgan(pretrain, train, baseline, cgan_cfg);
  save_cgan(gan, config.out_dir);
  write_telemetry(gan.telemetry, config.out_dir / "telemetry.csv");

  Rng rng = make_rng(config.seed, "generate");
  const LabeledDataset fake = generate(gan, balanced_counts(config.n_fake, train.num_classes), rng);
  save_dataset(fake, config.out_dir / "fake.csv");
  log << "[train] wrote " << fake.size() << " fake samples to " << (config.out_dir / "fake.csv").string() << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunData data = resolve_data(config);
  if (!data.test) throw ConfigError("eval needs a test set (data.test or synth.*)");
  const auto baseline_path = config.out_dir / "baseline.model";
  const auto fake_path = config.fake_path.value_or(config.out_dir / "fake.csv");
  if (!std::filesystem::exists(baseline_path))
    throw ConfigError("missing artifact " + baseline_path.string() + " (run train first)");

  const SplitIndices carve = holdout_carve(config, data.train);
  const LabeledDataset holdout = data.train.subset(carve.test);
  const LabeledDataset& test = *data.test;
  const double chance = 1.0 / test.num_classes;

  struct Member {
    std::string name;
    MlpModel model;
  };
  std::vector<Member> members;
  members.push_back({"C_b", load_model(baseline_path)});
  if (wants(config, "cf")) {
    if (!std::filesystem::exists(fake_path)) throw ConfigError("missing artifact " + fake_path.string());
    LabeledDataset fake = load_dataset(fake_path);
    fake.num_classes = std::max(fake.num_classes, data.train.num_classes);
    members.push_back({"C_f", train_classifier(fake, classifier_options(config, "cf"))});
  }
  if (wants(config, "ct") && data.pretrain)
    members.push_back({"C_t", train_classifier(*data.pretrain, classifier_options(config, "ct"))});

  std::vector<ReportRow> rows;
  {
    EvalReport chance_row;
    chance_row.n = test.size();
    chance_row.accuracy = chance;
    chance_row.p_value_vs_chance = 0.5;
    rows.push_back({"Chance", data.test_name, chance_row});
  }
  for (const auto& m : members) rows.push_back({m.name, data.test_name, evaluate(m.model, test, chance, config.significance)});

  std::string weights_csv = "ensemble,weights,validation_accuracy,holdout_n\n";
  auto bag = [&](std::size_t count) {
    std::vector<const MlpModel*> models;
    std::string name;
    for (std::size_t i = 0; i < count; ++i) {
      models.push_back(&members[i].model);
      name += (i ? "+" : "") + members[i].name;
    }
    BagWeights w = tune_bag_weights(models, holdout, config.grid_step);
    w.holdout_indices = carve.test;
    const auto pred = bag_predict(models, w.weights, test.features);
    rows.push_back({name, data.test_name, report_from_predictions(pred, test.labels, chance, config.significance)});
    std::string ws;
    for (std::size_t i = 0; i < w.weights.size(); ++i) ws += (i ? " " : "") + detail::format_double(w.weights[i]);
    weights_csv += name + ',' + ws + ',' + detail::format_double(w.validation_accuracy) + ',' +
                   std::to_string(w.holdout_indices.size()) + '\n';
  };
  const bool has_cf = members.size() >= 2 && members[1].name == "C_f";
  if (has_cf) bag(2);
  if (has_cf && members.size() == 3) bag(3);

  std::filesystem::create_directories(config.out_dir);
  write_report_csv(rows, config.out_dir / "report.csv");
  write_text(config.out_dir / "bag_weights.csv", weights_csv);
  for (const auto& r : rows)
    log << "[eval] " << r.classifier << ": accuracy " << detail::format_double(r.report.accuracy) << ", p "
        << detail::format_double(r.report.p_value_vs_chance) << '\n';
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunData data = resolve_data(config);
  if (!data.test) throw ConfigError("sweep needs a test set (data.test or synth.*)");
  if (!config.sweep_ns.empty() && static_cast<std::size_t>(config.sweep_ns.back()) > data.train.size())
    throw ConfigError("training set has " + std::to_string(data.train.size()) + " samples, sweep needs " +
                      std::to_string(config.sweep_ns.back()));

  SweepOptions opts;
  opts.ns = config.sweep_ns;
  opts.n_fake = config.n_fake;
  opts.cgan = config.cgan;
  opts.baseline = opts.reference = opts.fake = config.classifier;
  opts.pretrain = config.sweep_use_pretrain && data.pretrain ? &*data.pretrain : nullptr;
  opts.seed = derive_seed(config.seed, "sweep");
  opts.threads = configured_threads(static_cast<int>(config.sweep_ns.size()));
  log << "[sweep] " << opts.ns.size() << " arms on " << opts.threads << " thread(s)\n";
  const SweepResult result = size_sweep(data.train, *data.test, opts);

  std::filesystem::create_directories(config.out_dir);
  write_sweep_csv(result, config.out_dir / "sweep.csv");
  write_text(config.out_dir / "sweep.svg", sweep_svg(result));
  for (const auto& r : result.records)
    log << "[sweep] N=" << r.n << " fake-as-test " << detail::format_double(r.acc_fake_as_test)
        << " fake-as-train " << detail::format_double(r.acc_fake_as_train) << '\n';
}

void cmd_tsne(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunData data = resolve_data(config);
  const auto fake_path = config.fake_path.value_or(config.out_dir / "fake.csv");
  if (!std::filesystem::exists(fake_path)) throw ConfigError("missing fake dataset " + fake_path.string());
  const LabeledDataset fake = load_dataset(fake_path);

  TsneConfig tsne = config.tsne;
  tsne.seed = derive_seed(config.seed, "tsne");
  tsne.threads = configured_threads();
  const std::size_t subsample = std::min({config.tsne_subsample, data.train.size(), fake.size()});
  if (config.tsne_subsample == 0) throw ConfigError("tsne.subsample must be positive");
  if (subsample < config.tsne_subsample)
    log << "[tsne] subsample lowered to " << subsample << " (source size)\n";
  const EmbeddingResult result = project_real_vs_fake(data.train, fake, subsample, tsne);

  std::filesystem::create_directories(config.out_dir);
  write_embedding_csv(result, config.out_dir / "points.csv");
  write_text(config.out_dir / "scatter.svg", scatter_svg(result));
  log << "[tsne] " << result.coords.rows() << " points, final KL " << detail::format_double(result.final_kl) << '\n';
  log << "coverage: " << detail::format_double(coverage_statistic(result)) << '\n';
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"augforge: conditional-GAN data augmentation for low-resource classification"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic Gaussian-mixture dataset CSV");
  synth_cmd->add_option("--dim", synth.dim, "feature dimension");
  synth_cmd->add_option("--per-class", synth.per_class, "samples per class");
  synth_cmd->add_option("--classes", synth.classes, "number of classes");
  synth_cmd->add_option("--separation", synth.separation, "distance between class means");
  synth_cmd->add_option("--cov", synth.cov, "per-dimension variance");
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("-o,--output", synth.output, "output CSV path")->required();

  struct Common {
    std::optional<std::string> config, out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::optional<int> pretrain_iters, finetune_iters, n_fake;
    std::optional<std::string> ns, classifiers;
    std::optional<int> subsample;
  } common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "run config file (key=value lines)");
    cmd->add_option("--seed", common.seed, "global seed");
    cmd->add_option("--out", common.out, "output directory");
    cmd->add_option("--set", common.sets, "override a config key (key=value), repeatable");
  };
  auto* train_cmd = app.add_subcommand("train", "train C_b and the cGAN, then generate fake data");
  add_common(train_cmd);
  train_cmd->add_option("--pretrain-iters", common.pretrain_iters);
  train_cmd->add_option("--finetune-iters", common.finetune_iters);
  train_cmd->add_option("--n-fake", common.n_fake);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate C_b, C_f, C_t and their bagged ensembles");
  add_common(eval_cmd);
  eval_cmd->add_option("--classifiers", common.classifiers, "subset of cb,cf,ct");
  auto* sweep_cmd = app.add_subcommand("sweep", "fake-as-test / fake-as-train sweep over cGAN training sizes");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--ns", common.ns, "comma-separated N values");
  sweep_cmd->add_option("--n-fake", common.n_fake);
  auto* tsne_cmd = app.add_subcommand("tsne", "t-SNE projection of real vs fake points");
  add_common(tsne_cmd);
  tsne_cmd->add_option("--subsample", common.subsample, "points per source");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      cmd_synth(synth, out);
      return kExitOk;
    }
    RunConfig config = common.config ? load_run_config(*common.config) : RunConfig{};
    for (const auto& s : common.sets) apply_setting(config, s);
    if (common.seed) config.seed = *common.seed;
    if (common.out) config.out_dir = *common.out;
    if (common.pretrain_iters) config.cgan.pretrain_iters = *common.pretrain_iters;
    if (common.finetune_iters) config.cgan.finetune_iters = *common.finetune_iters;
    if (common.n_fake) config.n_fake = *common.n_fake;
    if (common.ns) apply_setting(config, "sweep.ns", *common.ns);
    if (common.classifiers) apply_setting(config, "eval.classifiers", *common.classifiers);
    if (common.subsample) apply_setting(config, "tsne.subsample", std::to_string(*common.subsample));

    if (train_cmd->parsed()) cmd_train(config, err);
    else if (eval_cmd->parsed()) cmd_eval(config, err);
    else if (sweep_cmd->parsed()) cmd_sweep(config, err);
    else if (tsne_cmd->parsed()) cmd_tsne(config, out);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace augforge
