#include "tsalign/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsalign/config.hpp"
#include "tsalign/evaluation.hpp"

namespace tsalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Prepared {
  config::RunConfig rc;
  std::shared_ptr<const FrozenBackbone> backbone;
  data::Splits splits;
};

Prepared prepare(config::RunConfig rc, std::ostream& err) {
  Prepared p;
  p.backbone = config::build_backbone(rc.backbone);
  int max_h = 0;
  for (int h : rc.horizons) max_h = std::max(max_h, h);
  p.splits = data::load_splits(rc.dataset, rc.model.L, max_h);
  for (const auto& w : p.splits.warnings) err << "warning: " << w << '\n';
  rc.model.channels = static_cast<int>(p.splits.train.channels());
  p.rc = std::move(rc);
  return p;
}

evaluation::ExperimentSetup setup_for(const Prepared& p) {
  evaluation::ExperimentSetup s;
  s.dataset_name = p.rc.dataset.name;
  s.model = p.rc.model;
  s.train = p.rc.train;
  s.backbone = p.backbone;
  s.splits = p.splits;
  s.window_stride = p.rc.dataset.stride;
  s.few_shot_ratio = p.rc.dataset.split.few_shot_ratio;
  return s;
}

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path run_directory(const config::RunConfig& rc, const std::string& flag, std::uint64_t seed,
                       const std::string& suffix = "") {
  if (!flag.empty()) return flag;
  if (!rc.output_dir.empty()) {
    const fs::path p(rc.output_dir);
    return p.is_absolute() ? p : output_root() / p;
  }
  return output_root() / (rc.dataset.name + "-" + evaluation::variant_id(rc.variant) + suffix + "-seed" +
                          std::to_string(seed));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

fs::path horizon_dir(const fs::path& run, int h) { return run / ("H" + std::to_string(h)); }

std::string render_prompts(const Model& model, const Matrix& history, int horizon) {
  ForwardTrace trace;
  model.predict(history, &trace);
  std::ostringstream os;
  for (std::size_t ch = 0; ch < trace.channels.size(); ++ch) {
    for (alignment::Component c : alignment::kComponents) {
      os << "H=" << horizon << " channel=" << ch << " component=" << alignment::to_string(c) << ": "
         << trace.channels[ch].prompts[static_cast<std::size_t>(c)] << '\n';
    }
  }
  return os.str();
}

/// Loads the run snapshot and one model per horizon from `run`.
struct LoadedRun {
  Prepared prepared;
  std::vector<std::unique_ptr<Model>> models;
};

LoadedRun load_run(const fs::path& run, const std::vector<std::string>& overrides, std::ostream& err) {
  const fs::path cfg = run / "config.json";
  if (!fs::exists(cfg)) throw ValidationError("run directory has no config.json: " + run.string());
  LoadedRun lr;
  lr.prepared = prepare(config::load_run_config(cfg, overrides), err);
  const std::uint64_t seed = lr.prepared.rc.seed.value_or(0);
  for (int h : lr.prepared.rc.horizons) {
    ModelConfig mc = lr.prepared.rc.model;
    mc.H = h;
    auto model = std::make_unique<Model>(mc, lr.prepared.backbone, seed);
    const fs::path ckpt = horizon_dir(run, h) / "model.ckpt";
    if (!fs::exists(ckpt)) throw ValidationError("missing checkpoint: " + ckpt.string());
    model->load(ckpt);
    lr.models.push_back(std::move(model));
  }
  return lr;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::uint64_t seed, const std::string& out_flag, std::ostream& out, std::ostream& err) {
  std::vector<std::string> merged = overrides;
  merged.push_back("seed=" + std::to_string(seed));
  Prepared p = prepare(config::load_run_config(config_path, merged), err);
  const fs::path run = run_directory(p.rc, out_flag, seed);
  fs::create_directories(run);
  write_text(run / "config.json", p.rc.document.dump(2) + "\n");

  const evaluation::ExperimentSetup setup = setup_for(p);
  evaluation::MetricsReport report;
  report.dataset = p.rc.dataset.name;
  report.variant = evaluation::variant_id(p.rc.variant);
  report.seed = seed;
  report.anchor_hash = alignment::word_list_hash(p.rc.model.anchor_words);
  json summary = {{"dataset", report.dataset}, {"variant", report.variant}, {"seed", seed},
                  {"anchor_hash", report.anchor_hash}, {"horizons", json::array()}};
  std::string prompts;
  for (int h : p.rc.horizons) {
    err << "training H=" << h << " ...\n";
    evaluation::HorizonRun hr = evaluation::train_for_horizon(setup, h, seed);
    const fs::path hdir = horizon_dir(run, h);
    fs::create_directories(hdir);
    hr.model->save(hdir / "model.ckpt");
    write_text(hdir / "train_report.json", hr.report.to_json() + "\n");

    const auto test_w = data::make_windows(p.splits.test, p.rc.model.L, h, p.rc.dataset.stride);
    const auto baseline = evaluation::evaluate_windows(evaluation::history_mean_forecaster(h), test_w);
    prompts += render_prompts(*hr.model, test_w.front().history, h);
    report.horizons.push_back(hr.test);
    report.runtime_seconds += hr.report.seconds;
    summary["horizons"].push_back({{"horizon", h},
                                   {"test_mse", hr.test.mse},
                                   {"test_mae", hr.test.mae},
                                   {"test_windows", hr.test.windows},
                                   {"baseline_mse", baseline.mse},
                                   {"best_val_mse", hr.report.best_val_mse},
                                   {"steps", hr.report.total_steps},
                                   {"backbone_fingerprint", hr.report.backbone_fingerprint_after}});
    out << "H=" << h << " test MSE " << hr.test.mse << " MAE " << hr.test.mae << " (mean baseline MSE "
        << baseline.mse << ")\n";
  }
  write_text(run / "prompts.txt", prompts);
  write_text(run / "metrics.csv", evaluation::MetricsReport::csv_header() + "\n" + report.csv_rows());
  write_text(run / "summary.json", summary.dump(2) + "\n");
  out << "run directory: " << run.string() << '\n';
  return kOk;
}

int cmd_eval(const std::string& run_flag, const std::vector<std::string>& overrides,
             const std::string& out_flag, std::ostream& out, std::ostream& err) {
  const fs::path run(run_flag);
  LoadedRun lr = load_run(run, overrides, err);
  std::vector<const Model*> models;
  for (const auto& m : lr.models) models.push_back(m.get());
  evaluation::MetricsReport r = evaluation::evaluate(models, lr.prepared.splits.test, lr.prepared.rc.dataset.stride);
  r.variant = evaluation::variant_id(lr.prepared.rc.variant);
  r.seed = lr.prepared.rc.seed.value_or(0);
  const fs::path dest = out_flag.empty() ? run / "eval_metrics.csv" : fs::path(out_flag);
  write_text(dest, evaluation::MetricsReport::csv_header() + "\n" + r.csv_rows());
  for (const auto& h : r.horizons) out << "H=" << h.horizon << " MSE " << h.mse << " MAE " << h.mae << '\n';
  return kOk;
}

int cmd_zeroshot(const std::string& run_flag, const std::string& target, const std::string& out_flag,
                 std::ostream& out, std::ostream& err) {
  const fs::path run(run_flag);
  LoadedRun lr = load_run(run, {}, err);
  const data::DatasetDescriptor desc = data::load_descriptor(target);
  std::ostringstream rows;
  rows << evaluation::MetricsReport::csv_header() << '\n';
  for (const auto& m : lr.models) {
    const data::Splits ts = data::load_splits(desc, desc.L, desc.H);
    evaluation::MetricsReport r = evaluation::zero_shot_eval(*m, ts.test, desc.L, desc.H,
                                                             lr.prepared.rc.dataset.name, desc.name, desc.stride);
    r.variant = evaluation::variant_id(lr.prepared.rc.variant);
    r.seed = lr.prepared.rc.seed.value_or(0);
    rows << r.csv_rows();
    for (const auto& h : r.horizons) {
      out << r.transfer << " H=" << h.horizon << " MSE " << h.mse << " MAE " << h.mae << '\n';
    }
  }
  const fs::path dest = out_flag.empty() ? run / ("zeroshot_" + desc.name + ".csv") : fs::path(out_flag);
  write_text(dest, rows.str());
  return kOk;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               std::uint64_t seed, const std::string& seeds_flag, const std::string& variants_flag,
               const std::string& out_flag, std::ostream& out, std::ostream& err) {
  std::vector<std::string> merged = overrides;
  merged.push_back("seed=" + std::to_string(seed));
  Prepared p = prepare(config::load_run_config(config_path, merged), err);
  std::vector<std::uint64_t> seeds;
  if (seeds_flag.empty()) {
    seeds = {seed, seed + 1, seed + 2};
  } else {
    std::stringstream ss(seeds_flag);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        seeds.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw ValidationError("--seeds: '" + item + "' is not an unsigned integer");
      }
    }
  }
  const auto variants = evaluation::parse_variant_list(variants_flag);
  const fs::path run = run_directory(p.rc, out_flag, seed, "-ablation");
  fs::create_directories(run);
  json snapshot = p.rc.document;
  snapshot["ablation"] = {{"seeds", seeds}, {"variants", json::array()}};
  for (auto v : variants) snapshot["ablation"]["variants"].push_back(evaluation::variant_id(v));
  write_text(run / "config.json", snapshot.dump(2) + "\n");

  std::ofstream cells_csv(run / "ablation.csv");
  cells_csv << evaluation::MetricsReport::csv_header() << ",status\n";
  const auto cells = evaluation::run_ablation(
      setup_for(p), p.rc.horizons, variants, seeds, fs::path(TSALIGN_DATA_DIR) / "anchors",
      [&](const evaluation::AblationCell& c) {
        err << evaluation::variant_id(c.variant) << " seed=" << c.seed << ": "
            << (c.ok ? "ok" : "failed: " + c.error) << '\n';
        if (c.ok) {
          std::string rows = c.report.csv_rows();
          std::stringstream ss(rows);
          std::string line;
          while (std::getline(ss, line)) cells_csv << line << ",ok\n";
        } else {
          cells_csv << c.report.dataset << ',' << c.report.variant << ",," << c.seed << ",,,,,"
                    << c.report.anchor_hash << ",,\"failed: " << c.error << "\"\n";
        }
        cells_csv.flush();
      });
  const auto rows = evaluation::summarize_ablation(cells, variants, p.rc.horizons);
  write_text(run / "ablation_summary.csv", evaluation::ablation_summary_csv(rows, p.rc.horizons));
  int failures = 0;
  for (const auto& c : cells) failures += c.ok ? 0 : 1;
  out << "ablation: " << cells.size() << " runs, " << failures << " failed; summary in "
      << (run / "ablation_summary.csv").string() << '\n';
  return kOk;
}

int cmd_decompose(const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& split, int window, int channel, const std::string& out_flag,
                  std::ostream& out, std::ostream& err) {
  Prepared p = prepare(config::load_run_config(config_path, overrides), err);
  const data::RawDataset* ds = split == "train" ? &p.splits.train
                               : split == "val" ? &p.splits.val
                               : split == "test" ? &p.splits.test
                                                 : nullptr;
  if (ds == nullptr) throw ValidationError("--split must be train, val, or test");
  const int L = p.rc.model.L;
  if (channel < 0 || channel >= ds->channels()) throw ValidationError("--channel out of range");
  if (window < 0 || window + L > ds->length()) {
    throw ValidationError("--window " + std::to_string(window) + " does not fit a length-" +
                          std::to_string(L) + " window in split '" + split + "'");
  }
  Series x(static_cast<std::size_t>(L));
  for (int t = 0; t < L; ++t) x[static_cast<std::size_t>(t)] = ds->values(window + t, channel);
  const auto parts = decompose::additive_decompose(x, p.rc.model.decomp);
  std::ostringstream os;
  os << "index,input,trend,seasonal,residual\n";
  os.precision(17);
  for (int t = 0; t < L; ++t) {
    const auto i = static_cast<std::size_t>(t);
    os << window + t << ',' << x[i] << ',' << parts.trend[i] << ',' << parts.seasonal[i] << ','
       << parts.residual[i] << '\n';
  }
  if (out_flag.empty()) {
    out << os.str();
  } else {
    write_text(out_flag, os.str());
    out << "wrote " << out_flag << '\n';
  }
  return kOk;
}

int cmd_explain(const std::string& run_flag, int horizon, int window, int channel, bool per_head,
                const std::string& out_flag, std::ostream& out, std::ostream& err) {
  const fs::path run(run_flag);
  LoadedRun lr = load_run(run, {}, err);
  const Model* model = nullptr;
  for (const auto& m : lr.models) {
    if (horizon == 0 || m->config().H == horizon) {
      model = m.get();
      break;
    }
  }
  if (model == nullptr) throw ValidationError("run has no model for H=" + std::to_string(horizon));
  const int H = model->config().H;
  const auto windows = data::make_windows(lr.prepared.splits.test, model->config().L, H, lr.prepared.rc.dataset.stride);
  if (window < 0 || window >= static_cast<int>(windows.size())) {
    throw ValidationError("--window must lie in [0, " + std::to_string(windows.size()) + ")");
  }
  const Matrix& hist = windows[static_cast<std::size_t>(window)].history;
  if (channel < 0 || channel >= hist.rows()) throw ValidationError("--channel out of range");
  Series x(hist.row(channel).begin(), hist.row(channel).end());
  const fs::path dest = out_flag.empty()
                            ? run / ("attention_H" + std::to_string(H) + "_w" + std::to_string(window) +
                                     "_c" + std::to_string(channel) + ".csv")
                            : fs::path(out_flag);
  const auto map = evaluation::export_attention_map(*model, x, dest, per_head, channel);
  out << "wrote " << dest.string() << " (" << map.weights.rows() << " patches x " << map.weights.cols()
      << " anchors)\n";
  return kOk;
}

int cmd_gradcheck(const std::string& config_path, const std::vector<std::string>& overrides,
                  std::uint64_t seed, double epsilon, int sample, double threshold, std::ostream& out,
                  std::ostream& err) {
  Prepared p = prepare(config::load_run_config(config_path, overrides), err);
  const auto windows = data::make_windows(p.splits.train, p.rc.model.L, p.rc.model.H, p.rc.dataset.stride);
  Model model(p.rc.model, p.backbone, seed);
  const auto r = training::finite_difference_check(model, windows.front(), epsilon, sample, seed);
  json j = {{"epsilon", epsilon},
            {"sampled", r.sampled},
            {"max_relative_deviation", r.max_relative_deviation},
            {"threshold", threshold},
            {"passed", r.max_relative_deviation < threshold}};
  out << j.dump(2) << '\n';
  return r.max_relative_deviation < threshold ? kOk : kRuntimeFailure;
}

int cmd_synth(const std::string& out_dir, const std::string& name, int rows, int channels, int period,
              double noise, std::uint64_t seed, double phase, int L, int H, std::ostream& out) {
  if (rows < 1 || channels < 1 || period < 1) throw ValidationError("rows, channels, and period must be >= 1");
  data::RawDataset ds = data::synthetic_dataset(rows, channels, period, noise, seed, phase);
  ds.name = name;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  data::write_csv(ds, dir / (name + ".csv"));
  const json desc = {{"name", name}, {"path", name + ".csv"}, {"L", L},      {"H", H},
                     {"period", period}, {"stride", 1},     {"context", "synthetic line plus daily sine"}};
  write_text(dir / (name + ".json"), desc.dump(2) + "\n");
  out << "wrote " << (dir / (name + ".csv")).string() << " and " << (dir / (name + ".json")).string() << '\n';
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-level text alignment forecasting with a frozen language backbone", "tsalign"};
  app.require_subcommand(1);

  std::string config_path, run_dir, out_flag, target, seeds_flag, variants_flag = "all", split = "test";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int window = 0, channel = 0, horizon = 0, sample = 32;
  double epsilon = 1e-4, threshold = 1e-3;
  bool per_head = false;
  std::string synth_name = "synthetic";
  int rows = 2000, channels = 2, period = 24, synth_L = 96, synth_H = 24;
  double noise = 0.05, phase = 0.0;

  auto add_config = [&](CLI::App* c) {
    c->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    c->add_option("--set", overrides, "Override a config field, e.g. --set model.patch_len=8");
  };

  auto* train = app.add_subcommand("train", "Train one model per horizon and score the test split");
  add_config(train);
  train->add_option("--seed", seed, "Seed for initialization and shuffling")->required();
  train->add_option("-o,--out", out_flag, "Run directory");

  auto* eval = app.add_subcommand("eval", "Re-score a trained run on its test split");
  eval->add_option("--run", run_dir, "Run directory written by train")->required();
  eval->add_option("--set", overrides, "Override a config field");
  eval->add_option("-o,--out", out_flag, "Metrics file");

  auto* zeroshot = app.add_subcommand("zeroshot", "Score a trained run on another dataset without updates");
  zeroshot->add_option("--run", run_dir, "Run directory written by train")->required();
  zeroshot->add_option("--target", target, "Target dataset descriptor")->required();
  zeroshot->add_option("-o,--out", out_flag, "Metrics file");

  auto* ablate = app.add_subcommand("ablate", "Train and score the ablation grid");
  add_config(ablate);
  ablate->add_option("--seed", seed, "Base seed")->required();
  ablate->add_option("--seeds", seeds_flag, "Comma-separated seeds (default: seed, seed+1, seed+2)");
  ablate->add_option("--variants", variants_flag, "'all' or comma-separated variant ids");
  ablate->add_option("-o,--out", out_flag, "Run directory");

  auto* decomp = app.add_subcommand("decompose", "Write the decomposition of one window");
  add_config(decomp);
  decomp->add_option("--split", split, "train, val, or test");
  decomp->add_option("--window", window, "Start row within the split");
  decomp->add_option("--channel", channel, "Channel index");
  decomp->add_option("-o,--out", out_flag, "Output CSV (default: stdout)");

  auto* explain = app.add_subcommand("explain", "Export trend-to-anchor attention for a test window");
  explain->add_option("--run", run_dir, "Run directory written by train")->required();
  explain->add_option("--horizon", horizon, "Horizon model to use (default: first)");
  explain->add_option("--window", window, "Test window index");
  explain->add_option("--channel", channel, "Channel index");
  explain->add_flag("--per-head", per_head, "Also write per-head weights");
  explain->add_option("-o,--out", out_flag, "Output CSV");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  add_config(gradcheck);
  gradcheck->add_option("--seed", seed, "Model and sampling seed");
  gradcheck->add_option("--epsilon", epsilon, "Finite-difference step");
  gradcheck->add_option("--sample", sample, "Number of sampled trainable scalars");
  gradcheck->add_option("--threshold", threshold, "Maximum accepted relative deviation");

  auto* synth = app.add_subcommand("synth", "Write a synthetic line-plus-sine dataset and descriptor");
  synth->add_option("-o,--out", out_flag, "Output directory")->required();
  synth->add_option("--name", synth_name, "Dataset name");
  synth->add_option("--rows", rows, "Rows");
  synth->add_option("--channels", channels, "Channels");
  synth->add_option("--period", period, "Sine period");
  synth->add_option("--noise", noise, "Gaussian noise standard deviation");
  synth->add_option("--seed", seed, "Noise seed");
  synth->add_option("--phase", phase, "Phase shift in radians");
  synth->add_option("--L", synth_L, "Lookback written to the descriptor");
  synth->add_option("--H", synth_H, "Horizon written to the descriptor");

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    bool known = false;
    for (const CLI::App* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
    if (!known) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return kValidationError;
    }
  }

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("tsalign");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationError;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, overrides, seed, out_flag, out, err);
    if (eval->parsed()) return cmd_eval(run_dir, overrides, out_flag, out, err);
    if (zeroshot->parsed()) return cmd_zeroshot(run_dir, target, out_flag, out, err);
    if (ablate->parsed()) {
      return cmd_ablate(config_path, overrides, seed, seeds_flag, variants_flag, out_flag, out, err);
    }
    if (decomp->parsed()) return cmd_decompose(config_path, overrides, split, window, channel, out_flag, out, err);
    if (explain->parsed()) return cmd_explain(run_dir, horizon, window, channel, per_head, out_flag, out, err);
    if (gradcheck->parsed()) {
      return cmd_gradcheck(config_path, overrides, seed, epsilon, sample, threshold, out, err);
    }
    if (synth->parsed()) {
      return cmd_synth(out_flag, synth_name, rows, channels, period, noise, seed, phase, synth_L, synth_H, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  err << app.help();
  return kValidationError;
}

}  // namespace tsalign::cli
