#include "tsalign/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tsalign::evaluation {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<data::WindowPair> windows_for(const data::RawDataset& ds, int L, int H, int stride) {
  if (ds.length() < L + H) return {};
  return data::make_windows(ds, L, H, stride);
}

std::vector<std::string> anchor_list(const std::filesystem::path& dir, const char* file,
                                     const std::vector<std::string>& fallback) {
  if (!dir.empty() && std::filesystem::exists(dir / file)) return alignment::read_word_list(dir / file);
  return fallback;
}

}  // namespace

const HorizonMetrics& MetricsReport::at(int horizon) const {
  for (const auto& h : horizons) {
    if (h.horizon == horizon) return h;
  }
  throw ValidationError("no metrics for horizon " + std::to_string(horizon));
}

std::string MetricsReport::csv_header() {
  return "dataset,variant,horizon,seed,mse,mae,windows,runtime_s,anchor_hash,transfer";
}

std::string MetricsReport::csv_rows() const {
  std::ostringstream os;
  for (const auto& h : horizons) {
    os << dataset << ',' << variant << ',' << h.horizon << ',' << seed << ',' << fmt(h.mse) << ','
       << fmt(h.mae) << ',' << h.windows << ',' << fmt(runtime_seconds) << ',' << anchor_hash << ','
       << transfer << '\n';
  }
  return os.str();
}

HorizonMetrics evaluate_windows(const Forecaster& f, const std::vector<data::WindowPair>& windows) {
  if (windows.empty()) throw ValidationError("empty test set");
  HorizonMetrics m;
  m.horizon = static_cast<int>(windows.front().target.cols());
  for (const auto& w : windows) {
    const Matrix pred = f(w.history);
    m.mse += training::mse_loss(pred, w.target);
    m.mae += training::mae_metric(pred, w.target);
  }
  m.windows = static_cast<int>(windows.size());
  m.mse /= m.windows;
  m.mae /= m.windows;
  return m;
}

Forecaster history_mean_forecaster(int horizon) {
  return [horizon](const Matrix& history) {
    Matrix out(history.rows(), horizon);
    for (Eigen::Index r = 0; r < history.rows(); ++r) out.row(r).setConstant(history.row(r).mean());
    return out;
  };
}

Forecaster model_forecaster(const Model& model) {
  return [&model](const Matrix& history) { return model.predict(history).combined; };
}

MetricsReport evaluate(const std::vector<const Model*>& models, const data::RawDataset& test,
                       int stride) {
  if (models.empty()) throw ValidationError("evaluate: no models");
  const auto t0 = std::chrono::steady_clock::now();
  MetricsReport r;
  r.dataset = test.name;
  for (const Model* m : models) {
    const auto& cfg = m->config();
    const auto windows = windows_for(test, cfg.L, cfg.H, stride);
    if (windows.empty()) {
      throw ValidationError("empty test set: '" + test.name + "' has " + std::to_string(test.length()) +
                            " rows, L+H=" + std::to_string(cfg.L + cfg.H));
    }
    r.horizons.push_back(evaluate_windows(model_forecaster(*m), windows));
    r.anchor_hash = m->anchor_hash();
  }
  r.runtime_seconds = seconds_since(t0);
  return r;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {
      Variant::default_,         Variant::A1_no_alignment,      Variant::B1_trend_only,
      Variant::B2_seasonal_only, Variant::B3_residual_only,     Variant::C1_noise_anchors,
      Variant::C2_synonymous_anchors, Variant::D1_no_instruction, Variant::D2_no_domain_features};
  return v;
}

std::string variant_id(Variant v) {
  switch (v) {
    case Variant::default_: return "default";
    case Variant::A1_no_alignment: return "A1_no_alignment";
    case Variant::B1_trend_only: return "B1_trend_only";
    case Variant::B2_seasonal_only: return "B2_seasonal_only";
    case Variant::B3_residual_only: return "B3_residual_only";
    case Variant::C1_noise_anchors: return "C1_noise_anchors";
    case Variant::C2_synonymous_anchors: return "C2_synonymous_anchors";
    case Variant::D1_no_instruction: return "D1_no_instruction";
    case Variant::D2_no_domain_features: return "D2_no_domain_features";
  }
  return "?";
}

Variant parse_variant(const std::string& id) {
  for (Variant v : all_variants()) {
    const std::string full = variant_id(v);
    if (id == full || id == full.substr(0, full.find('_'))) return v;
  }
  throw ValidationError("unknown variant '" + id + "'");
}

std::vector<Variant> parse_variant_list(const std::string& spec) {
  if (spec == "all") return all_variants();
  std::vector<Variant> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_variant(item));
  }
  if (out.empty()) throw ValidationError("empty variant list");
  return out;
}

void apply_variant(ModelConfig& cfg, Variant v, const std::filesystem::path& anchor_dir) {
  switch (v) {
    case Variant::default_: break;
    case Variant::A1_no_alignment: cfg.align = {false, false, false}; break;
    case Variant::B1_trend_only: cfg.align = {true, false, false}; break;
    case Variant::B2_seasonal_only: cfg.align = {false, true, false}; break;
    case Variant::B3_residual_only: cfg.align = {false, false, true}; break;
    case Variant::C1_noise_anchors:
      cfg.anchor_words = anchor_list(anchor_dir, "noise.txt", alignment::noise_anchor_words());
      break;
    case Variant::C2_synonymous_anchors:
      cfg.anchor_words = anchor_list(anchor_dir, "synonyms.txt", alignment::synonym_anchor_words());
      break;
    case Variant::D1_no_instruction: cfg.prompt.include_instruction = false; break;
    case Variant::D2_no_domain_features: cfg.prompt.include_stats = false; break;
  }
}

HorizonRun train_for_horizon(const ExperimentSetup& setup, int horizon, std::uint64_t seed) {
  ModelConfig mc = setup.model;
  mc.H = horizon;
  const int L = mc.L;
  auto train_w = windows_for(setup.splits.train, L, horizon, setup.window_stride);
  if (setup.few_shot_ratio) train_w = data::subsample_fewshot(train_w, *setup.few_shot_ratio);
  const auto val_w = windows_for(setup.splits.val, L, horizon, setup.window_stride);
  const auto test_w = windows_for(setup.splits.test, L, horizon, setup.window_stride);
  if (train_w.empty()) throw ValidationError("no training windows for L+H=" + std::to_string(L + horizon));
  if (test_w.empty()) throw ValidationError("empty test set for L+H=" + std::to_string(L + horizon));

  HorizonRun run;
  run.model = std::make_unique<Model>(mc, setup.backbone, seed);
  training::TrainConfig tc = setup.train;
  tc.seed = seed;
  run.report = training::train(*run.model, train_w, val_w, tc);
  if (run.report.diverged) throw Error("training diverged: " + run.report.message);
  run.test = evaluate_windows(model_forecaster(*run.model), test_w);
  return run;
}

std::vector<AblationCell> run_ablation(const ExperimentSetup& base, const std::vector<int>& horizons,
                                       const std::vector<Variant>& variants,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::filesystem::path& anchor_dir,
                                       const std::function<void(const AblationCell&)>& on_cell) {
  if (horizons.empty()) throw ValidationError("ablation needs at least one horizon");
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  std::vector<AblationCell> cells;
  for (Variant v : variants) {
    ExperimentSetup setup = base;
    apply_variant(setup.model, v, anchor_dir);
    for (std::uint64_t seed : seeds) {
      AblationCell cell;
      cell.variant = v;
      cell.seed = seed;
      cell.report.dataset = base.dataset_name;
      cell.report.variant = variant_id(v);
      cell.report.seed = seed;
      cell.report.anchor_hash = alignment::word_list_hash(setup.model.anchor_words);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        for (int h : horizons) cell.report.horizons.push_back(train_for_horizon(setup, h, seed).test);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cell.report.runtime_seconds = seconds_since(t0);
      if (on_cell) on_cell(cell);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<AblationSummaryRow> summarize_ablation(const std::vector<AblationCell>& cells,
                                                   const std::vector<Variant>& variants,
                                                   const std::vector<int>& horizons) {
  std::vector<AblationSummaryRow> rows;
  for (Variant v : variants) {
    AblationSummaryRow row;
    row.variant = v;
    const std::size_t nh = horizons.size();
    row.mse_mean.assign(nh, 0.0);
    row.mse_std.assign(nh, 0.0);
    row.mae_mean.assign(nh, 0.0);
    row.mae_std.assign(nh, 0.0);
    std::vector<std::vector<double>> mse(nh), mae(nh);
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      ++row.runs;
      row.anchor_hash = c.report.anchor_hash;
      if (!c.ok) {
        ++row.failures;
        continue;
      }
      for (std::size_t i = 0; i < nh; ++i) {
        const auto& m = c.report.at(horizons[i]);
        mse[i].push_back(m.mse);
        mae[i].push_back(m.mae);
      }
    }
    auto moments = [](const std::vector<double>& xs, double& mean, double& sd) {
      if (xs.empty()) {
        mean = sd = std::nan("");
        return;
      }
      mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      sd = std::sqrt(var / static_cast<double>(xs.size()));
    };
    for (std::size_t i = 0; i < nh; ++i) {
      moments(mse[i], row.mse_mean[i], row.mse_std[i]);
      moments(mae[i], row.mae_mean[i], row.mae_std[i]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_summary_csv(const std::vector<AblationSummaryRow>& rows,
                                 const std::vector<int>& horizons) {
  std::ostringstream os;
  os << "variant,runs,failures,anchor_hash";
  for (int h : horizons) {
    os << ",mse_" << h << "_mean,mse_" << h << "_std,mae_" << h << "_mean,mae_" << h << "_std";
  }
  os << '\n';
  for (const auto& r : rows) {
    os << variant_id(r.variant) << ',' << r.runs << ',' << r.failures << ',' << r.anchor_hash;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      os << ',' << fmt(r.mse_mean[i]) << ',' << fmt(r.mse_std[i]) << ',' << fmt(r.mae_mean[i]) << ','
         << fmt(r.mae_std[i]);
    }
    os << '\n';
  }
  return os.str();
}

MetricsReport zero_shot_eval(const Model& model, const data::RawDataset& target_test, int L, int H,
                             const std::string& source_name, const std::string& target_name,
                             int stride) {
  if (L != model.config().L || H != model.config().H) {
    throw ValidationError("zero-shot target expects L=" + std::to_string(L) + ", H=" +
                          std::to_string(H) + " but the model was trained with L=" +
                          std::to_string(model.config().L) + ", H=" + std::to_string(model.config().H));
  }
  const std::string trainable_before = model.trainable_fingerprint();
  const std::string frozen_before = model.frozen_fingerprint();
  MetricsReport r = evaluate({&model}, target_test, stride);
  if (model.trainable_fingerprint() != trainable_before || model.frozen_fingerprint() != frozen_before) {
    throw Error("zero-shot evaluation modified model tensors");
  }
  r.dataset = target_name;
  r.transfer = source_name + "->" + target_name;
  return r;
}

std::string AttentionMap::to_csv() const {
  std::ostringstream os;
  os << "patch";
  for (const auto& a : anchors) os << ',' << a;
  os << '\n';
  for (Eigen::Index k = 0; k < weights.rows(); ++k) {
    os << first_patch + k;
    for (Eigen::Index a = 0; a < weights.cols(); ++a) os << ',' << fmt(weights(k, a));
    os << '\n';
  }
  return os.str();
}

AttentionMap export_attention_map(const Model& model, std::span<const double> series,
                                  const std::filesystem::path& path, bool per_head, int channel) {
  if (model.anchors() == nullptr) throw ValidationError("no alignment to export");
  AttentionMap map;
  map.per_head = model.trend_attention(series, channel);
  map.anchors = model.anchors()->words;
  map.weights = Matrix::Zero(map.per_head.front().rows(), map.per_head.front().cols());
  for (const Matrix& h : map.per_head) map.weights += h;
  map.weights /= static_cast<double>(map.per_head.size());
  map.first_patch = 0;
  map.last_patch = static_cast<int>(map.weights.rows()) - 1;

  if (!path.empty()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << map.to_csv();
    if (per_head) {
      std::ofstream heads(path.string() + ".heads.csv");
      heads << "head,patch";
      for (const auto& a : map.anchors) heads << ',' << a;
      heads << '\n';
      for (std::size_t h = 0; h < map.per_head.size(); ++h) {
        for (Eigen::Index k = 0; k < map.per_head[h].rows(); ++k) {
          heads << h << ',' << k;
          for (Eigen::Index a = 0; a < map.per_head[h].cols(); ++a) heads << ',' << fmt(map.per_head[h](k, a));
          heads << '\n';
        }
      }
    }
  }
  return map;
}

}  // namespace tsalign::evaluation
