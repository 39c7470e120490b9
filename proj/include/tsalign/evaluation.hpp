#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsalign/data.hpp"
#include "tsalign/model.hpp"
#include "tsalign/training.hpp"

namespace tsalign::evaluation {

/// Maps a history window [N x L] to a forecast [N x H].
using Forecaster = std::function<Matrix(const Matrix&)>;

struct HorizonMetrics {
  int horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
  int windows = 0;
};

struct MetricsReport {
  std::string dataset;
  std::string variant = "default";
  std::uint64_t seed = 0;
  std::vector<HorizonMetrics> horizons;
  double runtime_seconds = 0.0;
  std::string anchor_hash;
  /// Set for zero-shot runs: "source->target".
  std::string transfer;

  const HorizonMetrics& at(int horizon) const;
  static std::string csv_header();
  /// One line per horizon, without trailing newline handling by the caller.
  std::string csv_rows() const;
};

/// Mean MSE and MAE over all windows and channels.
HorizonMetrics evaluate_windows(const Forecaster& f, const std::vector<data::WindowPair>& windows);

/// Repeats each channel's history mean over the horizon.
Forecaster history_mean_forecaster(int horizon);
Forecaster model_forecaster(const Model& model);

/// One model per horizon, each evaluated on windows of its own H from `test`.
MetricsReport evaluate(const std::vector<const Model*>& models, const data::RawDataset& test,
                       int stride = 1);

enum class Variant {
  default_,
  A1_no_alignment,
  B1_trend_only,
  B2_seasonal_only,
  B3_residual_only,
  C1_noise_anchors,
  C2_synonymous_anchors,
  D1_no_instruction,
  D2_no_domain_features,
};

const std::vector<Variant>& all_variants();
std::string variant_id(Variant v);
Variant parse_variant(const std::string& id);
/// "all" or a comma-separated id list.
std::vector<Variant> parse_variant_list(const std::string& spec);

/// Applies the variant's config delta. Anchor lists for C1/C2 are read from
/// `anchor_dir` (noise.txt, synonyms.txt) when present, else built in.
void apply_variant(ModelConfig& cfg, Variant v, const std::filesystem::path& anchor_dir = {});

/// Everything needed to train and test one configuration.
struct ExperimentSetup {
  std::string dataset_name;
  ModelConfig model;
  training::TrainConfig train;
  std::shared_ptr<const FrozenBackbone> backbone;
  data::Splits splits;
  int window_stride = 1;
  std::optional<double> few_shot_ratio;
};

struct HorizonRun {
  std::unique_ptr<Model> model;
  training::TrainReport report;
  HorizonMetrics test;
};

/// Builds a model for horizon H with `seed`, trains it, and scores the test split.
HorizonRun train_for_horizon(const ExperimentSetup& setup, int horizon, std::uint64_t seed);

struct AblationCell {
  Variant variant = Variant::default_;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport report;
};

/// Trains and tests every (variant, seed) pair. A failing cell records its
/// error and the grid continues.
std::vector<AblationCell> run_ablation(const ExperimentSetup& base, const std::vector<int>& horizons,
                                       const std::vector<Variant>& variants,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::filesystem::path& anchor_dir = {},
                                       const std::function<void(const AblationCell&)>& on_cell = {});

struct AblationSummaryRow {
  Variant variant = Variant::default_;
  int runs = 0;
  int failures = 0;
  std::string anchor_hash;
  /// Parallel to the horizon list: mean and population std over successful seeds.
  std::vector<double> mse_mean, mse_std, mae_mean, mae_std;
};

std::vector<AblationSummaryRow> summarize_ablation(const std::vector<AblationCell>& cells,
                                                   const std::vector<Variant>& variants,
                                                   const std::vector<int>& horizons);
std::string ablation_summary_csv(const std::vector<AblationSummaryRow>& rows,
                                 const std::vector<int>& horizons);

/// Scores a trained model on another dataset's test split with no updates.
/// Throws ValidationError when (L, H) differ from the model, and Error if any
/// tensor changed.
MetricsReport zero_shot_eval(const Model& model, const data::RawDataset& target_test, int L, int H,
                             const std::string& source_name, const std::string& target_name,
                             int stride = 1);

struct AttentionMap {
  Matrix weights;  // [K x A], head-averaged
  std::vector<Matrix> per_head;
  std::vector<std::string> anchors;
  int first_patch = 0;
  int last_patch = 0;

  /// Header "patch,<anchor>..." then one row per patch.
  std::string to_csv() const;
};

/// Trend attention for one channel with non-overlapping patches. Writes the
/// map to `path` when non-empty; per-head blocks go to `<path>.heads.csv`.
AttentionMap export_attention_map(const Model& model, std::span<const double> series,
                                  const std::filesystem::path& path = {}, bool per_head = false,
                                  int channel = 0);

}  // namespace tsalign::evaluation
