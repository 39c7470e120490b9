#include <algorithm>
#include <cmath>
#include <set>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/evaluation.hpp"

using namespace tsalign;
using namespace tsalign::evaluation;

namespace {

std::vector<data::WindowPair> sample_windows() {
  return data::make_windows(data::synthetic_dataset(80, 2, 12, 0.1, 5), 48, 8, 4);
}

ExperimentSetup tiny_setup() {
  ExperimentSetup s;
  s.dataset_name = "syn";
  s.model = fixtures::tiny_model_config();
  s.train.max_steps = 2;
  s.train.max_epochs = 1;
  s.train.batch_size = 4;
  s.train.val_limit = 4;
  s.backbone = fixtures::tiny_backbone();
  s.splits = data::split_dataset(data::synthetic_dataset(400, 1, 12, 0.05, 2), data::SplitSpec{});
  s.window_stride = 8;
  return s;
}

}  // namespace

TEST(EvaluateWindows, PerfectPredictorScoresZero) {
  const auto w = sample_windows();
  std::size_t i = 0;
  Forecaster oracle = [&](const Matrix&) { return w[i++].target; };
  const HorizonMetrics m = evaluate_windows(oracle, w);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.windows, static_cast<int>(w.size()));
}

TEST(EvaluateWindows, MeanStubMatchesHandComputation) {
  data::WindowPair p;
  p.history = Matrix(1, 4);
  p.history << 1, 2, 3, 6;  // mean 3
  p.target = Matrix(1, 2);
  p.target << 5, 1;
  const HorizonMetrics m = evaluate_windows(history_mean_forecaster(2), {p});
  EXPECT_DOUBLE_EQ(m.mse, 4.0);
  EXPECT_DOUBLE_EQ(m.mae, 2.0);
}

TEST(EvaluateWindows, ConstantHistoryStubGivesTargetVariance) {
  // With history equal to the target mean, the mean forecaster's MSE is the
  // population variance of the target.
  data::WindowPair p;
  p.history = Matrix::Constant(1, 3, 2.5);
  p.target = Matrix(1, 4);
  p.target << 1, 2, 3, 4;
  EXPECT_DOUBLE_EQ(evaluate_windows(history_mean_forecaster(4), {p}).mse, 1.25);
}

TEST(EvaluateWindows, EmptyTestSet) {
  try {
    evaluate_windows(history_mean_forecaster(2), {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty test set"), std::string::npos);
  }
}

TEST(MetricsReport, CsvLayout) {
  MetricsReport r;
  r.dataset = "syn";
  r.horizons = {HorizonMetrics{8, 0.5, 0.25, 3}};
  EXPECT_EQ(MetricsReport::csv_header(), "dataset,variant,horizon,seed,mse,mae,windows,runtime_s,anchor_hash,transfer");
  EXPECT_EQ(r.csv_rows().rfind("syn,default,8,0,", 0), 0u);
  EXPECT_EQ(r.at(8).windows, 3);
  EXPECT_THROW(r.at(9), ValidationError);
}

TEST(Variants, NineDistinctIds) {
  const auto& v = all_variants();
  ASSERT_EQ(v.size(), 9u);
  std::set<std::string> ids;
  for (Variant x : v) {
    ids.insert(variant_id(x));
    EXPECT_EQ(parse_variant(variant_id(x)), x);
  }
  EXPECT_EQ(ids.size(), 9u);
  EXPECT_EQ(parse_variant("A1"), Variant::A1_no_alignment);
  EXPECT_EQ(parse_variant_list("all").size(), 9u);
  EXPECT_EQ(parse_variant_list("B1,D2").size(), 2u);
  EXPECT_THROW(parse_variant("Z9"), ValidationError);
}

TEST(Variants, ConfigDeltas) {
  const ModelConfig base = fixtures::tiny_model_config();
  ModelConfig a1 = base;
  apply_variant(a1, Variant::A1_no_alignment);
  EXPECT_FALSE(a1.any_alignment());

  ModelConfig b2 = base;
  apply_variant(b2, Variant::B2_seasonal_only);
  EXPECT_EQ(b2.align, (std::array<bool, 3>{false, true, false}));

  ModelConfig c2 = base;
  apply_variant(c2, Variant::C2_synonymous_anchors);
  EXPECT_EQ(c2.anchor_words, alignment::synonym_anchor_words());
  EXPECT_EQ(c2.align, base.align);

  ModelConfig d1 = base;
  apply_variant(d1, Variant::D1_no_instruction);
  EXPECT_FALSE(d1.prompt.include_instruction);
  EXPECT_TRUE(d1.prompt.include_stats);

  ModelConfig d2 = base;
  apply_variant(d2, Variant::D2_no_domain_features);
  EXPECT_FALSE(d2.prompt.include_stats);
}

TEST(Variants, NoiseAnchorsFromDirectory) {
  const auto dir = fixtures::temp_dir("anchors");
  std::ofstream(dir / "noise.txt") << "alpha\nbeta\n";
  ModelConfig c = fixtures::tiny_model_config();
  apply_variant(c, Variant::C1_noise_anchors, dir);
  EXPECT_EQ(c.anchor_words, (std::vector<std::string>{"alpha", "beta"}));
}

TEST(Variants, SynonymsChangeOnlyAnchorHash) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c2 = fixtures::tiny_model_config();
  apply_variant(c2, Variant::C2_synonymous_anchors);
  const Model a(fixtures::tiny_model_config(), bb, 1);
  const Model b(c2, bb, 1);
  EXPECT_NE(a.anchor_hash(), b.anchor_hash());
  EXPECT_EQ(a.trainable_fingerprint(), b.trainable_fingerprint());
}

TEST(Variants, NoAlignmentPartition) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  apply_variant(c, Variant::A1_no_alignment);
  Model m(c, bb, 1);
  for (const Parameter* p : m.partition().trainable) {
    EXPECT_TRUE(p->name.rfind("embed.", 0) == 0 || p->name.rfind("head.", 0) == 0) << p->name;
  }
}

TEST(ZeroShot, SameDatasetMatchesDirectEvaluation) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  const auto test = data::synthetic_dataset(120, 1, 12, 0.05, 9);
  const MetricsReport z = zero_shot_eval(m, test, 48, 8, "A", "A", 4);
  const HorizonMetrics direct = evaluate_windows(model_forecaster(m), data::make_windows(test, 48, 8, 4));
  EXPECT_EQ(z.at(8).mse, direct.mse);
  EXPECT_EQ(z.transfer, "A->A");
  EXPECT_THROW(zero_shot_eval(m, test, 48, 16, "A", "B", 4), ValidationError);
  EXPECT_THROW(zero_shot_eval(m, test, 40, 8, "A", "B", 4), ValidationError);
}

TEST(AttentionExport, ZeroQueryWeightsGiveUniformRows) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  for (Parameter* p : m.trainable()) {
    if (p->name == "align.trend.wq") p->value.setZero();
  }
  const auto dir = fixtures::temp_dir("attn");
  const Series x(48, 1.0);
  const AttentionMap map = export_attention_map(m, x, dir / "map.csv", true);
  EXPECT_EQ(map.weights.rows(), preprocess::patch_count(48, 16, 16));
  ASSERT_EQ(map.weights.cols(), 12);
  for (Eigen::Index r = 0; r < map.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < 12; ++c) EXPECT_NEAR(map.weights(r, c), 1.0 / 12.0, 1e-15);
  }
  std::ifstream in(dir / "map.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("patch,increase,decrease,", 0), 0u) << header;
  EXPECT_TRUE(std::filesystem::exists(dir / "map.csv.heads.csv"));
}

TEST(Experiment, TrainForHorizonAndAblationSummary) {
  const ExperimentSetup s = tiny_setup();
  const HorizonRun run = train_for_horizon(s, 8, 1);
  EXPECT_EQ(run.report.total_steps, 2);
  EXPECT_GT(run.test.windows, 0);

  const std::vector<Variant> variants = {Variant::default_, Variant::A1_no_alignment};
  const auto cells = run_ablation(s, {8}, variants, {1, 2});
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& c : cells) EXPECT_TRUE(c.ok) << c.error;
  const auto rows = summarize_ablation(cells, variants, {8});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].runs, 2);
  EXPECT_GE(rows[0].mse_std[0], 0.0);
  const std::string csv = ablation_summary_csv(rows, {8});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.rfind("variant,runs,failures,anchor_hash,mse_8_mean", 0), 0u);
}
