#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/model.hpp"

using namespace tsalign;
using alignment::Component;

namespace {

Matrix sine_window(int channels, int L, double phase = 0.0) {
  Matrix w(channels, L);
  for (int c = 0; c < channels; ++c) {
    for (int t = 0; t < L; ++t) w(c, t) = std::sin(0.5 * t + phase + c) + 0.05 * t * (c + 1);
  }
  return w;
}

}  // namespace

TEST(ModelConfig, PatchCountAndPrototypes) {
  ModelConfig c;
  EXPECT_EQ(c.patch_count(), 64);
  EXPECT_EQ(c.prototypes(Component::seasonal, 50257), 100);
  EXPECT_EQ(c.prototypes(Component::residual, 50257), 500);
  EXPECT_EQ(c.prototypes(Component::seasonal, 256), 32);
  EXPECT_EQ(c.prototypes(Component::residual, 256), 64);
  EXPECT_EQ(c.prototypes(Component::seasonal, 64), 13);
  EXPECT_EQ(c.prototypes(Component::residual, 64), 16);
  c.proto_seasonal = 5;
  EXPECT_EQ(c.prototypes(Component::seasonal, 64), 5);
}

TEST(ModelConfig, ValidationCollectsEveryError) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  EXPECT_TRUE(c.validate(*bb).empty());
  c.stride = 20;
  c.align_heads = 3;
  c.proto_seasonal = 40;
  c.proto_residual = 30;
  const auto errors = c.validate(*bb);
  EXPECT_EQ(errors.size(), 3u);
  EXPECT_THROW(Model(c, bb, 1), ValidationError);
}

TEST(ModelConfig, SequenceMustFitBackbone) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  c.max_prompt_tokens = 125;
  EXPECT_FALSE(c.validate(*bb).empty());
}

TEST(Model, ConstantInputSmoke) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  const Forecast f = m.predict(Matrix::Constant(1, 48, 3.0));
  ASSERT_EQ(f.combined.rows(), 1);
  ASSERT_EQ(f.combined.cols(), 8);
  EXPECT_TRUE(f.combined.allFinite());
}

TEST(Model, CombinedIsExactSumOfComponents) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  const Forecast f = m.predict(sine_window(2, 48));
  for (Eigen::Index c = 0; c < 2; ++c) {
    for (Eigen::Index h = 0; h < 8; ++h) {
      const double sum = (f.per_component[0](c, h) + f.per_component[1](c, h)) + f.per_component[2](c, h);
      EXPECT_EQ(f.combined(c, h), sum);
    }
  }
}

TEST(Model, ChannelPermutationEquivariance) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  const Matrix w = sine_window(3, 48);
  Matrix permuted(3, 48);
  permuted.row(0) = w.row(2);
  permuted.row(1) = w.row(0);
  permuted.row(2) = w.row(1);
  const Matrix a = m.predict(w).combined;
  const Matrix b = m.predict(permuted).combined;
  EXPECT_EQ(b.row(0), a.row(2));
  EXPECT_EQ(b.row(1), a.row(0));
  EXPECT_EQ(b.row(2), a.row(1));
}

TEST(Model, DeterministicForSeed) {
  const auto bb = fixtures::tiny_backbone();
  const Model a(fixtures::tiny_model_config(), bb, 4);
  const Model b(fixtures::tiny_model_config(), bb, 4);
  const Model c(fixtures::tiny_model_config(), bb, 5);
  EXPECT_EQ(a.trainable_fingerprint(), b.trainable_fingerprint());
  EXPECT_NE(a.trainable_fingerprint(), c.trainable_fingerprint());
  const Matrix w = sine_window(1, 48);
  EXPECT_EQ(a.predict(w).combined, b.predict(w).combined);
  EXPECT_EQ(a.predict(w).combined, forward_pipeline(w, a).combined);
}

TEST(Model, RejectsWrongWindowLength) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  EXPECT_THROW(m.predict(Matrix::Zero(1, 47)), ValidationError);
}

TEST(Model, TraceCapturesPipeline) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  ForwardTrace trace;
  m.predict(sine_window(2, 48), &trace);
  ASSERT_EQ(trace.channels.size(), 2u);
  const auto& ch = trace.channels[0];
  EXPECT_EQ(ch.decomposition.trend.size(), 48u);
  EXPECT_NE(ch.prompts[0].find("[trend]"), std::string::npos);
  ASSERT_EQ(ch.attention[0].size(), 4u);
  EXPECT_EQ(ch.attention[0][0].rows(), 6);
  EXPECT_EQ(ch.attention[0][0].cols(), 12);
  EXPECT_EQ(ch.attention[1][0].cols(), 13);
  EXPECT_EQ(ch.attention[2][0].cols(), 16);
}

TEST(Model, PartitionIsDisjointAndExcludesBackbone) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  const ParameterPartition p = m.partition();
  std::set<std::string> trainable;
  for (const Parameter* t : p.trainable) trainable.insert(t->name);
  EXPECT_EQ(trainable.size(), p.trainable.size());
  EXPECT_EQ(trainable.count("align.trend.wq"), 1u);
  EXPECT_EQ(trainable.count("probe.seasonal"), 1u);
  EXPECT_EQ(trainable.count("head.residual.weight"), 1u);
  for (const auto& [name, tensor] : p.frozen) EXPECT_EQ(trainable.count(name), 0u) << name;
  EXPECT_EQ(p.frozen.size(), bb->named_tensors().size() + 1);  // plus the anchor table
}

TEST(Model, WithoutAlignmentHasNoAlignmentParameters) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  c.align = {false, false, false};
  Model m(c, bb, 1);
  for (const Parameter* p : m.partition().trainable) {
    EXPECT_EQ(p->name.rfind("align.", 0), std::string::npos) << p->name;
    EXPECT_EQ(p->name.rfind("probe.", 0), std::string::npos) << p->name;
  }
  EXPECT_THROW(m.trend_attention(Series(48, 0.0)), ValidationError);
}

TEST(Model, PerChannelAlignmentKeepsSeparateWeights) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  c.per_channel_alignment = true;
  c.channels = 2;
  Model m(c, bb, 1);
  int copies = 0;
  for (const Parameter* p : m.trainable()) copies += p->name == "align.trend.c" + std::to_string(copies) + ".wq" ? 1 : 0;
  EXPECT_EQ(copies, 2);
  EXPECT_TRUE(m.predict(sine_window(2, 48)).combined.allFinite());
}

TEST(Model, CheckpointRoundTrip) {
  const auto dir = fixtures::temp_dir("model_ckpt");
  const auto bb = fixtures::tiny_backbone();
  const Model a(fixtures::tiny_model_config(), bb, 1);
  a.save(dir / "m.ckpt");
  Model b(fixtures::tiny_model_config(), bb, 2);
  b.load(dir / "m.ckpt");
  EXPECT_EQ(a.trainable_fingerprint(), b.trainable_fingerprint());
  const Matrix w = sine_window(1, 48);
  EXPECT_EQ(a.predict(w).combined, b.predict(w).combined);

  Model other(fixtures::tiny_model_config(), fixtures::tiny_backbone(4), 1);
  EXPECT_THROW(other.load(dir / "m.ckpt"), ValidationError);

  ModelConfig no_align = fixtures::tiny_model_config();
  no_align.align = {false, false, false};
  Model smaller(no_align, bb, 1);
  EXPECT_THROW(smaller.load(dir / "m.ckpt"), ValidationError);
}

TEST(Model, SoftPromptAddsTrainableRows) {
  const auto bb = fixtures::tiny_backbone();
  ModelConfig c = fixtures::tiny_model_config();
  c.soft_prompt_len = 3;
  Model m(c, bb, 1);
  int soft = 0;
  for (const Parameter* p : m.trainable()) soft += p->name.rfind("soft_prompt.", 0) == 0 ? 1 : 0;
  EXPECT_EQ(soft, 3);
  EXPECT_TRUE(m.predict(sine_window(1, 48)).combined.allFinite());
}

TEST(Model, TrendAttentionUsesNonOverlappingPatches) {
  const auto bb = fixtures::tiny_backbone();
  const Model m(fixtures::tiny_model_config(), bb, 1);
  const Matrix x = sine_window(1, 48);
  const Series series(x.data(), x.data() + 48);
  const auto w = m.trend_attention(series);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].rows(), preprocess::patch_count(48, 16, 16));
  EXPECT_EQ(w[0].cols(), 12);
}
