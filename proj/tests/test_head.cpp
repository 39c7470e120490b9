#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/head.hpp"

using namespace tsalign;
using namespace tsalign::head;
using alignment::Component;

TEST(SlicePatchStates, ZeroPromptIsIdentity) {
  const Matrix h = fixtures::random_matrix(4, 3, 1);
  EXPECT_EQ(slice_patch_states(h, 0), h);
}

TEST(SlicePatchStates, DropsPromptRows) {
  Matrix h(5, 2);
  for (int r = 0; r < 5; ++r) h.row(r).setConstant(r);
  const Matrix s = slice_patch_states(h, 2);
  ASSERT_EQ(s.rows(), 3);
  for (int r = 0; r < 3; ++r) EXPECT_EQ(s(r, 0), r + 2);
  EXPECT_THROW(slice_patch_states(h, 6), ValidationError);
  EXPECT_THROW(slice_patch_states(h, -1), ValidationError);
}

TEST(ProjectComponent, HandArithmetic) {
  ProjectionHead head;
  head.weight = Parameter("w", Matrix(1, 2));
  head.weight.value << 2, 0;
  head.bias = Parameter("b", Matrix(1, 2));
  head.bias.value << 0, 1;
  Matrix state(1, 1);
  state << 3;
  EXPECT_EQ(project_component(state, head), (Series{6, 1}));
}

TEST(ProjectComponent, ZeroWeightsGiveBias) {
  std::mt19937_64 rng(1);
  ProjectionHead head = make_projection_head(Component::seasonal, 3, 4, 5, rng);
  EXPECT_EQ(head.horizon(), 5);
  EXPECT_EQ(head.weight.value.rows(), 12);
  head.weight.value.setZero();
  head.bias.value = fixtures::random_matrix(1, 5, 2);
  const Series out = project_component(fixtures::random_matrix(3, 4, 3), head);
  ASSERT_EQ(out.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], head.bias.value(0, i));
  EXPECT_THROW(project_component(fixtures::random_matrix(2, 4, 3), head), ValidationError);
}

TEST(ProjectComponent, PatchMajorFlattening) {
  ProjectionHead head;
  head.weight = Parameter("w", Matrix::Zero(4, 1));
  head.weight.value(1, 0) = 1.0;  // patch 0, dimension 1
  head.bias = Parameter("b", Matrix::Zero(1, 1));
  Matrix states(2, 2);
  states << 10, 20, 30, 40;
  EXPECT_EQ(project_component(states, head), (Series{20}));
}

TEST(CombineForecast, ZeroForecastsGiveSumOfMeans) {
  const std::array<preprocess::NormStats, 3> stats = {preprocess::NormStats{1.0, 2.0, 0.0},
                                                      preprocess::NormStats{-0.5, 3.0, 0.0},
                                                      preprocess::NormStats{0.25, 1.0, 0.0}};
  const Series zero(3, 0.0);
  for (double v : combine_forecast(zero, zero, zero, stats)) EXPECT_DOUBLE_EQ(v, 0.75);
}

TEST(CombineForecast, IdentityStats) {
  const preprocess::NormStats id{0.0, 1.0, 0.0};
  const Series out = combine_forecast(Series{1, 2}, Series{0.5, -0.5}, Series{0, 0}, {id, id, id});
  EXPECT_EQ(out, (Series{1.5, 1.5}));
  const Series swapped = combine_forecast(Series{0.5, -0.5}, Series{0, 0}, Series{1, 2}, {id, id, id});
  EXPECT_EQ(swapped, out);
  EXPECT_THROW(combine_forecast(Series{1}, Series{1, 2}, Series{1, 2}, {id, id, id}), ValidationError);
}
