#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/training.hpp"

using namespace tsalign;
using namespace tsalign::training;

namespace {

std::vector<data::WindowPair> windows(int count, std::uint64_t seed = 1) {
  const auto ds = data::synthetic_dataset(48 + 8 + count - 1, 1, 12, 0.05, seed);
  return data::make_windows(ds, 48, 8, 1);
}

TrainConfig quick(int steps) {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.batch_size = 4;
  c.max_epochs = 100;
  c.max_steps = steps;
  c.patience = 100;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Metrics, HandValues) {
  Matrix pred(1, 2);
  pred << 0, 0;
  Matrix target(1, 2);
  target << 3, 4;
  EXPECT_DOUBLE_EQ(mse_loss(pred, target), 12.5);
  EXPECT_DOUBLE_EQ(mae_metric(pred, target), 3.5);
  EXPECT_EQ(mse_loss(target, target), 0.0);
  EXPECT_EQ(mae_metric(target, target), 0.0);
  EXPECT_THROW(mse_loss(pred, Matrix::Zero(2, 1)), ValidationError);
  EXPECT_THROW(mae_metric(pred, Matrix::Zero(1, 3)), ValidationError);
}

TEST(Metrics, Bounds) {
  const Matrix a = fixtures::random_matrix(4, 6, 1);
  const Matrix b = fixtures::random_matrix(4, 6, 2);
  EXPECT_GE(mse_loss(a, b), 0.0);
  EXPECT_LE(mae_metric(a, b), (a - b).cwiseAbs().maxCoeff());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_TRUE(c.validate().empty());
  c.learning_rate = -1.0;
  c.batch_size = 0;
  EXPECT_EQ(c.validate().size(), 2u);
  EXPECT_EQ(parse_optimizer("sgd"), Optimizer::sgd);
  EXPECT_THROW(parse_optimizer("rmsprop"), ValidationError);
}

TEST(Train, ZeroLearningRateChangesNothing) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  const std::string before = m.trainable_fingerprint();
  auto w = windows(1);
  TrainConfig c = quick(0);
  c.learning_rate = 0.0;
  c.optimizer = Optimizer::sgd;
  c.max_epochs = 1;
  const TrainReport r = train(m, w, w, c);
  EXPECT_EQ(m.trainable_fingerprint(), before);
  ASSERT_EQ(r.step_losses.size(), 1u);
  EXPECT_DOUBLE_EQ(r.step_losses[0], evaluate_mse(m, w));
  EXPECT_DOUBLE_EQ(r.epochs[0].val_mse, r.initial_val_mse);
}

TEST(Train, BackboneStaysFrozen) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  const std::string backbone_fp = bb->fingerprint();
  const std::string frozen_fp = m.frozen_fingerprint();
  const std::string trainable_fp = m.trainable_fingerprint();
  auto w = windows(8);
  const TrainReport r = train(m, w, w, quick(6));
  EXPECT_EQ(r.total_steps, 6);
  EXPECT_EQ(r.backbone_fingerprint_before, r.backbone_fingerprint_after);
  EXPECT_EQ(r.frozen_fingerprint_before, r.frozen_fingerprint_after);
  EXPECT_EQ(bb->fingerprint(), backbone_fp);
  EXPECT_EQ(m.frozen_fingerprint(), frozen_fp);
  EXPECT_NE(m.trainable_fingerprint(), trainable_fp);
}

TEST(Train, SeedDeterminism) {
  const auto bb = fixtures::tiny_backbone();
  auto w = windows(10);
  Model a(fixtures::tiny_model_config(), bb, 1);
  Model b(fixtures::tiny_model_config(), bb, 1);
  const TrainReport ra = train(a, w, w, quick(5));
  const TrainReport rb = train(b, w, w, quick(5));
  EXPECT_EQ(ra.step_losses, rb.step_losses);
  EXPECT_EQ(a.trainable_fingerprint(), b.trainable_fingerprint());
}

TEST(Train, BestValidationNotWorseThanInitial) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  auto w = windows(8);
  TrainConfig c = quick(0);
  c.max_epochs = 4;
  c.patience = 1;
  const TrainReport r = train(m, w, w, c);
  EXPECT_LE(r.best_val_mse, r.initial_val_mse);
  EXPECT_DOUBLE_EQ(evaluate_mse(m, w), r.best_val_mse);
  EXPECT_NE(r.to_json().find("\"best_val_mse\""), std::string::npos);
}

TEST(Train, EmptyInputsRejected) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  EXPECT_THROW(train(m, {}, windows(2), quick(1)), ValidationError);
}

TEST(Train, DivergenceStopsWithReport) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  auto w = windows(4);
  w[0].target(0, 0) = std::numeric_limits<double>::infinity();
  const TrainReport r = train(m, w, w, quick(3));
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.message.empty());
}

TEST(GradCheck, QuadraticToyHead) {
  Parameter w("w", Matrix::Constant(1, 1, 0.7));
  std::vector<Parameter*> params = {&w};
  auto loss = [&] { return 3.0 * std::pow(w.value(0, 0) - 2.0, 2); };
  auto grad = [&] { w.grad(0, 0) = 6.0 * (w.value(0, 0) - 2.0); };
  EXPECT_LT(finite_difference_check(params, loss, grad, 1e-4, 1, 1).max_relative_deviation, 1e-8);
}

TEST(GradCheck, EpsilonRange) {
  Parameter w("w", Matrix::Zero(1, 1));
  std::vector<Parameter*> params = {&w};
  auto loss = [] { return 0.0; };
  auto grad = [] {};
  EXPECT_THROW(finite_difference_check(params, loss, grad, 1e-7, 1, 1), ValidationError);
  EXPECT_THROW(finite_difference_check(params, loss, grad, 0.1, 1, 1), ValidationError);
}

TEST(GradCheck, FullPipelineAndNoBackboneSamples) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  const auto w = windows(1);
  const GradCheckResult r = finite_difference_check(m, w[0], 1e-4, 32, 7);
  EXPECT_EQ(r.sampled, 32);
  EXPECT_LT(r.max_relative_deviation, 1e-3);
  std::set<std::string> frozen;
  for (const auto& [name, t] : bb->named_tensors()) frozen.insert(name);
  for (const auto& name : r.sampled_names) {
    EXPECT_EQ(frozen.count(name.substr(0, name.find('['))), 0u) << name;
  }
}

TEST(BatchGradient, MatchesMeanOfSingles) {
  const auto bb = fixtures::tiny_backbone();
  Model m(fixtures::tiny_model_config(), bb, 1);
  const auto w = windows(2);
  const double l0 = batch_gradient(m, {&w[0]});
  const Matrix g0 = m.trainable()[0]->grad;
  const double l1 = batch_gradient(m, {&w[1]});
  const Matrix g1 = m.trainable()[0]->grad;
  const double both = batch_gradient(m, {&w[0], &w[1]});
  EXPECT_NEAR(both, 0.5 * (l0 + l1), 1e-12);
  EXPECT_LT((m.trainable()[0]->grad - 0.5 * (g0 + g1)).norm(), 1e-12);
}
