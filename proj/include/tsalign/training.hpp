#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsalign/data.hpp"
#include "tsalign/model.hpp"

namespace tsalign::training {

/// Mean of squared error over all N*H entries.
double mse_loss(const Matrix& pred, const Matrix& target);
double mae_metric(const Matrix& pred, const Matrix& target);

enum class Optimizer { adam, sgd };
Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer o);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 10;
  /// Hard cap on optimizer steps across all epochs (0 = no cap).
  int max_steps = 0;
  int patience = 5;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  /// Validation windows used per epoch (0 = all).
  int val_limit = 0;

  std::vector<std::string> validate() const;
};

struct EpochRecord {
  int epoch = 0;
  int steps = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  /// Mean batch loss per optimizer step, in order.
  std::vector<double> step_losses;
  double initial_val_mse = 0.0;
  double best_val_mse = 0.0;
  int best_epoch = -1;
  int total_steps = 0;
  bool early_stopped = false;
  bool diverged = false;
  std::string message;
  std::string backbone_fingerprint_before;
  std::string backbone_fingerprint_after;
  std::string frozen_fingerprint_before;
  std::string frozen_fingerprint_after;
  double seconds = 0.0;

  std::string to_json() const;
};

/// Adam or plain gradient descent over a fixed parameter list.
class OptimizerState {
 public:
  OptimizerState(std::vector<Parameter*> params, const TrainConfig& cfg);
  void step();
  const std::vector<Parameter*>& parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  Optimizer kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Loss and gradients for a batch. Gradients are zeroed first and hold the
/// batch-mean gradient afterwards. Returns the batch-mean loss.
double batch_gradient(const Model& model, const std::vector<const data::WindowPair*>& batch);

/// Mean forecast MSE over windows (combined forecast vs target).
double evaluate_mse(const Model& model, const std::vector<data::WindowPair>& windows, int limit = 0);

/// Mini-batch training with early stopping on validation MSE. The best
/// parameters seen (by validation MSE) are restored before returning.
/// Throws ValidationError for empty inputs; a non-finite loss stops training
/// and sets `diverged`.
TrainReport train(Model& model, const std::vector<data::WindowPair>& train_windows,
                  const std::vector<data::WindowPair>& val_windows, const TrainConfig& cfg);

struct GradCheckResult {
  double max_relative_deviation = 0.0;
  int sampled = 0;
  std::vector<std::string> sampled_names;
};

/// Central-difference check of analytic gradients. `loss` evaluates the
/// objective, `grad` fills Parameter::grad for the same objective.
GradCheckResult finite_difference_check(const std::vector<Parameter*>& params,
                                        const std::function<double()>& loss,
                                        const std::function<void()>& grad, double epsilon,
                                        int sample, std::uint64_t seed);

/// Same, for the forecasting MSE of one window, sampling only trainable tensors.
GradCheckResult finite_difference_check(Model& model, const data::WindowPair& window,
                                        double epsilon, int sample, std::uint64_t seed);

}  // namespace tsalign::training
