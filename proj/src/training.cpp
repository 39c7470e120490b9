#include "tsalign/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

namespace tsalign::training {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": shape [" + std::to_string(a.rows()) + " x " +
                          std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + " x " +
                          std::to_string(b.cols()) + "]");
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Matrix> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

double mse_loss(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "mse_loss");
  if (pred.size() == 0) throw ValidationError("mse_loss: empty input");
  return (pred - target).array().square().mean();
}

double mae_metric(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "mae_metric");
  if (pred.size() == 0) throw ValidationError("mae_metric: empty input");
  return (pred - target).array().abs().mean();
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw ValidationError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    errors.emplace_back("train.learning_rate must be a finite value >= 0");
  }
  if (batch_size < 1) errors.emplace_back("train.batch_size must be >= 1");
  if (max_epochs < 1) errors.emplace_back("train.max_epochs must be >= 1");
  if (max_steps < 0) errors.emplace_back("train.max_steps must be >= 0");
  if (patience < 1) errors.emplace_back("train.patience must be >= 1");
  if (val_limit < 0) errors.emplace_back("train.val_limit must be >= 0");
  return errors;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"steps", e.steps},
                           {"train_mse", e.train_mse},
                           {"val_mse", e.val_mse},
                           {"seconds", e.seconds}});
  }
  j["initial_val_mse"] = initial_val_mse;
  j["best_val_mse"] = best_val_mse;
  j["best_epoch"] = best_epoch;
  j["total_steps"] = total_steps;
  j["early_stopped"] = early_stopped;
  j["diverged"] = diverged;
  j["message"] = message;
  j["backbone_fingerprint_before"] = backbone_fingerprint_before;
  j["backbone_fingerprint_after"] = backbone_fingerprint_after;
  j["frozen_fingerprint_before"] = frozen_fingerprint_before;
  j["frozen_fingerprint_after"] = frozen_fingerprint_after;
  j["seconds"] = seconds;
  j["step_losses"] = step_losses;
  return j.dump(2);
}

OptimizerState::OptimizerState(std::vector<Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)), kind_(cfg.optimizer), lr_(cfg.learning_rate) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void OptimizerState::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (kind_ == Optimizer::sgd) {
      p.value -= lr_ * p.grad;
      continue;
    }
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

double batch_gradient(const Model& model, const std::vector<const data::WindowPair*>& batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  for (const Parameter* p : model.trainable()) p->zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const data::WindowPair* w : batch) {
    ad::Tape tape;
    ForwardResult r = model.forward(tape, w->history);
    ad::Var loss = ad::mse(r.combined, w->target);
    total += loss.value()(0, 0);
    tape.backward(loss, inv);
  }
  return total * inv;
}

double evaluate_mse(const Model& model, const std::vector<data::WindowPair>& windows, int limit) {
  if (windows.empty()) throw ValidationError("no windows to evaluate");
  std::size_t n = windows.size();
  if (limit > 0) n = std::min(n, static_cast<std::size_t>(limit));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += mse_loss(model.predict(windows[i].history).combined, windows[i].target);
  }
  return total / static_cast<double>(n);
}

TrainReport train(Model& model, const std::vector<data::WindowPair>& train_windows,
                  const std::vector<data::WindowPair>& val_windows, const TrainConfig& cfg) {
  if (auto errors = cfg.validate(); !errors.empty()) {
    std::string msg = "invalid training configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  if (train_windows.empty()) throw ValidationError("no training windows");

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.backbone_fingerprint_before = model.backbone().fingerprint();
  report.frozen_fingerprint_before = model.frozen_fingerprint();

  const std::vector<Parameter*> params = model.trainable();
  OptimizerState opt(params, cfg);
  std::mt19937_64 rng(cfg.seed);
  const bool has_val = !val_windows.empty();

  report.initial_val_mse = has_val ? evaluate_mse(model, val_windows, cfg.val_limit) : 0.0;
  report.best_val_mse = report.initial_val_mse;
  std::vector<Matrix> best = snapshot(params);
  int since_best = 0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    bool out_of_steps = false;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      if (cfg.max_steps > 0 && report.total_steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
      std::vector<const data::WindowPair*> items;
      for (std::size_t i = b; i < std::min(order.size(), b + batch); ++i) {
        items.push_back(&train_windows[order[i]]);
      }
      const double loss = batch_gradient(model, items);
      if (!std::isfinite(loss)) {
        report.diverged = true;
        report.message = "non-finite loss at step " + std::to_string(report.total_steps);
        break;
      }
      opt.step();
      report.step_losses.push_back(loss);
      loss_sum += loss;
      ++rec.steps;
      ++report.total_steps;
    }
    if (report.diverged) break;
    if (rec.steps == 0) break;
    rec.train_mse = loss_sum / rec.steps;
    if (has_val) {
      rec.val_mse = evaluate_mse(model, val_windows, cfg.val_limit);
      if (!std::isfinite(rec.val_mse)) {
        report.diverged = true;
        report.message = "non-finite validation loss after epoch " + std::to_string(epoch);
        break;
      }
      if (rec.val_mse < report.best_val_mse) {
        report.best_val_mse = rec.val_mse;
        report.best_epoch = epoch;
        best = snapshot(params);
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    rec.seconds = seconds_since(te);
    report.epochs.push_back(rec);
    if (out_of_steps) break;
    if (has_val && since_best >= cfg.patience) {
      report.early_stopped = true;
      break;
    }
    if (cfg.max_steps > 0 && report.total_steps >= cfg.max_steps) break;
  }

  if (has_val || report.diverged) {
    restore(params, best);
  } else {
    report.best_epoch = report.epochs.empty() ? -1 : report.epochs.back().epoch;
  }
  for (Parameter* p : params) p->zero_grad();
  if (!has_val && report.message.empty()) report.message = "no validation windows; kept final parameters";

  report.backbone_fingerprint_after = model.backbone().fingerprint();
  report.frozen_fingerprint_after = model.frozen_fingerprint();
  report.seconds = seconds_since(t0);
  return report;
}

GradCheckResult finite_difference_check(const std::vector<Parameter*>& params,
                                        const std::function<double()>& loss,
                                        const std::function<void()>& grad, double epsilon,
                                        int sample, std::uint64_t seed) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-2)) {
    throw ValidationError("gradient check epsilon must lie in [1e-6, 1e-2]");
  }
  if (sample < 1) throw ValidationError("gradient check needs at least one sample");
  std::vector<Parameter*> usable;
  std::size_t total = 0;
  for (Parameter* p : params) {
    if (p->value.size() > 0) {
      usable.push_back(p);
      total += static_cast<std::size_t>(p->value.size());
    }
  }
  if (usable.empty()) throw ValidationError("gradient check: no parameters");

  std::mt19937_64 rng(seed);
  std::set<std::pair<std::size_t, Eigen::Index>> picks;
  const std::size_t want = std::min(static_cast<std::size_t>(sample), total);
  std::uniform_int_distribution<std::size_t> pick_tensor(0, usable.size() - 1);
  while (picks.size() < want) {
    const std::size_t t = pick_tensor(rng);
    std::uniform_int_distribution<Eigen::Index> pick_entry(0, usable[t]->value.size() - 1);
    picks.emplace(t, pick_entry(rng));
  }

  grad();
  std::vector<Matrix> analytic;
  for (const Parameter* p : usable) analytic.push_back(p->grad);

  GradCheckResult result;
  for (const auto& [t, e] : picks) {
    Parameter& p = *usable[t];
    double& slot = p.value.data()[e];
    const double orig = slot;
    slot = orig + epsilon;
    const double up = loss();
    slot = orig - epsilon;
    const double down = loss();
    slot = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[t].data()[e];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    result.max_relative_deviation = std::max(result.max_relative_deviation, std::abs(a - numeric) / denom);
    result.sampled_names.push_back(p.name + "[" + std::to_string(e) + "]");
    ++result.sampled;
  }
  for (Parameter* p : usable) p->zero_grad();
  return result;
}

GradCheckResult finite_difference_check(Model& model, const data::WindowPair& window,
                                        double epsilon, int sample, std::uint64_t seed) {
  auto loss = [&] { return mse_loss(model.predict(window.history).combined, window.target); };
  auto grad = [&] { batch_gradient(model, {&window}); };
  return finite_difference_check(model.trainable(), loss, grad, epsilon, sample, seed);
}

}  // namespace tsalign::training
