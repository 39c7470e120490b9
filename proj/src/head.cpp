#include "tsalign/head.hpp"

#include <cmath>

namespace tsalign::head {

ProjectionHead make_projection_head(alignment::Component component, int patches, int dim,
                                    int horizon, std::mt19937_64& rng) {
  const int fan_in = patches * dim;
  Matrix w(fan_in, horizon);
  fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  ProjectionHead h;
  h.component = component;
  const std::string name = "head." + alignment::to_string(component);
  h.weight = Parameter(name + ".weight", std::move(w));
  h.bias = Parameter(name + ".bias", Matrix::Zero(1, horizon));
  return h;
}

ad::Var slice_patch_states(ad::Var hidden, int prompt_len, int patch_count) {
  if (prompt_len < 0 || prompt_len + patch_count != hidden.rows()) {
    throw ValidationError("slice_patch_states: prompt length " + std::to_string(prompt_len) +
                          " + patch count " + std::to_string(patch_count) +
                          " does not match " + std::to_string(hidden.rows()) + " hidden rows");
  }
  if (prompt_len == 0) return hidden;
  return ad::slice_rows(hidden, prompt_len, patch_count);
}

Matrix slice_patch_states(const Matrix& hidden, int prompt_len) {
  if (prompt_len < 0 || prompt_len > hidden.rows()) {
    throw ValidationError("slice_patch_states: prompt length " + std::to_string(prompt_len) +
                          " is inconsistent with " + std::to_string(hidden.rows()) + " rows");
  }
  return hidden.bottomRows(hidden.rows() - prompt_len);
}

ad::Var project_component(ad::Tape& tape, ad::Var states, const ProjectionHead& head) {
  const auto n = states.rows() * states.cols();
  if (n != head.weight.value.rows()) {
    throw ValidationError("project_component: flattened states have " + std::to_string(n) +
                          " entries, head expects " + std::to_string(head.weight.value.rows()));
  }
  ad::Var flat = ad::reshape(states, 1, n);
  return ad::add_row(ad::matmul(flat, tape.parameter(head.weight)), tape.parameter(head.bias));
}

Series project_component(const Matrix& states, const ProjectionHead& head) {
  ad::Tape tape;
  const Matrix out = project_component(tape, tape.constant(states), head).value();
  return Series(out.data(), out.data() + out.size());
}

Series combine_forecast(std::span<const double> trend, std::span<const double> seasonal,
                        std::span<const double> residual,
                        const std::array<preprocess::NormStats, 3>& stats) {
  if (trend.size() != seasonal.size() || trend.size() != residual.size()) {
    throw ValidationError("combine_forecast: component lengths differ");
  }
  const Series t = preprocess::denormalize(trend, stats[0]);
  const Series s = preprocess::denormalize(seasonal, stats[1]);
  const Series r = preprocess::denormalize(residual, stats[2]);
  Series out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] + s[i] + r[i];
  return out;
}

}  // namespace tsalign::head
