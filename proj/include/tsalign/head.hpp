#pragma once

#include <array>
#include <random>
#include <span>

#include "tsalign/alignment.hpp"
#include "tsalign/autodiff.hpp"
#include "tsalign/preprocess.hpp"

namespace tsalign::head {

/// Linear map from the flattened patch states (patch-major, then embedding
/// dimension) to an H-step forecast for one component.
struct ProjectionHead {
  alignment::Component component = alignment::Component::trend;
  Parameter weight;  // [(K*D) x H]
  Parameter bias;    // [1 x H]

  int horizon() const { return static_cast<int>(weight.value.cols()); }
};

ProjectionHead make_projection_head(alignment::Component component, int patches, int dim,
                                    int horizon, std::mt19937_64& rng);

/// Rows P..P+K-1 of the backbone output.
ad::Var slice_patch_states(ad::Var hidden, int prompt_len, int patch_count);
Matrix slice_patch_states(const Matrix& hidden, int prompt_len);

/// flatten(states) * weight + bias, as a 1 x H row.
ad::Var project_component(ad::Tape& tape, ad::Var states, const ProjectionHead& head);
Series project_component(const Matrix& states, const ProjectionHead& head);

/// Denormalizes each component with its own statistics and sums them.
Series combine_forecast(std::span<const double> trend, std::span<const double> seasonal,
                        std::span<const double> residual,
                        const std::array<preprocess::NormStats, 3>& stats);

}  // namespace tsalign::head
