#pragma once

#include <span>

#include "tsalign/autodiff.hpp"
#include "tsalign/tensor.hpp"

namespace tsalign::preprocess {

struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
  double epsilon = 1e-5;
};

/// (x - mean) / (std + epsilon).
std::pair<Series, NormStats> instance_normalize(std::span<const double> x, double epsilon = 1e-5);

/// y * (std + epsilon) + mean.
Series denormalize(std::span<const double> y, const NormStats& stats);

struct PatchSet {
  Matrix patches;  // [K x L_P]
  int count = 0;   // K
  int length = 0;  // L_P
  int stride = 0;
  NormStats stats;
};

/// K = floor((L - L_P) / s) + 2 patches. The series is extended by repeating
/// its final value s times before slicing.
PatchSet patchify(std::span<const double> x, int patch_len, int stride);

/// Patch count for a window of length L.
int patch_count(int L, int patch_len, int stride);

/// Linear patch embedding shared across channels; one per component.
struct PatchEmbedder {
  Parameter weight;  // [L_P x D]
  Parameter bias;    // [1 x D]

  PatchEmbedder() = default;
  PatchEmbedder(const std::string& name, int patch_len, int dim, std::mt19937_64& rng);
};

/// Row i = patches[i] * weight + bias.
ad::Var embed_patches(ad::Tape& tape, ad::Var patches, const PatchEmbedder& emb);
Matrix embed_patches(const PatchSet& p, const PatchEmbedder& emb);

}  // namespace tsalign::preprocess
