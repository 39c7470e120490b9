#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsalign/alignment.hpp"
#include "tsalign/backbone.hpp"
#include "tsalign/decompose.hpp"
#include "tsalign/head.hpp"
#include "tsalign/preprocess.hpp"
#include "tsalign/prompt.hpp"

namespace tsalign {

struct ModelConfig {
  int L = 512;
  int H = 96;
  int patch_len = 16;
  int stride = 8;
  /// Cross-attention heads in the reprogramming layers.
  int align_heads = 4;
  /// Prototype counts; 0 selects a size from the backbone vocabulary
  /// (100 / 500 for large vocabularies, V/8 / V/4 for small ones).
  int proto_seasonal = 0;
  int proto_residual = 0;
  decompose::DecompConfig decomp;
  /// Which components are reprogrammed (trend, seasonal, residual).
  std::array<bool, 3> align = {true, true, true};
  /// One set of alignment weights per channel instead of one shared set.
  bool per_channel_alignment = false;
  int channels = 1;
  std::vector<std::string> anchor_words = alignment::default_anchor_words();
  prompt::PromptTemplate prompt;
  int max_prompt_tokens = 64;
  /// Trainable prompt rows prepended before the rendered text (0 = off).
  int soft_prompt_len = 0;
  double norm_epsilon = 1e-5;

  int patch_count() const;
  int prototypes(alignment::Component c, int vocab_size) const;
  bool any_alignment() const { return align[0] || align[1] || align[2]; }

  /// Every problem found against `backbone`; empty when valid.
  std::vector<std::string> validate(const FrozenBackbone& backbone) const;
};

/// Trainable vs frozen tensors. Frozen tensors are never given to an optimizer.
struct ParameterPartition {
  std::vector<Parameter*> trainable;
  std::vector<std::pair<std::string, const Matrix*>> frozen;
};

struct Forecast {
  /// Denormalized per-component forecasts, each [N x H] (trend, seasonal, residual).
  std::array<Matrix, 3> per_component;
  /// Sum of the three, [N x H].
  Matrix combined;
};

/// Optional capture of intermediate artifacts for inspection.
struct ForwardTrace {
  struct Channel {
    decompose::ComponentTriple decomposition;
    std::array<preprocess::NormStats, 3> stats;
    std::array<std::string, 3> prompts;
    /// Per component: one [K x M] matrix per head; empty if not aligned.
    std::array<std::vector<Matrix>, 3> attention;
  };
  std::vector<Channel> channels;
};

struct ForwardResult {
  ad::Var combined;                  // [N x H]
  std::array<ad::Var, 3> components;  // [N x H] each, denormalized
};

class Model {
 public:
  Model(ModelConfig config, std::shared_ptr<const FrozenBackbone> backbone, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const FrozenBackbone& backbone() const { return *backbone_; }
  std::shared_ptr<const FrozenBackbone> backbone_ptr() const { return backbone_; }
  const alignment::AnchorSet* anchors() const { return anchors_ ? &*anchors_ : nullptr; }
  std::string anchor_hash() const;

  /// Records the full per-channel pipeline on `tape`; window is [N x L].
  ForwardResult forward(ad::Tape& tape, const Matrix& window, ForwardTrace* trace = nullptr) const;
  Forecast predict(const Matrix& window, ForwardTrace* trace = nullptr) const;

  /// Trend cross-attention weights for one channel, recomputed with
  /// non-overlapping patches (stride = patch length). h x [K x A].
  std::vector<Matrix> trend_attention(std::span<const double> series, int channel = 0) const;

  std::vector<Parameter*> trainable();
  std::vector<const Parameter*> trainable() const;
  ParameterPartition partition();
  /// Hash over every trainable tensor.
  std::string trainable_fingerprint() const;
  /// Hash over every frozen tensor (backbone and anchors).
  std::string frozen_fingerprint() const;

  TensorCheckpoint to_checkpoint() const;
  /// Restores trainable tensors; the checkpoint must name the same backbone
  /// fingerprint and carry exactly this model's tensors and shapes.
  void load_checkpoint(const TensorCheckpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  const alignment::CrossAttentionBlock* align_block(alignment::Component c, int channel) const;

  ModelConfig config_;
  std::shared_ptr<const FrozenBackbone> backbone_;
  std::optional<alignment::AnchorSet> anchors_;
  std::array<preprocess::PatchEmbedder, 3> embedders_;
  /// [component][channel or 0]
  std::array<std::vector<alignment::CrossAttentionBlock>, 3> align_blocks_;
  std::array<std::optional<alignment::PrototypeBank>, 3> banks_;
  std::array<head::ProjectionHead, 3> heads_;
  std::array<std::optional<Parameter>, 3> soft_prompts_;
};

/// Forward pipeline for one [N x L] window.
Forecast forward_pipeline(const Matrix& window, const Model& model);

}  // namespace tsalign
