#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tsalign/autodiff.hpp"
#include "tsalign/checkpoint.hpp"
#include "tsalign/tokenizer.hpp"

namespace tsalign {

/// Pre-norm decoder block (GPT-2 layout). The fused c_attn projection is
/// held split into its query/key/value column blocks.
struct BackboneBlock {
  Matrix ln1_gamma, ln1_beta;
  Matrix wq, wk, wv;  // [D x D]
  Matrix bq, bk, bv;  // [1 x D]
  Matrix attn_proj_w, attn_proj_b;
  Matrix ln2_gamma, ln2_beta;
  Matrix fc_w, fc_b;            // [D x 4D], [1 x 4D]
  Matrix fc_proj_w, fc_proj_b;  // [4D x D], [1 x D]
};

/// Immutable transformer stack used forward-only. Gradients flow through it
/// to upstream inputs; its tensors are never handed to an optimizer.
class FrozenBackbone {
 public:
  static constexpr int kBlocks = 6;

  FrozenBackbone(Matrix token_table, Matrix position_table, std::vector<BackboneBlock> blocks,
                 Matrix lnf_gamma, Matrix lnf_beta, int heads,
                 std::shared_ptr<const Tokenizer> tokenizer);

  int vocab_size() const { return static_cast<int>(token_table_.rows()); }
  int dim() const { return static_cast<int>(token_table_.cols()); }
  int max_positions() const { return static_cast<int>(position_table_.rows()); }
  int heads() const { return heads_; }

  /// The word-embedding table E [V x D].
  const Matrix& vocab_table() const { return token_table_; }
  const Matrix& position_table() const { return position_table_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }
  std::shared_ptr<const Tokenizer> tokenizer_ptr() const { return tokenizer_; }

  /// Adds positional rows 0..S-1, applies the blocks with causal attention,
  /// then the final layer norm. Output shape equals input shape.
  ad::Var forward(ad::Tape& tape, ad::Var embedded) const;
  Matrix forward(const Matrix& embedded) const;

  /// Content hash over every parameter, recomputed on each call.
  std::string fingerprint() const;

  TensorCheckpoint to_checkpoint() const;

  /// (name, tensor) for every frozen parameter.
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;

 private:
  Matrix token_table_;
  Matrix position_table_;
  std::vector<BackboneBlock> blocks_;
  Matrix lnf_gamma_, lnf_beta_;
  int heads_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

/// Deterministic random stand-in for the pre-trained model; every value is
/// float32-representable so checkpoints round-trip exactly.
FrozenBackbone init_mini_backbone(std::uint64_t seed, int vocab_size = 256, int dim = 64,
                                  int max_positions = 512, int heads = 4);

/// GPT-2 tensor names and shapes for a `blocks`-deep stack.
ShapeManifest backbone_manifest(int vocab_size, int dim, int max_positions,
                                int blocks = FrozenBackbone::kBlocks);

/// Assembles a backbone from blocks 0..5 of a checkpoint; extra blocks are
/// ignored. A null tokenizer selects the HashTokenizer over V.
FrozenBackbone load_checkpoint(const std::filesystem::path& path, const ShapeManifest& expected,
                               int heads, std::shared_ptr<const Tokenizer> tokenizer = nullptr);
/// Same, deriving V, D, and T_max from the `wte` / `wpe` tensors.
FrozenBackbone load_checkpoint(const std::filesystem::path& path, int heads,
                               std::shared_ptr<const Tokenizer> tokenizer = nullptr);

}  // namespace tsalign
