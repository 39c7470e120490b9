#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tsalign/autodiff.hpp"
#include "tsalign/backbone.hpp"

namespace tsalign::alignment {

enum class Component { trend = 0, seasonal = 1, residual = 2 };
inline constexpr Component kComponents[] = {Component::trend, Component::seasonal,
                                            Component::residual};

std::string to_string(Component c);
Component parse_component(const std::string& name);

/// Trend-descriptive anchors used by default.
const std::vector<std::string>& default_anchor_words();
/// Twelve words unrelated to time-series shape (noise-anchor ablation).
const std::vector<std::string>& noise_anchor_words();
/// Upward/downward synonyms (synonymous-anchor ablation).
const std::vector<std::string>& synonym_anchor_words();

/// One entry per non-empty line; surrounding whitespace trimmed.
std::vector<std::string> read_word_list(const std::filesystem::path& path);
/// Content hash of a word list, recorded for provenance.
std::string word_list_hash(const std::vector<std::string>& words);

/// Frozen anchor embeddings derived from the backbone vocabulary.
struct AnchorSet {
  std::vector<std::string> words;
  Matrix embeddings;  // [A x D]
  int count() const { return static_cast<int>(embeddings.rows()); }
};

/// Multi-token words map to the mean of their token rows.
AnchorSet resolve_anchor_embeddings(const std::vector<std::string>& words,
                                    const FrozenBackbone& backbone);

/// Trainable linear probe over the vocabulary table: prototypes = probe * E.
struct PrototypeBank {
  Component component = Component::seasonal;
  Parameter probe;  // [V' x V]
  int count() const { return static_cast<int>(probe.value.rows()); }
};

PrototypeBank make_prototype_bank(Component component, int count, int vocab_size,
                                  std::mt19937_64& rng);

ad::Var probe_prototypes(ad::Tape& tape, const PrototypeBank& bank, const Matrix& vocab_table);
Matrix probe_prototypes(const PrototypeBank& bank, const Matrix& vocab_table);

/// Query/key/value projections for one component's reprogramming layer.
struct CrossAttentionBlock {
  Component component = Component::trend;
  int heads = 4;
  Parameter wq, wk, wv;  // [D x D]

  int dim() const { return static_cast<int>(wq.value.rows()); }
};

CrossAttentionBlock make_cross_attention(const std::string& name, Component component, int dim,
                                         int heads, std::mt19937_64& rng);

/// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated back to D.
/// `weights` (optional) receives h matrices of shape [K x M].
ad::Var cross_attend(ad::Tape& tape, const CrossAttentionBlock& block, ad::Var queries_src,
                     ad::Var kv_src, std::vector<Matrix>* weights = nullptr);
std::pair<Matrix, std::vector<Matrix>> cross_attend(const CrossAttentionBlock& block,
                                                    const Matrix& queries_src,
                                                    const Matrix& kv_src);

/// What a component aligns against: anchors for trend, a prototype bank plus
/// the vocabulary table for seasonal and residual.
struct AlignmentContext {
  const AnchorSet* anchors = nullptr;
  const PrototypeBank* bank = nullptr;
  const Matrix* vocab_table = nullptr;
};

struct Aligned {
  ad::Var embeddings;            // [K x D]
  std::vector<Matrix> weights;   // h x [K x M]
};

Aligned align_component(ad::Tape& tape, Component component, const CrossAttentionBlock& block,
                        ad::Var patches_embedded, const AlignmentContext& ctx);

}  // namespace tsalign::alignment
