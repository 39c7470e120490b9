#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsalign/alignment.hpp"
#include "tsalign/autodiff.hpp"
#include "tsalign/backbone.hpp"

namespace tsalign::prompt {

inline constexpr const char* kDefaultInstruction =
    "forecast the next {H} steps given the previous {L} steps [{component}]";

struct PromptTemplate {
  std::string dataset_context;
  /// Slots: {H}, {L}, {component}.
  std::string instruction_pattern = kDefaultInstruction;
  bool include_stats = true;
  bool include_instruction = true;
};

struct WindowStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  /// "up", "down" or "flat" from the average lag-1 difference.
  std::string direction = "flat";
};

WindowStats summarize(std::span<const double> window);

/// Dataset context, then the statistics line, then the instruction, joined by
/// single spaces. Disabled parts are omitted.
std::string render_prompt(const PromptTemplate& t, alignment::Component component,
                          const WindowStats& stats, int L, int H);

struct PromptEmbedding {
  std::vector<int> tokens;
  Matrix embedded;  // [P x D], rows of the frozen vocabulary table
  int length() const { return static_cast<int>(tokens.size()); }
};

/// Tokenizes with the backbone's tokenizer. Prompts longer than `max_tokens`
/// keep their last `max_tokens` tokens so the instruction survives.
PromptEmbedding embed_prompt(const std::string& text, const FrozenBackbone& backbone,
                             int max_tokens = 64);

/// Prompt rows first, then patch rows. The prompt length is what the head
/// later slices off.
ad::Var prefix_concat(ad::Tape& tape, const PromptEmbedding& prompt, ad::Var patches);
Matrix prefix_concat(const PromptEmbedding& prompt, const Matrix& patches);

}  // namespace tsalign::prompt
