#include "tsalign/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tsalign::prompt {

namespace {

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

WindowStats summarize(std::span<const double> window) {
  WindowStats s;
  if (window.empty()) return s;
  s.min = *std::min_element(window.begin(), window.end());
  s.max = *std::max_element(window.begin(), window.end());
  double sum = 0.0;
  for (double v : window) sum += v;
  s.mean = sum / static_cast<double>(window.size());
  if (window.size() >= 2) {
    const double slope = (window.back() - window.front()) / static_cast<double>(window.size() - 1);
    const double scale = std::max(1e-12, s.max - s.min);
    if (slope > 1e-6 * scale) s.direction = "up";
    else if (slope < -1e-6 * scale) s.direction = "down";
  }
  return s;
}

std::string render_prompt(const PromptTemplate& t, alignment::Component component,
                          const WindowStats& stats, int L, int H) {
  std::vector<std::string> parts;
  if (!t.dataset_context.empty()) parts.push_back(t.dataset_context);
  if (t.include_stats) {
    parts.push_back("statistics " + alignment::to_string(component) + " min=" + fmt_num(stats.min) +
                    " max=" + fmt_num(stats.max) + " mean=" + fmt_num(stats.mean) +
                    " direction=" + stats.direction);
  }
  if (t.include_instruction) {
    std::string inst = t.instruction_pattern;
    replace_all(inst, "{H}", std::to_string(H));
    replace_all(inst, "{L}", std::to_string(L));
    replace_all(inst, "{component}", alignment::to_string(component));
    parts.push_back(inst);
  }
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

PromptEmbedding embed_prompt(const std::string& text, const FrozenBackbone& backbone,
                             int max_tokens) {
  PromptEmbedding p;
  p.tokens = backbone.tokenizer().encode(text);
  if (max_tokens >= 0 && static_cast<int>(p.tokens.size()) > max_tokens) {
    p.tokens.erase(p.tokens.begin(), p.tokens.end() - max_tokens);
  }
  const Matrix& E = backbone.vocab_table();
  p.embedded.resize(static_cast<Eigen::Index>(p.tokens.size()), E.cols());
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    if (p.tokens[i] < 0 || p.tokens[i] >= E.rows()) {
      throw ValidationError("prompt token id " + std::to_string(p.tokens[i]) +
                            " lies outside the vocabulary table");
    }
    p.embedded.row(static_cast<Eigen::Index>(i)) = E.row(p.tokens[i]);
  }
  return p;
}

ad::Var prefix_concat(ad::Tape& tape, const PromptEmbedding& prompt, ad::Var patches) {
  if (prompt.length() == 0) return patches;
  if (prompt.embedded.cols() != patches.cols()) {
    throw ValidationError("prefix_concat: prompt width " + std::to_string(prompt.embedded.cols()) +
                          " does not match patch width " + std::to_string(patches.cols()));
  }
  return ad::concat_rows({tape.constant(prompt.embedded), patches});
}

Matrix prefix_concat(const PromptEmbedding& prompt, const Matrix& patches) {
  ad::Tape tape;
  return prefix_concat(tape, prompt, tape.constant(patches)).value();
}

}  // namespace tsalign::prompt
