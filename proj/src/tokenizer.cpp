#include "tsalign/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <fstream>

#include <json.hpp>

#include "tsalign/alignment.hpp"
#include "tsalign/tensor.hpp"

namespace tsalign {

const std::vector<std::string>& reserved_lexicon() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    for (const auto* list : {&alignment::default_anchor_words(), &alignment::synonym_anchor_words(),
                             &alignment::noise_anchor_words()}) {
      for (const auto& w : *list) {
        if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
    }
    return out;
  }();
  return words;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) out.push_back(text.substr(b, i - b));
  }
  return out;
}

}  // namespace

HashTokenizer::HashTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 1) throw ValidationError("HashTokenizer: vocabulary must be non-empty");
  const auto& lex = reserved_lexicon();
  if (static_cast<std::size_t>(vocab_size) > lex.size()) {
    for (std::size_t i = 0; i < lex.size(); ++i) reserved_.emplace(lex[i], static_cast<int>(i));
  }
}

int HashTokenizer::token_for(std::string_view word) const {
  const std::string w = lower(word);
  if (auto it = reserved_.find(w); it != reserved_.end()) return it->second;
  const auto base = static_cast<std::uint64_t>(reserved_.size());
  const auto range = static_cast<std::uint64_t>(vocab_size_) - base;
  return static_cast<int>(base + fnv1a(w) % range);
}

std::vector<int> HashTokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (auto w : split_ws(text)) out.push_back(token_for(w));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// GPT-2's reversible byte -> printable-codepoint table.
std::vector<std::string> make_byte_encoder() {
  std::vector<int> cps(256, -1);
  for (int b = '!'; b <= '~'; ++b) cps[static_cast<std::size_t>(b)] = b;
  for (int b = 0xA1; b <= 0xAC; ++b) cps[static_cast<std::size_t>(b)] = b;
  for (int b = 0xAE; b <= 0xFF; ++b) cps[static_cast<std::size_t>(b)] = b;
  int next = 256;
  std::vector<std::string> enc(256);
  for (int b = 0; b < 256; ++b) {
    if (cps[static_cast<std::size_t>(b)] < 0) cps[static_cast<std::size_t>(b)] = next++;
    append_utf8(enc[static_cast<std::size_t>(b)], static_cast<unsigned>(cps[static_cast<std::size_t>(b)]));
  }
  return enc;
}

enum class CharClass { space, letter, digit, other };

CharClass classify(unsigned char c) {
  if (std::isspace(c)) return CharClass::space;
  if (std::isalpha(c) || c >= 0x80) return CharClass::letter;
  if (std::isdigit(c)) return CharClass::digit;
  return CharClass::other;
}

}  // namespace

BpeTokenizer::BpeTokenizer(std::unordered_map<std::string, int> vocab,
                           std::vector<std::pair<std::string, std::string>> merges)
    : vocab_(std::move(vocab)), byte_encoder_(make_byte_encoder()) {
  for (std::size_t i = 0; i < merges.size(); ++i) ranks_.emplace(merges[i], static_cast<int>(i));
}

BpeTokenizer BpeTokenizer::from_files(const std::filesystem::path& vocab_json,
                                      const std::filesystem::path& merges_txt) {
  std::ifstream vin(vocab_json);
  if (!vin) throw ValidationError("cannot open vocabulary file: " + vocab_json.string());
  nlohmann::json j;
  vin >> j;
  std::unordered_map<std::string, int> vocab;
  for (auto it = j.begin(); it != j.end(); ++it) vocab.emplace(it.key(), it.value().get<int>());

  std::ifstream min(merges_txt);
  if (!min) throw ValidationError("cannot open merges file: " + merges_txt.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  while (std::getline(min, line)) {
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return BpeTokenizer(std::move(vocab), std::move(merges));
}

std::vector<std::string> BpeTokenizer::pretokenize(std::string_view text) {
  static constexpr std::string_view kContractions[] = {"'s", "'t", "'re", "'ve", "'m", "'ll", "'d"};
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto cls = [&](std::size_t k) { return classify(static_cast<unsigned char>(text[k])); };
  while (i < n) {
    bool matched = false;
    for (auto c : kContractions) {
      if (text.substr(i, c.size()) == c) {
        out.emplace_back(c);
        i += c.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;

    std::size_t b = i;
    std::size_t j = i;
    if (text[j] == ' ' && j + 1 < n && cls(j + 1) != CharClass::space) ++j;
    const CharClass c = cls(j);
    if (c != CharClass::space) {
      while (j < n && cls(j) == c) ++j;
      out.emplace_back(text.substr(b, j - b));
      i = j;
      continue;
    }
    // Whitespace run: leave a final ' ' to prefix the following word.
    while (j < n && cls(j) == CharClass::space) ++j;
    if (j < n && j - b > 1) {
      out.emplace_back(text.substr(b, j - 1 - b));
      i = j - 1;
    } else if (j < n && text[j - 1] != ' ') {
      out.emplace_back(text.substr(b, j - b));
      i = j;
    } else if (j == n) {
      out.emplace_back(text.substr(b, j - b));
      i = j;
    } else {
      // Single space followed by something the word rules already handle.
      out.emplace_back(text.substr(b, 1));
      i = b + 1;
    }
  }
  return out;
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& mapped) const {
  // Split into UTF-8 characters.
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < mapped.size();) {
    const auto c = static_cast<unsigned char>(mapped[i]);
    const std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    parts.push_back(mapped.substr(i, len));
    i += len;
  }
  while (parts.size() > 1) {
    int best = INT_MAX;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find({parts[i], parts[i + 1]});
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        at = i;
      }
    }
    if (best == INT_MAX) break;
    const std::string a = parts[at];
    const std::string b = parts[at + 1];
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < parts.size();) {
      if (i + 1 < parts.size() && parts[i] == a && parts[i + 1] == b) {
        merged.push_back(a + b);
        i += 2;
      } else {
        merged.push_back(parts[i]);
        ++i;
      }
    }
    parts = std::move(merged);
  }
  return parts;
}

std::vector<int> BpeTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& piece : pretokenize(text)) {
    std::string mapped;
    for (unsigned char c : piece) mapped += byte_encoder_[c];
    for (const auto& tok : bpe(mapped)) {
      auto it = vocab_.find(tok);
      if (it == vocab_.end()) {
        throw ValidationError("token '" + tok + "' (from '" + piece + "') is not in the vocabulary");
      }
      ids.push_back(it->second);
    }
  }
  return ids;
}

std::vector<int> BpeTokenizer::encode_word(std::string_view word) const {
  return encode(" " + std::string(word));
}

}  // namespace tsalign
