#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsalign {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  /// Throws ValidationError when some piece of `text` has no vocabulary entry.
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual int vocab_size() const = 0;
  /// Encoding used for a standalone anchor word.
  virtual std::vector<int> encode_word(std::string_view word) const { return encode(word); }
};

/// Whitespace tokenizer for the synthetic mini vocabulary. Words from the
/// built-in anchor lexicon get dedicated ids 0..n-1; every other word is
/// lower-cased and hashed (FNV-1a) into the remaining id range.
class HashTokenizer final : public Tokenizer {
 public:
  explicit HashTokenizer(int vocab_size);
  std::vector<int> encode(std::string_view text) const override;
  int vocab_size() const override { return vocab_size_; }

  int token_for(std::string_view word) const;

 private:
  int vocab_size_;
  std::unordered_map<std::string, int> reserved_;
};

/// GPT-2 byte-level BPE from a `vocab.json` (token -> id) and `merges.txt`.
class BpeTokenizer final : public Tokenizer {
 public:
  BpeTokenizer(std::unordered_map<std::string, int> vocab,
               std::vector<std::pair<std::string, std::string>> merges);
  static BpeTokenizer from_files(const std::filesystem::path& vocab_json,
                                 const std::filesystem::path& merges_txt);

  std::vector<int> encode(std::string_view text) const override;
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  /// Anchor words are encoded in their mid-sentence form (leading space).
  std::vector<int> encode_word(std::string_view word) const override;

  /// Splits text into pre-tokens the way GPT-2's regex does (ASCII classes;
  /// bytes >= 0x80 count as letters).
  static std::vector<std::string> pretokenize(std::string_view text);

 private:
  std::vector<std::string> bpe(const std::string& mapped) const;

  std::unordered_map<std::string, int> vocab_;
  std::map<std::pair<std::string, std::string>, int> ranks_;
  std::vector<std::string> byte_encoder_;
};

/// Words the mini vocabulary reserves ids for: default, noise, and synonym anchors.
const std::vector<std::string>& reserved_lexicon();

}  // namespace tsalign
