#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gazefit/alignment.hpp"

namespace gazefit {

// U+2581, prefixed to word-initial subwords.
inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";
inline constexpr std::string_view kUnknownSymbol = "<unk>";

class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<std::string> alphabet,
           std::vector<std::pair<std::string, std::string>> merges, double character_coverage);

  // Alphabet symbols followed by merge outputs in training order. The unknown
  // symbol is reserved and not part of the vocabulary.
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  double character_coverage() const { return coverage_; }
  std::size_t vocab_size() const { return vocab_.size(); }

  bool contains(std::string_view symbol) const;

  // Subwords of `text`. Each whitespace-delimited word is encoded independently
  // with the boundary marker on its first subword. Characters outside the
  // alphabet pass through as single-character subwords that are not in vocab().
  std::vector<std::string> encode(std::string_view text) const;

  // Merges file: one "left right" pair per line. Vocab file: one symbol per line.
  void save(const std::filesystem::path& prefix) const;
  static BpeModel load(const std::filesystem::path& prefix);
  std::string merges_text() const;
  std::string vocab_text() const;

 private:
  std::vector<std::string> encode_word(std::string_view word) const;
  void index();

  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> vocab_;
  double coverage_ = 1.0;
  std::unordered_map<std::string, std::size_t> merge_rank_;  // "left\x1Fright" -> rank
  std::unordered_map<std::string, std::size_t> symbol_id_;
};

// Learns merges over whitespace-delimited words of `lines`. Characters outside the
// `character_coverage` frequency quantile are excluded from the alphabet. Pair
// frequency ties resolve to the lexicographically smallest (left, right).
BpeModel train_bpe(const std::vector<std::string>& lines, std::size_t vocab_size,
                   double character_coverage);

// Inverse of encode for whitespace-normalized text.
std::string detokenize(const std::vector<std::string>& subwords);

// Subword text with the boundary marker removed.
std::string_view strip_boundary(std::string_view subword);

// Minimal contiguous subword ranges whose concatenation (markers removed) equals
// each segment text. Throws AlignmentError when a subword straddles a boundary.
Alignment align(const std::vector<std::string>& subwords, const std::vector<std::string>& segments);

}  // namespace gazefit
