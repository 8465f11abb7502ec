#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gazefit {

inline constexpr std::string_view kSentenceBegin = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknownWord = "<unk>";

// Interpolated modified Kneser-Ney backoff model. Values are held in base 10 as in
// ARPA files so that export/import reproduces queries bit for bit; the query API
// speaks natural log.
class NGramModel {
 public:
  using WordId = std::uint32_t;

  struct Entry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
  };

  // Modified KN discounts D1, D2, D3+ used for one order.
  struct Discounts {
    double d1 = 0.75, d2 = 0.75, d3 = 0.75;
    bool fallback = false;
  };

  int order() const { return order_; }
  const std::vector<std::string>& vocab() const { return words_; }
  WordId id(std::string_view word) const;  // unknown words map to <unk>
  WordId unk_id() const { return unk_; }
  WordId bos_id() const { return bos_; }
  WordId eos_id() const { return eos_; }
  std::size_t ngram_count(int n) const { return tables_.at(n - 1).size(); }
  const std::vector<Discounts>& discounts() const { return discounts_; }

  // ln p(w | last order-1 tokens of context) via backoff.
  double logprob(std::span<const std::string> context, std::string_view word) const;
  double logprob_ids(std::span<const WordId> context, WordId word) const;

  // Surprisals (nats) of each token of a sentence given <s> and the preceding
  // tokens. The end-of-sentence surprisal is written to *end_surprisal if given.
  std::vector<double> sentence_surprisals(std::span<const std::string> tokens,
                                          double* end_surprisal = nullptr) const;

  // Predictable vocabulary: everything except <s>.
  std::vector<WordId> predictable() const;

  void write_arpa(std::ostream& out) const;
  std::string arpa_text() const;
  void save_arpa(const std::filesystem::path& path) const;
  static NGramModel read_arpa(std::istream& in, const std::string& source_name);
  static NGramModel load_arpa(const std::filesystem::path& path);

  bool find(std::span<const WordId> ngram, Entry& out) const;

 private:
  friend NGramModel train_kn(const std::vector<std::vector<std::string>>& sentences, int order);
  static std::string key(std::span<const WordId> ids);
  void set_vocab(std::vector<std::string> words);

  int order_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> word_id_;
  WordId unk_ = 0, bos_ = 0, eos_ = 0;
  std::vector<std::unordered_map<std::string, Entry>> tables_;  // index n-1
  std::vector<Discounts> discounts_;                            // index n-1
};

NGramModel train_kn(const std::vector<std::vector<std::string>>& sentences, int order);

// exp(sum / N). Throws DomainError for an empty sequence or non-finite entries.
double perplexity(std::span<const double> surprisals);

}  // namespace gazefit
