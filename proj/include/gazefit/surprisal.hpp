#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazefit/alignment.hpp"
#include "gazefit/corpus.hpp"

namespace gazefit {

struct SurprisalRow {
  std::string article_id;
  int sent = 1;
  int idx = 0;  // subword position within the sentence, from 0
  std::string subword;
  double surprisal = 0.0;  // nats
};

// Per-subword surprisals of one LM over the eye-tracking text, in tokenization order.
struct SurprisalTable {
  std::string lm_id;
  std::vector<SurprisalRow> rows;

  // exp(mean subword surprisal) over every row.
  double ppl() const;
  std::vector<double> values() const;
};

// Header: article sent idx subword surprisal_nats.
SurprisalTable read_surprisal_table(const std::filesystem::path& path, std::string lm_id = {});
SurprisalTable parse_surprisal_table(std::istream& in, const std::string& source_name, std::string lm_id = {});
std::string format_surprisal_table(const SurprisalTable& t);
void write_surprisal_table(const SurprisalTable& t, const std::filesystem::path& path);

// Checks row ordering, index contiguity and value range. Returns one message per
// problem found; empty when the table is clean.
std::vector<std::string> validate_surprisal_table(const SurprisalTable& t);

struct UnigramCounts {
  std::map<std::string, long long> counts;
  long long total = 0;

  void add(const std::string& subword, long long n = 1);
};

UnigramCounts read_unigram_counts(const std::filesystem::path& path);
std::string format_unigram_counts(const UnigramCounts& c);
void write_unigram_counts(const UnigramCounts& c, const std::filesystem::path& path);

// Sum of subword surprisals over each aligned range of `surprisals`.
std::vector<double> segment_surprisal(std::span<const double> surprisals, const Alignment& a);

struct SegmentFeatures {
  double surprisal = 0.0;
  std::optional<double> surprisal_prev_1;
  std::optional<double> surprisal_prev_2;
  double freq = 0.0;  // log geometric mean of smoothed subword frequencies
  int length = 1;
  std::optional<double> freq_prev_1;
  std::optional<int> length_prev_1;
  std::size_t n_subwords = 0;
};

struct SpilloverPolicy {
  int prev_count = 2;  // 2 or 0

  static SpilloverPolicy for_style(LanguageStyle style);
};

// Lagged surprisals over one reading sequence. With prev_count 0 all lags are absent.
std::vector<SegmentFeatures> spillover_features(std::span<const double> seg_surprisals, SpilloverPolicy policy);

// Log of the geometric mean of add-one smoothed relative frequencies,
// (count + 1) / (total + |V| + 1), where the extra slot holds unseen subwords.
double freq_feature(std::span<const std::string> segment_subwords, const UnigramCounts& counts);

// Text-level features for every segment of a TextIndex, computed against the
// surprisal table of one LM. Rows of each (article, sentN) sentence are aligned to
// that sentence's segments.
struct TextFeatures {
  std::vector<SegmentFeatures> segments;  // parallel to TextIndex::segments
  Alignment alignment;                    // segment -> row range of the table
  std::vector<std::size_t> row_order;     // table rows in TextIndex sentence order
};

TextFeatures compute_text_features(const TextIndex& index, const SurprisalTable& table,
                                   const UnigramCounts& counts, SpilloverPolicy policy);

// Counts over the subword column of a table; a stand-in when no training-corpus
// counts are supplied.
UnigramCounts counts_from_table(const SurprisalTable& t);

}  // namespace gazefit
