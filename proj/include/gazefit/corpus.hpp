#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazefit/alignment.hpp"

namespace gazefit {

enum class SynCategory { nominal, verbal, modifier, other };
enum class SemCategory { relation, subject, action, product, nature };

std::string_view to_string(SynCategory c);
std::string_view to_string(SemCategory c);
std::optional<SynCategory> parse_syn_category(std::string_view s);
std::optional<SemCategory> parse_sem_category(std::string_view s);

inline constexpr SynCategory kAllSynCategories[] = {SynCategory::nominal, SynCategory::verbal,
                                                   SynCategory::modifier, SynCategory::other};
inline constexpr SemCategory kAllSemCategories[] = {SemCategory::relation, SemCategory::subject,
                                                   SemCategory::action, SemCategory::product,
                                                   SemCategory::nature};

// English-like corpora model spillover from the two preceding segments and drop
// segments followed by punctuation; Japanese-like corpora do neither.
enum class LanguageStyle { english_like, japanese_like };

std::string_view to_string(LanguageStyle s);
LanguageStyle parse_language_style(std::string_view s);

// One data point: a subject's first-pass gaze duration on one segment.
struct Segment {
  std::string article_id;
  std::string subject_id;
  std::string text;
  double gaze_duration = 0.0;  // ms
  int screen_n = 1;
  int line_n = 1;
  int segment_n = 1;  // serial number within the screen
  int sent_n = 1;
  int token_n = 1;  // position of the segment in its sentence
  int length = 1;   // characters
  bool has_punct_or_num = false;
  bool is_line_first = false;
  bool is_line_last = false;
  // Successor within the same subject, article and screen contains punctuation or
  // a numeral. Derived at load time from the unfiltered presentation order.
  bool next_has_punct_or_num = false;
  std::optional<SynCategory> syn_category;
  std::optional<SemCategory> sem_category;
  std::optional<int> n_dependents;
};

struct Corpus {
  std::vector<Segment> segments;
  std::string language_tag;
  std::string metadata;

  std::size_t size() const { return segments.size(); }
  bool empty() const { return segments.empty(); }
};

// Header names for each field. The defaults are the toolkit's own TSV schema.
struct ColumnMapping {
  std::string text = "text";
  std::string gaze_duration = "gd";
  std::string article = "article";
  std::string subject = "subj";
  std::string screen_n = "screenN";
  std::string line_n = "lineN";
  std::string segment_n = "segmentN";
  std::string sent_n = "sentN";
  std::string token_n = "tokenN";
  std::string length = "length";
  std::string syn_category = "syn_category";
  std::string sem_category = "sem_category";
  std::string n_dependents = "n_dependents";
  // Written by write_corpus so a filtered file keeps the flags derived from the
  // unfiltered presentation order.
  std::string line_first = "line_first";
  std::string line_last = "line_last";
  std::string next_punct_num = "next_punct_num";
};

Corpus load_corpus(const std::filesystem::path& path, const ColumnMapping& schema = {});
Corpus parse_corpus(std::istream& in, const std::string& source_name,
                    const ColumnMapping& schema = {});
std::string format_corpus(const Corpus& c);
void write_corpus(const Corpus& c, const std::filesystem::path& path);

// Recomputes has_punct_or_num, line boundary and successor flags from the current
// segment order. Used by loaders and generators.
void derive_layout_flags(Corpus& c);

struct GdMoments {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;
};

// Moments of the nonzero gaze durations.
GdMoments nonzero_gd_moments(const Corpus& c);

struct FilterPolicy {
  double sd_cutoff = 3.0;
  bool exclude_zero_gd = true;
  bool exclude_punct_num = true;
  bool exclude_next_punct_num = true;
  bool exclude_line_boundary = true;
  // When set, the SD cutoff uses these moments instead of recomputing them.
  std::optional<GdMoments> frozen_moments;

  static FilterPolicy for_style(LanguageStyle style);
};

struct FilterCounts {
  std::size_t input = 0;
  std::size_t zero_gd = 0;
  std::size_t outlier = 0;
  std::size_t punct_num = 0;
  std::size_t next_punct_num = 0;
  std::size_t line_boundary = 0;
  std::size_t kept = 0;
};

struct FilterOutcome {
  Corpus corpus;
  FilterCounts counts;
  GdMoments moments;  // moments used for the SD cutoff
};

// Removes, in order: zero-GD points, SD outliers (pooled over the whole corpus),
// punctuation/numeral segments, segments followed by one, line-initial and
// line-final segments. Throws DomainError when nothing survives.
FilterOutcome apply_filters_with_report(const Corpus& c, const FilterPolicy& p);
Corpus apply_filters(const Corpus& c, const FilterPolicy& p);

struct CorpusStats {
  std::size_t articles = 0;
  std::size_t sentences = 0;
  std::size_t segments = 0;  // distinct (article, screenN, segmentN)
  std::size_t data_points = 0;
  std::size_t subjects = 0;
  double subjects_per_article = 0.0;
  double mean_gd = 0.0;
  std::optional<double> mean_subwords_per_segment;
};

CorpusStats corpus_stats(const Corpus& c, const Alignment* alignment = nullptr);

// Distinct text segments in reading order: articles by first appearance, then
// (screenN, segmentN). Each data point refers to one text segment.
struct TextSegment {
  std::string article_id;
  std::string text;
  int screen_n = 1;
  int line_n = 1;
  int segment_n = 1;
  int sent_n = 1;
  int token_n = 1;
  int length = 1;
  std::optional<SynCategory> syn_category;
  std::optional<SemCategory> sem_category;
  std::optional<int> n_dependents;
};

struct TextIndex {
  std::vector<TextSegment> segments;
  std::vector<std::size_t> point_to_segment;  // one entry per Corpus segment
  // [begin, end) into `segments` for each sentence, in reading order.
  struct Sentence {
    std::string article_id;
    int sent_n = 1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<Sentence> sentences;
};

TextIndex build_text_index(const Corpus& c);

}  // namespace gazefit
