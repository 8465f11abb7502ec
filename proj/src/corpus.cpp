#include "gazefit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {

std::string_view to_string(SynCategory c) {
  switch (c) {
    case SynCategory::nominal: return "nominal";
    case SynCategory::verbal: return "verbal";
    case SynCategory::modifier: return "modifier";
    case SynCategory::other: return "other";
  }
  return "other";
}

std::string_view to_string(SemCategory c) {
  switch (c) {
    case SemCategory::relation: return "relation";
    case SemCategory::subject: return "subject";
    case SemCategory::action: return "action";
    case SemCategory::product: return "product";
    case SemCategory::nature: return "nature";
  }
  return "nature";
}

std::optional<SynCategory> parse_syn_category(std::string_view s) {
  for (auto c : kAllSynCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<SemCategory> parse_sem_category(std::string_view s) {
  for (auto c : kAllSemCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::string_view to_string(LanguageStyle s) {
  return s == LanguageStyle::english_like ? "english_like" : "japanese_like";
}

LanguageStyle parse_language_style(std::string_view s) {
  if (s == "english_like") return LanguageStyle::english_like;
  if (s == "japanese_like") return LanguageStyle::japanese_like;
  throw DomainError("unknown language style '" + std::string(s) + "'");
}

namespace {

bool parse_flag(const tsv::Table& t, std::size_t row, std::size_t col) {
  const auto s = text::trim(t.cell(row, col));
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false" || s.empty()) return false;
  throw ParseError(t.source() + ": column '" + t.header()[col] + "' is not a 0/1 flag", t.line_of(row));
}

int parse_ordinal(const tsv::Table& t, std::size_t row, std::size_t col) {
  const long long v = t.integer(row, col);
  if (v < 1) {
    throw ParseError(t.source() + ": column '" + t.header()[col] + "' must be >= 1", t.line_of(row));
  }
  return static_cast<int>(v);
}

Corpus corpus_from_table(const tsv::Table& t, const ColumnMapping& m) {
  const auto c_text = t.require_column(m.text);
  const auto c_gd = t.require_column(m.gaze_duration);
  const auto c_article = t.require_column(m.article);
  const auto c_subject = t.require_column(m.subject);
  const auto c_screen = t.require_column(m.screen_n);
  const auto c_line = t.require_column(m.line_n);
  const auto c_segment = t.require_column(m.segment_n);
  const auto c_sent = t.require_column(m.sent_n);
  const auto c_token = t.require_column(m.token_n);
  const auto c_length = t.column(m.length);
  const auto c_syn = t.column(m.syn_category);
  const auto c_sem = t.column(m.sem_category);
  const auto c_deps = t.column(m.n_dependents);
  const auto c_first = t.column(m.line_first);
  const auto c_last = t.column(m.line_last);
  const auto c_next = t.column(m.next_punct_num);

  Corpus c;
  c.metadata = t.source();
  c.segments.reserve(t.rows());
  std::set<std::tuple<std::string, std::string, int, int>> keys;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Segment s;
    s.text = t.cell(r, c_text);
    if (s.text.empty()) throw ParseError(t.source() + ": empty segment text", t.line_of(r));
    s.gaze_duration = t.number(r, c_gd);
    if (s.gaze_duration < 0) {
      throw ParseError(t.source() + ": negative gaze duration", t.line_of(r));
    }
    s.article_id = std::string(text::trim(t.cell(r, c_article)));
    s.subject_id = std::string(text::trim(t.cell(r, c_subject)));
    if (s.article_id.empty() || s.subject_id.empty()) {
      throw ParseError(t.source() + ": empty article or subject identifier", t.line_of(r));
    }
    s.screen_n = parse_ordinal(t, r, c_screen);
    s.line_n = parse_ordinal(t, r, c_line);
    s.segment_n = parse_ordinal(t, r, c_segment);
    s.sent_n = parse_ordinal(t, r, c_sent);
    s.token_n = parse_ordinal(t, r, c_token);
    if (c_length && !text::trim(t.cell(r, *c_length)).empty()) {
      s.length = parse_ordinal(t, r, *c_length);
    } else {
      s.length = static_cast<int>(std::max<std::size_t>(1, text::char_count(s.text)));
    }
    if (c_syn && !t.cell(r, *c_syn).empty()) {
      s.syn_category = parse_syn_category(text::trim(t.cell(r, *c_syn)));
      if (!s.syn_category) {
        throw ParseError(t.source() + ": unknown syn_category '" + t.cell(r, *c_syn) + "'", t.line_of(r));
      }
    }
    if (c_sem && !t.cell(r, *c_sem).empty()) {
      s.sem_category = parse_sem_category(text::trim(t.cell(r, *c_sem)));
      if (!s.sem_category) {
        throw ParseError(t.source() + ": unknown sem_category '" + t.cell(r, *c_sem) + "'", t.line_of(r));
      }
    }
    if (c_deps && !text::trim(t.cell(r, *c_deps)).empty()) {
      const long long d = t.integer(r, *c_deps);
      if (d < 0) throw ParseError(t.source() + ": negative n_dependents", t.line_of(r));
      s.n_dependents = static_cast<int>(d);
    }
    if (!keys.emplace(s.article_id, s.subject_id, s.screen_n, s.segment_n).second) {
      throw ParseError(t.source() + ": duplicate (article, subj, screenN, segmentN)", t.line_of(r));
    }
    c.segments.push_back(std::move(s));
  }

  derive_layout_flags(c);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto& s = c.segments[r];
    if (c_first) s.is_line_first = parse_flag(t, r, *c_first);
    if (c_last) s.is_line_last = parse_flag(t, r, *c_last);
    if (c_next) s.next_has_punct_or_num = parse_flag(t, r, *c_next);
  }
  return c;
}

}  // namespace

void derive_layout_flags(Corpus& c) {
  using Key = std::tuple<std::string_view, std::string_view, int>;
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    auto& s = c.segments[i];
    s.has_punct_or_num = text::has_punct_or_digit(s.text);
    groups[Key{s.article_id, s.subject_id, s.screen_n}].push_back(i);
  }
  for (const auto& [key, idx] : groups) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto& s = c.segments[idx[k]];
      const Segment* prev = k > 0 ? &c.segments[idx[k - 1]] : nullptr;
      const Segment* next = k + 1 < idx.size() ? &c.segments[idx[k + 1]] : nullptr;
      s.is_line_first = prev == nullptr || prev->line_n != s.line_n;
      s.is_line_last = next == nullptr || next->line_n != s.line_n;
      s.next_has_punct_or_num = next != nullptr && next->has_punct_or_num;
    }
  }
}

Corpus parse_corpus(std::istream& in, const std::string& source_name, const ColumnMapping& schema) {
  return corpus_from_table(tsv::Table::parse(in, source_name), schema);
}

Corpus load_corpus(const std::filesystem::path& path, const ColumnMapping& schema) {
  return corpus_from_table(tsv::Table::read(path), schema);
}

std::string format_corpus(const Corpus& c) {
  std::ostringstream out;
  out << "text\tgd\tarticle\tsubj\tscreenN\tlineN\tsegmentN\tsentN\ttokenN\tlength\t"
         "syn_category\tsem_category\tn_dependents\tline_first\tline_last\tnext_punct_num\n";
  for (const auto& s : c.segments) {
    out << s.text << '\t' << tsv::format_double(s.gaze_duration) << '\t' << s.article_id << '\t'
        << s.subject_id << '\t' << s.screen_n << '\t' << s.line_n << '\t' << s.segment_n << '\t'
        << s.sent_n << '\t' << s.token_n << '\t' << s.length << '\t'
        << (s.syn_category ? to_string(*s.syn_category) : "") << '\t'
        << (s.sem_category ? to_string(*s.sem_category) : "") << '\t'
        << (s.n_dependents ? std::to_string(*s.n_dependents) : "") << '\t' << int(s.is_line_first)
        << '\t' << int(s.is_line_last) << '\t' << int(s.next_has_punct_or_num) << '\n';
  }
  return out.str();
}

void write_corpus(const Corpus& c, const std::filesystem::path& path) {
  tsv::write_atomic(path, format_corpus(c));
}

GdMoments nonzero_gd_moments(const Corpus& c) {
  GdMoments m;
  double sum = 0.0;
  for (const auto& s : c.segments) {
    if (s.gaze_duration != 0.0) {
      sum += s.gaze_duration;
      ++m.n;
    }
  }
  if (m.n == 0) return m;
  m.mean = sum / static_cast<double>(m.n);
  double ss = 0.0;
  for (const auto& s : c.segments) {
    if (s.gaze_duration != 0.0) ss += (s.gaze_duration - m.mean) * (s.gaze_duration - m.mean);
  }
  m.sd = m.n > 1 ? std::sqrt(ss / static_cast<double>(m.n - 1)) : 0.0;
  return m;
}

FilterPolicy FilterPolicy::for_style(LanguageStyle style) {
  FilterPolicy p;
  p.exclude_next_punct_num = style == LanguageStyle::english_like;
  return p;
}

FilterOutcome apply_filters_with_report(const Corpus& c, const FilterPolicy& p) {
  if (c.empty()) throw DomainError("apply_filters: empty corpus");
  if (!(p.sd_cutoff > 0)) throw DomainError("apply_filters: sd_cutoff must be > 0");

  FilterOutcome out;
  out.counts.input = c.size();
  out.moments = p.frozen_moments ? *p.frozen_moments : nonzero_gd_moments(c);
  out.corpus.language_tag = c.language_tag;
  out.corpus.metadata = c.metadata;

  const double limit = p.sd_cutoff * out.moments.sd;
  for (const auto& s : c.segments) {
    if (p.exclude_zero_gd && s.gaze_duration == 0.0) {
      ++out.counts.zero_gd;
      continue;
    }
    if (std::abs(s.gaze_duration - out.moments.mean) > limit) {
      ++out.counts.outlier;
      continue;
    }
    if (p.exclude_punct_num && s.has_punct_or_num) {
      ++out.counts.punct_num;
      continue;
    }
    if (p.exclude_next_punct_num && s.next_has_punct_or_num) {
      ++out.counts.next_punct_num;
      continue;
    }
    if (p.exclude_line_boundary && (s.is_line_first || s.is_line_last)) {
      ++out.counts.line_boundary;
      continue;
    }
    out.corpus.segments.push_back(s);
  }
  out.counts.kept = out.corpus.size();
  if (out.corpus.empty()) throw DomainError("apply_filters: every data point was filtered out");
  return out;
}

Corpus apply_filters(const Corpus& c, const FilterPolicy& p) {
  return apply_filters_with_report(c, p).corpus;
}

CorpusStats corpus_stats(const Corpus& c, const Alignment* alignment) {
  CorpusStats st;
  std::set<std::string_view> articles;
  std::set<std::string_view> subjects;
  std::set<std::pair<std::string_view, int>> sentences;
  std::set<std::tuple<std::string_view, int, int>> segments;
  std::set<std::pair<std::string_view, std::string_view>> reader_pairs;
  double sum = 0.0;
  for (const auto& s : c.segments) {
    articles.insert(s.article_id);
    subjects.insert(s.subject_id);
    sentences.emplace(s.article_id, s.sent_n);
    segments.emplace(s.article_id, s.screen_n, s.segment_n);
    reader_pairs.emplace(s.article_id, s.subject_id);
    sum += s.gaze_duration;
  }
  st.articles = articles.size();
  st.subjects = subjects.size();
  st.sentences = sentences.size();
  st.segments = segments.size();
  st.data_points = c.size();
  st.mean_gd = c.empty() ? 0.0 : sum / static_cast<double>(c.size());
  st.subjects_per_article =
      articles.empty() ? 0.0 : static_cast<double>(reader_pairs.size()) / static_cast<double>(articles.size());
  if (alignment && alignment->segments() > 0) {
    st.mean_subwords_per_segment =
        static_cast<double>(alignment->total_subwords()) / static_cast<double>(alignment->segments());
  }
  return st;
}

TextIndex build_text_index(const Corpus& c) {
  TextIndex idx;
  std::vector<std::string_view> article_order;
  std::unordered_map<std::string_view, std::size_t> article_rank;
  for (const auto& s : c.segments) {
    if (article_rank.emplace(s.article_id, article_order.size()).second) {
      article_order.push_back(s.article_id);
    }
  }
  using Key = std::tuple<std::size_t, int, int>;
  std::map<Key, std::size_t> first_point;
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    const auto& s = c.segments[i];
    first_point.emplace(Key{article_rank[s.article_id], s.screen_n, s.segment_n}, i);
  }
  std::map<Key, std::size_t> position;
  for (const auto& [key, i] : first_point) {
    const auto& s = c.segments[i];
    position.emplace(key, idx.segments.size());
    idx.segments.push_back(TextSegment{s.article_id, s.text, s.screen_n, s.line_n, s.segment_n, s.sent_n,
                                       s.token_n, s.length, s.syn_category, s.sem_category,
                                       s.n_dependents});
  }
  idx.point_to_segment.reserve(c.size());
  for (const auto& s : c.segments) {
    idx.point_to_segment.push_back(position.at(Key{article_rank[s.article_id], s.screen_n, s.segment_n}));
  }

  std::set<std::pair<std::string_view, int>> seen;
  for (std::size_t k = 0; k < idx.segments.size(); ++k) {
    const auto& seg = idx.segments[k];
    if (!idx.sentences.empty() && idx.sentences.back().article_id == seg.article_id &&
        idx.sentences.back().sent_n == seg.sent_n) {
      idx.sentences.back().end = k + 1;
      continue;
    }
    if (!seen.emplace(seg.article_id, seg.sent_n).second) {
      throw DomainError("article " + seg.article_id + ": sentence " + std::to_string(seg.sent_n) +
                        " is not contiguous in reading order");
    }
    idx.sentences.push_back(TextIndex::Sentence{seg.article_id, seg.sent_n, k, k + 1});
  }
  return idx;
}

}  // namespace gazefit
