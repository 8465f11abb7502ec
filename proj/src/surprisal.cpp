#include "gazefit/surprisal.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gazefit/error.hpp"
#include "gazefit/ngram.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tokenize.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {

double SurprisalTable::ppl() const {
  const auto v = values();
  return perplexity(v);
}

std::vector<double> SurprisalTable::values() const {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r.surprisal);
  return v;
}

namespace {

SurprisalTable table_from_tsv(const tsv::Table& t, std::string lm_id) {
  const auto c_article = t.require_column("article");
  const auto c_sent = t.require_column("sent");
  const auto c_idx = t.require_column("idx");
  const auto c_sub = t.require_column("subword");
  const auto c_val = t.require_column("surprisal_nats");
  SurprisalTable out;
  out.lm_id = lm_id.empty() ? t.source() : std::move(lm_id);
  out.rows.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    SurprisalRow row;
    row.article_id = std::string(text::trim(t.cell(r, c_article)));
    row.sent = static_cast<int>(t.integer(r, c_sent));
    row.idx = static_cast<int>(t.integer(r, c_idx));
    row.subword = t.cell(r, c_sub);
    row.surprisal = t.number(r, c_val);
    if (row.surprisal < 0) throw ParseError(t.source() + ": negative surprisal", t.line_of(r));
    if (row.subword.empty()) throw ParseError(t.source() + ": empty subword", t.line_of(r));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

SurprisalTable read_surprisal_table(const std::filesystem::path& path, std::string lm_id) {
  return table_from_tsv(tsv::Table::read(path), lm_id.empty() ? path.stem().string() : std::move(lm_id));
}

SurprisalTable parse_surprisal_table(std::istream& in, const std::string& source_name, std::string lm_id) {
  return table_from_tsv(tsv::Table::parse(in, source_name), std::move(lm_id));
}

std::string format_surprisal_table(const SurprisalTable& t) {
  std::string out = "article\tsent\tidx\tsubword\tsurprisal_nats\n";
  for (const auto& r : t.rows) {
    out += r.article_id;
    out += '\t';
    out += std::to_string(r.sent);
    out += '\t';
    out += std::to_string(r.idx);
    out += '\t';
    out += r.subword;
    out += '\t';
    out += tsv::format_double(r.surprisal);
    out += '\n';
  }
  return out;
}

void write_surprisal_table(const SurprisalTable& t, const std::filesystem::path& path) {
  tsv::write_atomic(path, format_surprisal_table(t));
}

std::vector<std::string> validate_surprisal_table(const SurprisalTable& t) {
  std::vector<std::string> problems;
  if (t.rows.empty()) problems.push_back("table has no rows");
  std::map<std::pair<std::string, int>, std::size_t> seen_sentences;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string where = "row " + std::to_string(i + 1) + ": ";
    if (!std::isfinite(r.surprisal) || r.surprisal < 0) problems.push_back(where + "surprisal must be finite and >= 0");
    if (r.subword.empty()) problems.push_back(where + "subword is empty");
    if (r.subword.find_first_of(" \t\n") != std::string::npos) problems.push_back(where + "subword contains whitespace");
    const bool continues = i > 0 && t.rows[i - 1].article_id == r.article_id && t.rows[i - 1].sent == r.sent;
    if (continues) {
      if (r.idx != t.rows[i - 1].idx + 1) problems.push_back(where + "subword index is not contiguous");
    } else {
      if (r.idx != 0) problems.push_back(where + "sentence does not start at index 0");
      if (!seen_sentences.emplace(std::make_pair(r.article_id, r.sent), i).second) {
        problems.push_back(where + "sentence (" + r.article_id + ", " + std::to_string(r.sent) +
                           ") is split across the file");
      }
    }
  }
  return problems;
}

void UnigramCounts::add(const std::string& subword, long long n) {
  counts[subword] += n;
  total += n;
}

UnigramCounts read_unigram_counts(const std::filesystem::path& path) {
  const auto t = tsv::Table::read(path);
  const auto c_sub = t.require_column("subword");
  const auto c_count = t.require_column("count");
  UnigramCounts out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const long long n = t.integer(r, c_count);
    if (n < 0) throw ParseError(t.source() + ": negative count", t.line_of(r));
    out.add(t.cell(r, c_sub), n);
  }
  return out;
}

std::string format_unigram_counts(const UnigramCounts& c) {
  std::string out = "subword\tcount\n";
  for (const auto& [w, n] : c.counts) out += w + "\t" + std::to_string(n) + "\n";
  return out;
}

void write_unigram_counts(const UnigramCounts& c, const std::filesystem::path& path) {
  tsv::write_atomic(path, format_unigram_counts(c));
}

std::vector<double> segment_surprisal(std::span<const double> surprisals, const Alignment& a) {
  std::vector<double> out;
  out.reserve(a.segments());
  for (std::size_t k = 0; k < a.ranges.size(); ++k) {
    const auto& r = a.ranges[k];
    if (r.first > r.last || r.last >= surprisals.size()) {
      throw DomainError("segment_surprisal: range of segment " + std::to_string(k) + " is out of bounds");
    }
    double sum = 0.0;
    for (std::size_t j = r.first; j <= r.last; ++j) sum += surprisals[j];
    out.push_back(sum);
  }
  return out;
}

SpilloverPolicy SpilloverPolicy::for_style(LanguageStyle style) {
  return SpilloverPolicy{style == LanguageStyle::english_like ? 2 : 0};
}

std::vector<SegmentFeatures> spillover_features(std::span<const double> seg_surprisals, SpilloverPolicy policy) {
  if (policy.prev_count != 0 && policy.prev_count != 2) {
    throw DomainError("spillover_features: prev_count must be 0 or 2");
  }
  std::vector<SegmentFeatures> out(seg_surprisals.size());
  for (std::size_t k = 0; k < seg_surprisals.size(); ++k) {
    out[k].surprisal = seg_surprisals[k];
    if (policy.prev_count >= 1 && k >= 1) out[k].surprisal_prev_1 = seg_surprisals[k - 1];
    if (policy.prev_count >= 2 && k >= 2) out[k].surprisal_prev_2 = seg_surprisals[k - 2];
  }
  return out;
}

double freq_feature(std::span<const std::string> segment_subwords, const UnigramCounts& counts) {
  if (segment_subwords.empty()) throw DomainError("freq_feature: segment has no subwords");
  const double denom = static_cast<double>(counts.total) + static_cast<double>(counts.counts.size()) + 1.0;
  double sum = 0.0;
  for (const auto& w : segment_subwords) {
    auto it = counts.counts.find(w);
    const double c = it == counts.counts.end() ? 0.0 : static_cast<double>(it->second);
    sum += std::log((c + 1.0) / denom);
  }
  return sum / static_cast<double>(segment_subwords.size());
}

TextFeatures compute_text_features(const TextIndex& index, const SurprisalTable& table,
                                   const UnigramCounts& counts, SpilloverPolicy policy) {
  std::map<std::pair<std::string_view, int>, std::vector<std::size_t>> by_sentence;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    by_sentence[{table.rows[i].article_id, table.rows[i].sent}].push_back(i);
  }

  TextFeatures tf;
  tf.segments.resize(index.segments.size());
  tf.alignment.ranges.resize(index.segments.size());
  std::size_t used_sentences = 0;
  for (const auto& sent : index.sentences) {
    auto it = by_sentence.find({sent.article_id, sent.sent_n});
    if (it == by_sentence.end()) {
      throw DomainError("surprisal table '" + table.lm_id + "' has no rows for article " + sent.article_id +
                        " sentence " + std::to_string(sent.sent_n));
    }
    ++used_sentences;
    std::vector<std::size_t> rows = it->second;
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return table.rows[a].idx < table.rows[b].idx; });
    std::vector<std::string> subwords;
    subwords.reserve(rows.size());
    for (auto r : rows) subwords.push_back(table.rows[r].subword);
    std::vector<std::string> texts;
    for (std::size_t k = sent.begin; k < sent.end; ++k) texts.push_back(index.segments[k].text);
    Alignment local;
    try {
      local = align(subwords, texts);
    } catch (const AlignmentError& e) {
      throw AlignmentError(std::string(e.what()) + " in article " + sent.article_id + " sentence " +
                               std::to_string(sent.sent_n),
                           sent.begin + e.segment(), e.subword());
    }
    const std::size_t offset = tf.row_order.size();
    tf.row_order.insert(tf.row_order.end(), rows.begin(), rows.end());
    for (std::size_t k = 0; k < local.ranges.size(); ++k) {
      const auto& r = local.ranges[k];
      auto& f = tf.segments[sent.begin + k];
      tf.alignment.ranges[sent.begin + k] = SubwordRange{offset + r.first, offset + r.last};
      f.surprisal = 0.0;
      for (std::size_t j = r.first; j <= r.last; ++j) f.surprisal += table.rows[rows[j]].surprisal;
      f.freq = freq_feature(std::span(subwords).subspan(r.first, r.size()), counts);
      f.length = index.segments[sent.begin + k].length;
      f.n_subwords = r.size();
    }
  }
  if (used_sentences != by_sentence.size()) {
    warn("surprisal table '" + table.lm_id + "' has " + std::to_string(by_sentence.size() - used_sentences) +
         " sentences that do not occur in the corpus");
  }

  // Lags run over each article's reading order.
  std::size_t start = 0;
  while (start < index.segments.size()) {
    std::size_t end = start;
    while (end < index.segments.size() && index.segments[end].article_id == index.segments[start].article_id) ++end;
    std::vector<double> seq;
    for (std::size_t k = start; k < end; ++k) seq.push_back(tf.segments[k].surprisal);
    const auto lags = spillover_features(seq, policy);
    for (std::size_t k = start; k < end; ++k) {
      auto& f = tf.segments[k];
      f.surprisal_prev_1 = lags[k - start].surprisal_prev_1;
      f.surprisal_prev_2 = lags[k - start].surprisal_prev_2;
      if (k > start) {
        f.freq_prev_1 = tf.segments[k - 1].freq;
        f.length_prev_1 = tf.segments[k - 1].length;
      }
    }
    start = end;
  }
  return tf;
}

UnigramCounts counts_from_table(const SurprisalTable& t) {
  UnigramCounts c;
  for (const auto& r : t.rows) c.add(r.subword);
  return c;
}

}  // namespace gazefit
