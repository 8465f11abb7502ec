#include "gazefit/ngram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {
namespace {

constexpr double kLn10 = std::numbers::ln10;
constexpr double kNoProb = -99.0;  // log10 probability written for <s>

NGramModel::Discounts estimate_discounts(const std::unordered_map<std::string, long long>& counts, int n) {
  std::array<long long, 4> t{};
  for (const auto& [k, c] : counts) {
    if (c >= 1 && c <= 4) ++t[c - 1];
  }
  NGramModel::Discounts d;
  if (t[0] > 0 && t[1] > 0 && t[2] > 0 && t[3] > 0) {
    const double y = double(t[0]) / (double(t[0]) + 2.0 * double(t[1]));
    d.d1 = 1.0 - 2.0 * y * double(t[1]) / double(t[0]);
    d.d2 = 2.0 - 3.0 * y * double(t[2]) / double(t[1]);
    d.d3 = 3.0 - 4.0 * y * double(t[3]) / double(t[2]);
    if (d.d1 > 0 && d.d1 < 1 && d.d2 > 0 && d.d2 < 2 && d.d3 > 0 && d.d3 < 3) return d;
  }
  warn("ngram: count-of-count statistics for order " + std::to_string(n) +
       " do not support modified discounts; using a fixed discount of 0.75");
  return NGramModel::Discounts{0.75, 0.75, 0.75, true};
}

double discount_for(const NGramModel::Discounts& d, long long c) {
  if (c <= 0) return 0.0;
  if (c == 1) return d.d1;
  if (c == 2) return d.d2;
  return d.d3;
}

double parse_number(std::string_view s, const std::string& source, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source + ": malformed number '" + std::string(s) + "'", line);
  }
  return v;
}

}  // namespace

std::string NGramModel::key(std::span<const WordId> ids) {
  return std::string(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(WordId));
}

void NGramModel::set_vocab(std::vector<std::string> words) {
  for (auto s : {std::string(kUnknownWord), std::string(kSentenceBegin), std::string(kSentenceEnd)}) {
    words.push_back(s);
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  words_ = std::move(words);
  word_id_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) word_id_.emplace(words_[i], static_cast<WordId>(i));
  unk_ = word_id_.at(std::string(kUnknownWord));
  bos_ = word_id_.at(std::string(kSentenceBegin));
  eos_ = word_id_.at(std::string(kSentenceEnd));
}

NGramModel::WordId NGramModel::id(std::string_view word) const {
  auto it = word_id_.find(std::string(word));
  return it == word_id_.end() ? unk_ : it->second;
}

std::vector<NGramModel::WordId> NGramModel::predictable() const {
  std::vector<WordId> out;
  for (WordId i = 0; i < words_.size(); ++i)
    if (i != bos_) out.push_back(i);
  return out;
}

bool NGramModel::find(std::span<const WordId> ngram, Entry& out) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return false;
  const auto& table = tables_[ngram.size() - 1];
  auto it = table.find(key(ngram));
  if (it == table.end()) return false;
  out = it->second;
  return true;
}

double NGramModel::logprob_ids(std::span<const WordId> context, WordId word) const {
  std::size_t len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_ - 1));
  std::vector<WordId> buf;
  double acc = 0.0;
  for (;;) {
    buf.assign(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    buf.push_back(word);
    Entry e;
    if (find(buf, e)) return (acc + e.log10_prob) * kLn10;
    if (len == 0) return (acc + kNoProb) * kLn10;
    buf.pop_back();
    if (find(buf, e)) acc += e.log10_backoff;
    --len;
  }
}

double NGramModel::logprob(std::span<const std::string> context, std::string_view word) const {
  std::vector<WordId> ids;
  ids.reserve(context.size());
  for (const auto& c : context) ids.push_back(id(c));
  return logprob_ids(ids, id(word));
}

std::vector<double> NGramModel::sentence_surprisals(std::span<const std::string> tokens,
                                                    double* end_surprisal) const {
  std::vector<WordId> history{bos_};
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const WordId w = id(t);
    out.push_back(-logprob_ids(history, w));
    history.push_back(w);
  }
  if (end_surprisal) *end_surprisal = -logprob_ids(history, eos_);
  return out;
}

NGramModel train_kn(const std::vector<std::vector<std::string>>& sentences, int order) {
  using WordId = NGramModel::WordId;
  if (order < 2) throw DomainError("train_kn: order must be >= 2");
  if (sentences.empty()) throw DomainError("train_kn: empty corpus");

  NGramModel m;
  m.order_ = order;
  {
    std::set<std::string> seen;
    for (const auto& s : sentences) seen.insert(s.begin(), s.end());
    seen.erase(std::string(kSentenceBegin));
    m.set_vocab(std::vector<std::string>(seen.begin(), seen.end()));
  }

  const auto N = static_cast<std::size_t>(order);
  std::vector<std::unordered_map<std::string, long long>> raw(N);
  std::vector<WordId> seq;
  for (const auto& s : sentences) {
    seq.assign(1, m.bos_);
    for (const auto& t : s) seq.push_back(m.id(t));
    seq.push_back(m.eos_);
    for (std::size_t i = 1; i < seq.size(); ++i) {
      for (std::size_t n = 1; n <= N && n <= i + 1; ++n) {
        ++raw[n - 1][NGramModel::key(std::span(seq).subspan(i + 1 - n, n))];
      }
    }
  }

  // Adjusted counts: raw at the top order and for n-grams starting with <s>,
  // otherwise the number of distinct left extensions.
  std::vector<std::unordered_map<std::string, long long>> adj(N);
  adj[N - 1] = raw[N - 1];
  for (std::size_t n = N - 1; n >= 1; --n) {
    auto& a = adj[n - 1];
    for (const auto& [k, c] : raw[n - 1]) {
      const auto* ids = reinterpret_cast<const WordId*>(k.data());
      a[k] = ids[0] == m.bos_ ? c : 0;
    }
    for (const auto& [k, c] : raw[n]) {
      a[k.substr(sizeof(WordId))] += 1;
    }
  }

  m.tables_.assign(N, {});
  m.discounts_.clear();
  for (std::size_t n = 1; n <= N; ++n) m.discounts_.push_back(estimate_discounts(adj[n - 1], int(n)));

  // Unigrams, interpolated with the uniform distribution over predictable words.
  {
    const auto& d = m.discounts_[0];
    double total = 0.0;
    std::array<double, 3> nk{};
    for (const auto& [k, c] : adj[0]) {
      total += double(c);
      if (c > 0) nk[std::min<long long>(c, 3) - 1] += 1;
    }
    const double gamma = (d.d1 * nk[0] + d.d2 * nk[1] + d.d3 * nk[2]) / total;
    const auto vocab = m.predictable();
    const double uniform = 1.0 / double(vocab.size());
    for (WordId w : vocab) {
      const WordId one[1] = {w};
      const std::string k = NGramModel::key(one);
      auto it = adj[0].find(k);
      const long long c = it == adj[0].end() ? 0 : it->second;
      const double p = (double(c) - discount_for(d, c)) / total + gamma * uniform;
      m.tables_[0][k] = NGramModel::Entry{std::log10(p), 0.0};
    }
    const WordId bos[1] = {m.bos_};
    m.tables_[0][NGramModel::key(bos)] = NGramModel::Entry{kNoProb, 0.0};
  }

  for (std::size_t n = 2; n <= N; ++n) {
    const auto& d = m.discounts_[n - 1];
    struct ContextStats {
      double total = 0.0;
      std::array<double, 3> nk{};
    };
    std::unordered_map<std::string, ContextStats> ctx;
    const std::size_t ctx_bytes = (n - 1) * sizeof(WordId);
    for (const auto& [k, c] : adj[n - 1]) {
      auto& cs = ctx[k.substr(0, ctx_bytes)];
      cs.total += double(c);
      cs.nk[std::min<long long>(c, 3) - 1] += 1;
    }
    // Sorted keys keep floating-point results independent of hash order.
    std::vector<std::string> keys;
    keys.reserve(adj[n - 1].size());
    for (const auto& [k, c] : adj[n - 1]) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::unordered_map<std::string, NGramModel::Entry> table;
    for (const auto& k : keys) {
      const long long c = adj[n - 1].at(k);
      const auto& cs = ctx.at(k.substr(0, ctx_bytes));
      const double gamma = (d.d1 * cs.nk[0] + d.d2 * cs.nk[1] + d.d3 * cs.nk[2]) / cs.total;
      std::span<const WordId> ids(reinterpret_cast<const WordId*>(k.data()), n);
      const double lower = std::exp(m.logprob_ids(ids.subspan(1, n - 2), ids[n - 1]));
      const double p = (double(c) - discount_for(d, c)) / cs.total + gamma * lower;
      table[k] = NGramModel::Entry{std::log10(p), 0.0};
    }
    for (const auto& [ck, cs] : ctx) {
      const double gamma = (d.d1 * cs.nk[0] + d.d2 * cs.nk[1] + d.d3 * cs.nk[2]) / cs.total;
      auto it = m.tables_[n - 2].find(ck);
      if (it == m.tables_[n - 2].end()) throw Error("train_kn: context missing from lower order");
      it->second.log10_backoff = std::log10(gamma);
    }
    m.tables_[n - 1] = std::move(table);
  }
  return m;
}

void NGramModel::write_arpa(std::ostream& out) const {
  out << "\\data\\\n";
  for (int n = 1; n <= order_; ++n) out << "ngram " << n << "=" << tables_[n - 1].size() << '\n';
  for (int n = 1; n <= order_; ++n) {
    out << "\n\\" << n << "-grams:\n";
    std::vector<std::pair<std::vector<std::string_view>, const Entry*>> rows;
    rows.reserve(tables_[n - 1].size());
    for (const auto& [k, e] : tables_[n - 1]) {
      const auto* ids = reinterpret_cast<const WordId*>(k.data());
      std::vector<std::string_view> words;
      for (int i = 0; i < n; ++i) words.push_back(words_[ids[i]]);
      rows.emplace_back(std::move(words), &e);
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [words, e] : rows) {
      out << tsv::format_double(e->log10_prob) << '\t';
      for (int i = 0; i < n; ++i) out << (i ? " " : "") << words[i];
      if (n < order_) out << '\t' << tsv::format_double(e->log10_backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

std::string NGramModel::arpa_text() const {
  std::ostringstream out;
  write_arpa(out);
  return out.str();
}

void NGramModel::save_arpa(const std::filesystem::path& path) const { tsv::write_atomic(path, arpa_text()); }

NGramModel NGramModel::read_arpa(std::istream& in, const std::string& source) {
  NGramModel m;
  std::vector<std::size_t> declared;
  std::string line;
  std::size_t lineno = 0;
  int section = -1;  // 0 = \data\, n = n-grams
  std::vector<std::vector<std::pair<std::vector<std::string>, Entry>>> rows;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed == "\\data\\") {
      section = 0;
      continue;
    }
    if (trimmed == "\\end\\") {
      ended = true;
      break;
    }
    if (trimmed.front() == '\\') {
      const auto dash = trimmed.find("-grams:");
      if (dash == std::string_view::npos) throw ParseError(source + ": unknown section", lineno);
      section = std::stoi(std::string(trimmed.substr(1, dash - 1)));
      if (section < 1 || section > int(declared.size())) throw ParseError(source + ": undeclared order", lineno);
      continue;
    }
    if (section == 0) {
      if (trimmed.rfind("ngram ", 0) != 0) throw ParseError(source + ": expected 'ngram n=count'", lineno);
      const auto eq = trimmed.find('=');
      const int n = std::stoi(std::string(trimmed.substr(6, eq - 6)));
      if (n != int(declared.size()) + 1) throw ParseError(source + ": orders must be declared in sequence", lineno);
      declared.push_back(std::stoul(std::string(trimmed.substr(eq + 1))));
      rows.emplace_back();
      continue;
    }
    if (section < 1) throw ParseError(source + ": data before \\data\\ header", lineno);
    const auto parts = text::split_whitespace(trimmed);
    const auto n = static_cast<std::size_t>(section);
    if (parts.size() != n + 1 && parts.size() != n + 2) {
      throw ParseError(source + ": expected " + std::to_string(n) + " words", lineno);
    }
    Entry e;
    e.log10_prob = parse_number(parts[0], source, lineno);
    if (parts.size() == n + 2) e.log10_backoff = parse_number(parts[n + 1], source, lineno);
    rows[n - 1].emplace_back(std::vector<std::string>(parts.begin() + 1, parts.begin() + 1 + long(n)), e);
  }
  if (!ended) throw SchemaError(source + ": missing \\end\\ marker");
  if (declared.size() < 1 || rows.size() != declared.size()) throw SchemaError(source + ": empty model");
  for (std::size_t n = 1; n <= declared.size(); ++n) {
    if (rows[n - 1].size() != declared[n - 1]) {
      throw SchemaError(source + ": " + std::to_string(n) + "-gram count does not match the header");
    }
  }

  std::vector<std::string> words;
  for (const auto& [w, e] : rows[0]) words.push_back(w[0]);
  const bool had_unk = std::find(words.begin(), words.end(), std::string(kUnknownWord)) != words.end();
  m.set_vocab(words);
  m.order_ = int(declared.size());
  m.tables_.assign(declared.size(), {});
  for (std::size_t n = 1; n <= declared.size(); ++n) {
    std::vector<WordId> ids(n);
    for (const auto& [w, e] : rows[n - 1]) {
      for (std::size_t i = 0; i < n; ++i) {
        auto it = m.word_id_.find(w[i]);
        if (it == m.word_id_.end()) throw SchemaError(source + ": word '" + w[i] + "' missing from unigrams");
        ids[i] = it->second;
      }
      m.tables_[n - 1][key(ids)] = e;
    }
  }
  if (!had_unk) {
    warn(source + ": no <unk> unigram; unknown words get log10 probability -99");
    const WordId u[1] = {m.unk_};
    m.tables_[0][key(u)] = Entry{kNoProb, 0.0};
  }
  return m;
}

NGramModel NGramModel::load_arpa(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_arpa(in, path.string());
}

double perplexity(std::span<const double> surprisals) {
  if (surprisals.empty()) throw DomainError("perplexity: empty surprisal sequence");
  double sum = 0.0;
  for (double s : surprisals) {
    if (!std::isfinite(s)) throw DomainError("perplexity: non-finite surprisal");
    sum += s;
  }
  return std::exp(sum / static_cast<double>(surprisals.size()));
}

}  // namespace gazefit
