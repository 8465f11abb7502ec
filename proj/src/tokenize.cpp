#include "gazefit/tokenize.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {
namespace {

std::string pair_key(std::string_view a, std::string_view b) {
  std::string k;
  k.reserve(a.size() + b.size() + 1);
  k.append(a);
  k.push_back('\x1F');
  k.append(b);
  return k;
}

std::string strip_whitespace(std::string_view s) {
  std::string out;
  for (char ch : s)
    if (ch != ' ' && ch != '\t' && ch != '\n' && ch != '\r') out.push_back(ch);
  return out;
}

}  // namespace

BpeModel::BpeModel(std::vector<std::string> alphabet,
                   std::vector<std::pair<std::string, std::string>> merges, double character_coverage)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)), coverage_(character_coverage) {
  index();
}

void BpeModel::index() {
  vocab_.clear();
  symbol_id_.clear();
  merge_rank_.clear();
  auto add = [this](const std::string& s) {
    if (symbol_id_.emplace(s, vocab_.size()).second) vocab_.push_back(s);
  };
  for (const auto& a : alphabet_) add(a);
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [l, rr] = merges_[r];
    if (!symbol_id_.count(l) || !symbol_id_.count(rr)) {
      throw DomainError("bpe: merge " + std::to_string(r) + " uses a symbol not yet in the vocabulary");
    }
    merge_rank_.emplace(pair_key(l, rr), r);
    add(l + rr);
  }
}

bool BpeModel::contains(std::string_view symbol) const { return symbol_id_.count(std::string(symbol)) > 0; }

std::vector<std::string> BpeModel::encode_word(std::string_view word) const {
  std::vector<std::string> syms;
  syms.emplace_back(kWordBoundary);
  for (auto& ch : text::split_chars(word)) syms.push_back(std::move(ch));
  while (syms.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank_.find(pair_key(syms[i], syms[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    const auto& [l, r] = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size(); ++i) {
      if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
        next.push_back(l + r);
        ++i;
      } else {
        next.push_back(std::move(syms[i]));
      }
    }
    syms = std::move(next);
  }
  return syms;
}

std::vector<std::string> BpeModel::encode(std::string_view input) const {
  std::vector<std::string> out;
  for (const auto& word : text::split_whitespace(input)) {
    auto piece = encode_word(word);
    out.insert(out.end(), std::make_move_iterator(piece.begin()), std::make_move_iterator(piece.end()));
  }
  return out;
}

std::string BpeModel::merges_text() const {
  std::string out;
  for (const auto& [l, r] : merges_) out += l + " " + r + "\n";
  return out;
}

std::string BpeModel::vocab_text() const {
  std::ostringstream out;
  out << "#coverage " << tsv::format_double(coverage_) << " alphabet " << alphabet_.size() << '\n';
  for (const auto& v : vocab_) out << v << '\n';
  return out.str();
}

void BpeModel::save(const std::filesystem::path& prefix) const {
  auto merges_path = prefix;
  merges_path += ".merges";
  auto vocab_path = prefix;
  vocab_path += ".vocab";
  tsv::write_atomic(merges_path, merges_text());
  tsv::write_atomic(vocab_path, vocab_text());
}

BpeModel BpeModel::load(const std::filesystem::path& prefix) {
  auto merges_path = prefix;
  merges_path += ".merges";
  auto vocab_path = prefix;
  vocab_path += ".vocab";
  std::ifstream vin(vocab_path, std::ios::binary);
  if (!vin) throw Error("cannot open " + vocab_path.string());
  std::string line;
  if (!std::getline(vin, line) || line.rfind("#coverage ", 0) != 0) {
    throw SchemaError(vocab_path.string() + ": missing '#coverage' header");
  }
  const auto head = text::split_whitespace(line);
  if (head.size() != 4) throw SchemaError(vocab_path.string() + ": malformed header");
  const double coverage = std::stod(head[1]);
  const std::size_t n_alpha = std::stoul(head[3]);
  std::vector<std::string> alphabet;
  while (alphabet.size() < n_alpha && std::getline(vin, line)) alphabet.push_back(line);
  if (alphabet.size() != n_alpha) throw SchemaError(vocab_path.string() + ": truncated alphabet");

  std::ifstream min(merges_path, std::ios::binary);
  if (!min) throw Error("cannot open " + merges_path.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::size_t lineno = 0;
  while (std::getline(min, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw ParseError(merges_path.string() + ": expected 'left right'", lineno);
    }
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeModel(std::move(alphabet), std::move(merges), coverage);
}

BpeModel train_bpe(const std::vector<std::string>& lines, std::size_t vocab_size, double character_coverage) {
  if (!(character_coverage > 0.0 && character_coverage <= 1.0)) {
    throw DomainError("bpe: character coverage must lie in (0, 1]");
  }
  std::map<std::string, long long> word_freq;
  for (const auto& l : lines)
    for (const auto& w : text::split_whitespace(l)) ++word_freq[w];

  // Character frequencies, boundary marker included once per word occurrence.
  std::map<std::string, long long> char_freq;
  long long total_chars = 0;
  for (const auto& [w, f] : word_freq) {
    char_freq[std::string(kWordBoundary)] += f;
    total_chars += f;
    for (const auto& ch : text::split_chars(w)) {
      char_freq[ch] += f;
      total_chars += f;
    }
  }
  std::vector<std::pair<std::string, long long>> by_freq(char_freq.begin(), char_freq.end());
  std::stable_sort(by_freq.begin(), by_freq.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> alphabet;
  long long covered = 0;
  for (const auto& [ch, f] : by_freq) {
    if (!alphabet.empty() &&
        static_cast<double>(covered) >= character_coverage * static_cast<double>(total_chars)) {
      break;
    }
    alphabet.push_back(ch);
    covered += f;
  }
  if (vocab_size < alphabet.size()) {
    throw DomainError("bpe: vocab_size " + std::to_string(vocab_size) + " is smaller than the alphabet (" +
                      std::to_string(alphabet.size()) + " symbols)");
  }

  std::vector<std::string> symbols(alphabet.begin(), alphabet.end());
  std::unordered_map<std::string, int> symbol_id;
  for (std::size_t i = 0; i < symbols.size(); ++i) symbol_id.emplace(symbols[i], static_cast<int>(i));

  struct Word {
    std::vector<int> syms;  // -1 marks a character outside the alphabet
    long long freq;
  };
  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) {
    Word word{{}, f};
    word.syms.push_back(symbol_id.at(std::string(kWordBoundary)));
    for (const auto& ch : text::split_chars(w)) {
      auto it = symbol_id.find(ch);
      word.syms.push_back(it == symbol_id.end() ? -1 : it->second);
    }
    words.push_back(std::move(word));
  }

  using Pair = std::pair<int, int>;
  std::map<Pair, long long> pair_count;
  std::map<Pair, std::unordered_set<std::size_t>> pair_words;
  auto for_each_pair = [](const Word& w, auto&& fn) {
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      if (w.syms[i] >= 0 && w.syms[i + 1] >= 0) fn(Pair{w.syms[i], w.syms[i + 1]});
    }
  };
  // Ordered by descending count, then lexicographic (left, right) text.
  struct Candidate {
    long long count;
    std::string left, right;
    Pair pair;
    bool operator<(const Candidate& o) const {
      if (count != o.count) return count > o.count;
      return std::tie(left, right) < std::tie(o.left, o.right);
    }
  };
  std::set<Candidate> queue;
  auto candidate = [&](const Pair& p, long long c) { return Candidate{c, symbols[p.first], symbols[p.second], p}; };

  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    for_each_pair(words[wi], [&](const Pair& p) {
      pair_count[p] += words[wi].freq;
      pair_words[p].insert(wi);
    });
  }
  for (const auto& [p, c] : pair_count) queue.insert(candidate(p, c));

  std::vector<std::pair<std::string, std::string>> merges;
  while (symbols.size() < vocab_size && !queue.empty()) {
    const Candidate best = *queue.begin();
    const std::string merged = best.left + best.right;
    merges.emplace_back(best.left, best.right);
    int new_id;
    if (auto it = symbol_id.find(merged); it != symbol_id.end()) {
      new_id = it->second;
    } else {
      new_id = static_cast<int>(symbols.size());
      symbols.push_back(merged);
      symbol_id.emplace(merged, new_id);
    }

    std::map<Pair, long long> delta;
    const auto affected = pair_words[best.pair];
    std::vector<std::size_t> ordered(affected.begin(), affected.end());
    std::sort(ordered.begin(), ordered.end());
    for (std::size_t wi : ordered) {
      Word& w = words[wi];
      for_each_pair(w, [&](const Pair& p) { delta[p] -= w.freq; });
      std::vector<int> next;
      next.reserve(w.syms.size());
      for (std::size_t i = 0; i < w.syms.size(); ++i) {
        if (i + 1 < w.syms.size() && w.syms[i] == best.pair.first && w.syms[i + 1] == best.pair.second) {
          next.push_back(new_id);
          ++i;
        } else {
          next.push_back(w.syms[i]);
        }
      }
      w.syms = std::move(next);
      for_each_pair(w, [&](const Pair& p) {
        delta[p] += w.freq;
        pair_words[p].insert(wi);
      });
    }
    for (const auto& [p, d] : delta) {
      if (d == 0) continue;
      auto& c = pair_count[p];
      if (c > 0) queue.erase(candidate(p, c));
      c += d;
      if (c > 0) {
        queue.insert(candidate(p, c));
      } else {
        pair_count.erase(p);
        pair_words.erase(p);
      }
    }
  }
  return BpeModel(std::move(alphabet), std::move(merges), character_coverage);
}

std::string_view strip_boundary(std::string_view subword) {
  if (subword.substr(0, kWordBoundary.size()) == kWordBoundary) subword.remove_prefix(kWordBoundary.size());
  return subword;
}

std::string detokenize(const std::vector<std::string>& subwords) {
  std::string out;
  for (const auto& sw : subwords) {
    std::string_view piece = sw;
    if (piece.substr(0, kWordBoundary.size()) == kWordBoundary) {
      if (!out.empty()) out.push_back(' ');
      piece.remove_prefix(kWordBoundary.size());
    }
    out.append(piece);
  }
  return out;
}

Alignment align(const std::vector<std::string>& subwords, const std::vector<std::string>& segments) {
  Alignment a;
  a.ranges.reserve(segments.size());
  std::vector<std::string> targets;
  targets.reserve(segments.size());
  for (const auto& s : segments) {
    targets.push_back(strip_whitespace(s));
    if (targets.back().empty()) throw DomainError("align: segment " + std::to_string(targets.size() - 1) + " is empty");
  }
  std::size_t k = 0, pos = 0, start = 0;
  bool open = false;  // a bare boundary marker opens a segment without consuming text
  for (std::size_t j = 0; j < subwords.size(); ++j) {
    const auto piece = strip_boundary(subwords[j]);
    if (k >= targets.size()) throw AlignmentError("align: subwords extend past the last segment", k, j);
    if (!open) {
      start = j;
      open = true;
    }
    const auto& target = targets[k];
    if (pos + piece.size() > target.size()) {
      throw AlignmentError("align: subword straddles a segment boundary", k, j);
    }
    if (target.compare(pos, piece.size(), piece) != 0) {
      throw AlignmentError("align: subword text does not match the segment", k, j);
    }
    pos += piece.size();
    if (pos == target.size()) {
      a.ranges.push_back(SubwordRange{start, j});
      ++k;
      pos = 0;
      open = false;
    }
  }
  if (k != targets.size()) throw AlignmentError("align: subwords end before the last segment", k, subwords.size());
  return a;
}

}  // namespace gazefit
