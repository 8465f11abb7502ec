#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "gazefit/error.hpp"
#include "gazefit/ngram.hpp"
#include "gazefit/surprisal.hpp"
#include "gazefit/tokenize.hpp"

using namespace gazefit;

namespace {

SurprisalTable table_of(const std::vector<std::pair<std::string, double>>& rows) {
  SurprisalTable t;
  t.lm_id = "t";
  int idx = 0;
  for (const auto& [w, s] : rows) t.rows.push_back({"a1", 1, idx++, w, s});
  return t;
}

}  // namespace

TEST(SegmentSurprisal, SumsOverRanges) {
  Alignment a;
  a.ranges = {{0, 0}, {1, 2}};
  const std::vector<double> s{1.386, 0.693, 0.693};
  const auto seg = segment_surprisal(s, a);
  ASSERT_EQ(seg.size(), 2u);
  EXPECT_DOUBLE_EQ(seg[0], 1.386);
  EXPECT_DOUBLE_EQ(seg[1], 1.386);
}

TEST(SegmentSurprisal, SegmentsAddToSentenceNll) {
  // Five-token sentence under a small trigram model; the joint probability is
  // computed directly as the product of conditionals.
  const std::vector<std::vector<std::string>> train{{"▁th", "e", "▁ca", "t", "▁sat"}, {"▁th", "e", "▁sat"}};
  const auto lm = train_kn(train, 3);
  const std::vector<std::string> toks{"▁th", "e", "▁ca", "t", "▁sat"};
  const auto a = align(toks, {"the", "cat", "sat"});
  const auto s = lm.sentence_surprisals(toks);
  const auto seg = segment_surprisal(s, a);
  double joint = 1.0;
  std::vector<std::string> ctx{"<s>"};
  for (const auto& w : toks) {
    joint *= std::exp(lm.logprob(ctx, w));
    ctx.push_back(w);
  }
  EXPECT_NEAR(seg[0] + seg[1] + seg[2], -std::log(joint), 1e-12);
  EXPECT_NEAR(seg[1], s[2] + s[3], 0.0);
}

TEST(Spillover, LagsWithinSequence) {
  const std::vector<double> s{3, 5, 7};
  const auto f = spillover_features(s, SpilloverPolicy{2});
  EXPECT_FALSE(f[0].surprisal_prev_1.has_value());
  EXPECT_FALSE(f[0].surprisal_prev_2.has_value());
  EXPECT_DOUBLE_EQ(*f[2].surprisal_prev_1, 5.0);
  EXPECT_DOUBLE_EQ(*f[2].surprisal_prev_2, 3.0);
  EXPECT_FALSE(f[1].surprisal_prev_2.has_value());
  const auto none = spillover_features(s, SpilloverPolicy{0});
  EXPECT_FALSE(none[2].surprisal_prev_1.has_value());
  EXPECT_EQ(SpilloverPolicy::for_style(LanguageStyle::japanese_like).prev_count, 0);
  EXPECT_EQ(SpilloverPolicy::for_style(LanguageStyle::english_like).prev_count, 2);
}

TEST(Frequency, AddOneSmoothing) {
  UnigramCounts c;
  c.add("a", 9);
  // (0 + 1) / (9 + 1 + 1) for the unseen subword, (9 + 1) / 11 for a.
  const std::vector<std::string> oov{"q"}, seen{"a"}, both{"a", "q"};
  EXPECT_NEAR(freq_feature(oov, c), std::log(1.0 / 11.0), 1e-12);
  EXPECT_NEAR(freq_feature(seen, c), std::log(10.0 / 11.0), 1e-12);
  EXPECT_NEAR(freq_feature(both, c), 0.5 * (std::log(10.0 / 11.0) + std::log(1.0 / 11.0)), 1e-12);
}

TEST(Frequency, SingleSubwordLogFrequency) {
  // |V| = 2: (0 + 1) / (97 + 2 + 1) = 0.01.
  UnigramCounts d;
  d.add("x", 0);
  d.add("y", 97);
  const std::vector<std::string> x{"x"};
  EXPECT_NEAR(freq_feature(x, d), std::log(1.0 / 100.0), 1e-12);
}

TEST(SurprisalTable, PplIsExpMean) {
  const auto t = table_of({{"a", 0.5}, {"b", 1.5}, {"c", 2.5}});
  EXPECT_NEAR(t.ppl(), std::exp(1.5), 1e-12);
  EXPECT_NEAR(t.ppl(), perplexity(t.values()), 1e-12);
}

TEST(SurprisalTable, FormatRoundTrip) {
  const auto t = table_of({{"▁a", 0.1}, {"b", 1.0 / 3.0}});
  std::istringstream in(format_surprisal_table(t));
  const auto back = parse_surprisal_table(in, "mem", "t");
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].surprisal, 1.0 / 3.0);
  EXPECT_EQ(back.rows[0].subword, "▁a");
  EXPECT_EQ(format_surprisal_table(back), format_surprisal_table(t));
}

TEST(SurprisalTable, ParseErrors) {
  std::istringstream missing("article\tsent\tidx\tsubword\nx\t1\t0\ta\n");
  EXPECT_THROW(parse_surprisal_table(missing, "mem"), SchemaError);
  std::istringstream bad("article\tsent\tidx\tsubword\tsurprisal_nats\nx\t1\t0\ta\tnope\n");
  EXPECT_THROW(parse_surprisal_table(bad, "mem"), ParseError);
}

TEST(Validator, CleanTablePasses) {
  EXPECT_TRUE(validate_surprisal_table(table_of({{"a", 0.1}, {"b", 0.0}, {"c", 3.0}})).empty());
}

TEST(Validator, FlagsEachProblem) {
  auto gap = table_of({{"a", 0.1}, {"b", 0.2}});
  gap.rows[1].idx = 2;
  EXPECT_FALSE(validate_surprisal_table(gap).empty());
  auto negative = table_of({{"a", -0.5}});
  EXPECT_FALSE(validate_surprisal_table(negative).empty());
  auto nan = table_of({{"a", std::nan("")}});
  EXPECT_FALSE(validate_surprisal_table(nan).empty());
  auto first = table_of({{"a", 0.1}});
  first.rows[0].idx = 1;
  EXPECT_FALSE(validate_surprisal_table(first).empty());
  auto empty_sub = table_of({{"", 0.1}});
  EXPECT_FALSE(validate_surprisal_table(empty_sub).empty());
}

TEST(Validator, AcceptsManySentences) {
  SurprisalTable t;
  for (int s = 1; s <= 3; ++s)
    for (int i = 0; i < 4; ++i) t.rows.push_back({"a1", s, i, "w", std::log(2.0)});
  t.rows.push_back({"a2", 1, 0, "w", std::log(2.0)});
  EXPECT_TRUE(validate_surprisal_table(t).empty());
  EXPECT_NEAR(t.ppl(), 2.0, 1e-12);
}
