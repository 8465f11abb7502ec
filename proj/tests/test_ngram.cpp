#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gazefit/error.hpp"
#include "gazefit/ngram.hpp"

using namespace gazefit;

namespace {

std::vector<std::vector<std::string>> two_sentences() { return {{"a", "b"}, {"a", "b"}}; }

std::vector<std::vector<std::string>> toy_corpus(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> words;
  for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
  std::vector<double> weights;
  for (int i = 0; i < 40; ++i) weights.push_back(1.0 / (i + 1));
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::uniform_int_distribution<int> len(3, 12);
  std::vector<std::vector<std::string>> out(n);
  for (auto& s : out) {
    const int k = len(rng);
    std::string prev;
    for (int j = 0; j < k; ++j) {
      // Some local structure so higher orders carry information.
      std::string w = (!prev.empty() && rng() % 3 == 0) ? "w" + std::to_string((std::stoi(prev.substr(1)) + 1) % 40)
                                                        : words[std::size_t(pick(rng))];
      s.push_back(w);
      prev = w;
    }
  }
  return out;
}

}  // namespace

// Bigram model on "<s> a b </s>" twice. Every count is 1 or 2 so the discount
// estimates are degenerate and D = 0.75 at every order.
//   unigram: continuation counts a:1 b:1 </s>:1 over 3 bigram types; the 0.75 * 3 / 3
//            leftover is spread over 4 predictable words (a, b, </s>, <unk>):
//            p(a) = (1 - 0.75) / 3 + 0.75 / 4 = 0.2708333...
//   bigram:  c(a b) = 2, c(a) = 2, one continuation type: gamma(a) = 0.75 / 2
//            p(b|a) = (2 - 0.75) / 2 + 0.375 * p(b) = 0.7265625
//   backoff: (b, a) unseen, gamma(b) = 0.375: p(a|b) = 0.375 * p(a) = 0.1015625
TEST(KneserNey, HandComputedBigram) {
  const auto lm = train_kn(two_sentences(), 2);
  const double p_uni = 0.25 / 3.0 + 0.75 / 4.0;
  const double p_ba = 1.25 / 2.0 + 0.375 * p_uni;
  const double p_ab = 0.375 * p_uni;
  const std::vector<std::string> none, ctx_a{"a"}, ctx_b{"b"};
  EXPECT_NEAR(std::exp(lm.logprob(none, "a")), p_uni, 1e-9);
  EXPECT_NEAR(std::exp(lm.logprob(ctx_a, "b")), p_ba, 1e-9);
  EXPECT_NEAR(std::exp(lm.logprob(ctx_b, "a")), p_ab, 1e-9);
  EXPECT_NEAR(p_ba, 0.7265625, 1e-12);
  // b is the most probable continuation of a.
  for (const char* w : {"a", "</s>", "<unk>"}) EXPECT_LT(lm.logprob(ctx_a, w), lm.logprob(ctx_a, "b"));
}

TEST(KneserNey, DegenerateSingleSymbol) {
  const std::vector<std::vector<std::string>> c(50, std::vector<std::string>(20, "x"));
  const auto lm = train_kn(c, 3);
  const std::vector<std::string> ctx{"x", "x"};
  EXPECT_GT(std::exp(lm.logprob(ctx, "x")), 0.9);
}

TEST(KneserNey, NormalizedOverVocabulary) {
  const auto corpus = toy_corpus(1000, 5);
  const auto lm = train_kn(corpus, 3);
  std::mt19937_64 rng(17);
  const auto& vocab = lm.vocab();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> ctx;
    if (trial % 4 == 0) ctx.push_back("<s>");
    while (ctx.size() < 2) ctx.push_back(vocab[rng() % vocab.size()]);
    if (ctx[1] == "<s>") ctx[1] = "w0";
    double mass = 0.0;
    for (auto id : lm.predictable()) mass += std::exp(lm.logprob(ctx, vocab[id]));
    EXPECT_NEAR(mass, 1.0, 1e-6) << ctx[0] << " " << ctx[1];
  }
}

TEST(KneserNey, NovelContextBacksOffToUnigram) {
  const auto lm = train_kn(toy_corpus(200, 3), 3);
  const std::vector<std::string> novel{"zz", "yy"}, none;
  for (const char* w : {"w0", "w5", "</s>"}) EXPECT_DOUBLE_EQ(lm.logprob(novel, w), lm.logprob(none, w));
}

TEST(KneserNey, StoredNgramReturnedExactly) {
  const auto lm = train_kn(toy_corpus(200, 3), 3);
  const auto corpus = toy_corpus(200, 3);
  const auto& s = corpus.front();
  const std::vector<NGramModel::WordId> ids{lm.id(s[0]), lm.id(s[1]), lm.id(s[2])};
  NGramModel::Entry e;
  ASSERT_TRUE(lm.find(ids, e));
  const std::vector<std::string> ctx{s[0], s[1]};
  EXPECT_EQ(lm.logprob(ctx, s[2]), e.log10_prob * std::log(10.0));
}

TEST(KneserNey, ArpaRoundTripIsBitStable) {
  const auto corpus = toy_corpus(300, 9);
  const auto lm = train_kn(corpus, 4);
  std::istringstream in(lm.arpa_text());
  const auto back = NGramModel::read_arpa(in, "mem");
  EXPECT_EQ(back.arpa_text(), lm.arpa_text());
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& s = corpus[i];
    const auto a = lm.sentence_surprisals(s), b = back.sentence_surprisals(s);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j], b[j]);
  }
}

TEST(KneserNey, TrainingIsDeterministic) {
  const auto corpus = toy_corpus(300, 11);
  EXPECT_EQ(train_kn(corpus, 3).arpa_text(), train_kn(corpus, 3).arpa_text());
}

TEST(KneserNey, SentenceSurprisalsMatchChainRule) {
  const auto lm = train_kn(toy_corpus(300, 2), 3);
  const std::vector<std::string> s{"w1", "w2", "w3", "w0"};
  double end = 0.0;
  const auto v = lm.sentence_surprisals(s, &end);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[0], -lm.logprob(std::vector<std::string>{"<s>"}, "w1"), 1e-12);
  EXPECT_NEAR(v[2], -lm.logprob(std::vector<std::string>{"w1", "w2"}, "w3"), 1e-12);
  EXPECT_NEAR(end, -lm.logprob(std::vector<std::string>{"w3", "w0"}, "</s>"), 1e-12);
}

TEST(Perplexity, Definitions) {
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(perplexity(zeros), 1.0);
  const std::vector<double> uniform(7, std::log(50.0));
  EXPECT_NEAR(perplexity(uniform), 50.0, 1e-9);
  // (0.5 * 0.125) ^ (-1/2) = 4
  const std::vector<double> two{-std::log(0.5), -std::log(0.125)};
  EXPECT_NEAR(perplexity(two), 4.0, 1e-12);
  EXPECT_THROW(perplexity(std::vector<double>{}), DomainError);
  EXPECT_THROW(perplexity(std::vector<double>{1.0, NAN}), DomainError);
}
