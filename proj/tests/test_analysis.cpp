#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gazefit/analysis.hpp"
#include "gazefit/error.hpp"
#include "gazefit/synth.hpp"

using namespace gazefit;

namespace {

LMRecord record(const std::string& id, double ppl, double delta, Architecture a = Architecture::trans_lg,
                DataSize d = DataSize::lg, long long updates = 1000) {
  LMRecord r;
  r.lm_id = id;
  r.ppl = ppl;
  r.delta_loglik = delta;
  r.architecture = a;
  r.data_size = d;
  r.updates = updates;
  return r;
}

// `subjects` readers of `sentences` sentences of `len` segments each.
Corpus position_corpus(int subjects, int sentences, int len, double intercept, double slope, double noise,
                       unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Corpus c;
  for (int s = 0; s < subjects; ++s)
    for (int k = 0; k < sentences; ++k)
      for (int t = 1; t <= len; ++t) {
        Segment seg;
        seg.article_id = "a";
        seg.subject_id = "s" + std::to_string(s);
        seg.text = "x";
        seg.sent_n = k + 1;
        seg.token_n = t;
        seg.segment_n = k * len + t;
        seg.gaze_duration = intercept + slope * t + noise * z(rng);
        c.segments.push_back(seg);
      }
  return c;
}

}  // namespace

TEST(Spearman, PerfectOrderings) {
  const std::vector<double> x{1, 2, 3, 4, 5}, up{2, 4, 8, 16, 32}, down{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(x, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> xs{1, 2, 2, 4}, ys{10, 20, 30, 40};
  // Ranks: x -> 1, 2.5, 2.5, 4 and y -> 1, 2, 3, 4. Centered at 2.5:
  // x: -1.5, 0, 0, 1.5 and y: -1.5, -0.5, 0.5, 1.5.
  // cov = 2.25 + 2.25 = 4.5, |x|^2 = 4.5, |y|^2 = 5.
  const double expect = 4.5 / std::sqrt(4.5 * 5.0);
  EXPECT_NEAR(spearman(xs, ys), expect, 1e-12);
  const auto r = average_ranks(xs);
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<double> x, y, ex, cube;
  for (int i = 0; i < 30; ++i) {
    x.push_back(z(rng));
    y.push_back(x.back() + z(rng));
    ex.push_back(std::exp(x.back()));
    cube.push_back(y.back() * y.back() * y.back());
  }
  EXPECT_NEAR(spearman(x, y), spearman(ex, cube), 1e-12);
}

TEST(Spearman, RejectsBadInput) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, flat{1, 1, 1}, one{1};
  EXPECT_THROW(spearman(a, b), DomainError);
  EXPECT_THROW(spearman(a, flat), DomainError);
  EXPECT_THROW(spearman(one, one), DomainError);
}

TEST(SuiteReport, MonotoneSuite) {
  std::vector<LMRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(record("m" + std::to_string(i), 30.0 * std::pow(2.0, i), 0.05 - 0.005 * i));
  const auto r = suite_report(recs, 400.0);
  EXPECT_DOUBLE_EQ(r.rho, -1.0);
  EXPECT_EQ(r.n_below + r.n_above, 6u);
}

TEST(SuiteReport, UShapedSplitsHaveOppositeSigns) {
  std::vector<LMRecord> recs;
  const double ppl[] = {20, 50, 100, 200, 350, 600, 1000, 2000, 5000};
  const double delta[] = {0.01, 0.02, 0.03, 0.035, 0.04, 0.03, 0.025, 0.01, 0.005};
  for (int i = 0; i < 9; ++i) recs.push_back(record("u" + std::to_string(i), ppl[i], delta[i]));
  const auto r = suite_report(recs, 400.0);
  ASSERT_TRUE(r.rho_below && r.rho_above);
  EXPECT_GT(*r.rho_below, 0.0);
  EXPECT_LT(*r.rho_above, 0.0);
  EXPECT_EQ(r.n_below, 5u);
  EXPECT_EQ(r.n_above, 4u);
}

TEST(SuiteReport, TooFewRecords) {
  std::vector<LMRecord> recs{record("a", 10, 0.1), record("b", 20, 0.05)};
  EXPECT_THROW(suite_report(recs), DomainError);
}

TEST(SuiteReport, EmptySplitOmitted) {
  std::vector<LMRecord> recs{record("a", 10, 0.1), record("b", 20, 0.05), record("c", 30, 0.02)};
  const auto r = suite_report(recs, 400.0);
  EXPECT_FALSE(r.rho_above.has_value());
  ASSERT_TRUE(r.rho_below.has_value());
  EXPECT_DOUBLE_EQ(*r.rho_below, -1.0);
}

namespace {

std::vector<LMRecord> factor_records(const std::function<double(const LMRecord&)>& power) {
  std::vector<LMRecord> recs;
  const Architecture archs[] = {Architecture::trans_lg, Architecture::trans_sm, Architecture::lstm};
  const DataSize sizes[] = {DataSize::lg, DataSize::md, DataSize::sm};
  const long long updates[] = {1000, 10000, 100000, 1000000};
  int i = 0;
  for (auto a : archs)
    for (auto d : sizes)
      for (auto u : updates) {
        auto r = record("lm" + std::to_string(i++), 100.0, 0.0, a, d, u);
        r.delta_loglik = power(r);
        recs.push_back(r);
      }
  return recs;
}

}  // namespace

TEST(FactorRegression, ConstantPowerHasZeroSlopes) {
  const auto recs = factor_records([](const LMRecord&) { return 0.02; });
  const auto f = factor_regression(recs);
  for (std::size_t c = 1; c < f.fit.columns.size(); ++c) EXPECT_NEAR(f.fit.beta(Eigen::Index(c)), 0.0, 1e-10);
  EXPECT_NEAR(f.fit.beta(0), 0.02, 1e-12);
}

TEST(FactorRegression, RecoversUpdatesSlope) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1e-3);
  const auto recs = factor_records([&](const LMRecord& r) { return std::log(double(r.updates)) + z(rng); });
  const auto f = factor_regression(recs);
  const auto it = std::find(f.fit.columns.begin(), f.fit.columns.end(), "log_updates");
  ASSERT_NE(it, f.fit.columns.end());
  const auto k = Eigen::Index(it - f.fit.columns.begin());
  EXPECT_NEAR(f.fit.beta(k), 1.0, 1e-3);
  EXPECT_LT(f.fit.p_value(k), 1e-6);
  EXPECT_EQ(f.n, recs.size());
}

TEST(FactorRegression, ExcludesNgramRecords) {
  auto recs = factor_records([](const LMRecord& r) { return 0.001 * std::log(double(r.updates)); });
  recs.push_back(record("kn", 300, 0.01, Architecture::ngram, DataSize::lg, 0));
  const auto f = factor_regression(recs);
  EXPECT_EQ(f.excluded, 1u);
  EXPECT_EQ(f.n, recs.size() - 1);
}

TEST(DataSize, RelativeSizes) {
  EXPECT_DOUBLE_EQ(relative_data_size(DataSize::lg), 1.0);
  EXPECT_DOUBLE_EQ(relative_data_size(DataSize::md), 0.1);
  EXPECT_DOUBLE_EQ(relative_data_size(DataSize::sm), 0.01);
  EXPECT_EQ(parse_data_size("md"), DataSize::md);
  EXPECT_EQ(parse_architecture("lstm"), Architecture::lstm);
  EXPECT_THROW(parse_architecture("rnn"), Error);
}

TEST(Uid, ConstantGazeDuration) {
  const auto c = position_corpus(3, 4, 8, 250.0, 0.0, 0.0, 1);
  const auto u = uid_stats(c);
  EXPECT_EQ(u.cv, 0.0);
  EXPECT_NEAR(u.position_slope, 0.0, 1e-9);
  EXPECT_NEAR(u.position_slope_p, 1.0, 1e-9);
  for (const auto& p : u.position_curve) EXPECT_NEAR(p.value, 250.0, 1e-6);
}

TEST(Uid, CvIsScaleInvariant) {
  auto c = position_corpus(4, 5, 8, 250.0, -5.0, 30.0, 2);
  const double cv = uid_stats(c).cv;
  for (auto& s : c.segments) s.gaze_duration *= 3.7;
  EXPECT_NEAR(uid_stats(c).cv, cv, 1e-12);
}

TEST(Uid, DecreasingPositionCurve) {
  const auto c = position_corpus(20, 10, 12, 500.0, -20.0, 40.0, 3);
  const auto u = uid_stats(c);
  EXPECT_EQ(u.curve_method, "pspline");
  EXPECT_LT(u.position_slope_p, 0.05);
  EXPECT_NEAR(u.position_slope, -20.0, 2.0);
  ASSERT_EQ(u.position_curve.size(), 12u);
  for (std::size_t i = 1; i < u.position_curve.size(); ++i) {
    EXPECT_LT(u.position_curve[i].value, u.position_curve[i - 1].value);
  }
  for (const auto& p : u.position_curve) EXPECT_GT(p.half_width, 0.0);
}

TEST(Uid, FewPositionsUseBinnedMeans) {
  const auto c = position_corpus(5, 3, 4, 300.0, -10.0, 0.0, 4);
  const auto u = uid_stats(c);
  EXPECT_EQ(u.curve_method, "binned");
  ASSERT_EQ(u.position_curve.size(), 4u);
  EXPECT_NEAR(u.position_curve[0].value, 290.0, 1e-9);
  EXPECT_NEAR(u.position_curve[3].value, 260.0, 1e-9);
  EXPECT_EQ(u.position_curve[0].count, 15u);
}

TEST(Spline, LinearDataIsReproduced) {
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(i % 20);
    y.push_back(3.0 + 2.0 * (i % 20));
  }
  const auto fit = penalized_spline(x, y);
  ASSERT_EQ(fit.curve.size(), 20u);
  for (const auto& p : fit.curve) EXPECT_NEAR(p.value, 3.0 + 2.0 * p.position, 1e-6);
}

TEST(Spline, TracksCurvature) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 0.1);
  std::vector<double> x, y;
  for (int r = 0; r < 30; ++r)
    for (int i = 0; i < 25; ++i) {
      x.push_back(i);
      y.push_back(std::sin(i / 4.0) + z(rng));
    }
  const auto fit = penalized_spline(x, y);
  for (const auto& p : fit.curve) EXPECT_NEAR(p.value, std::sin(p.position / 4.0), 0.06);
  EXPECT_GT(fit.edf, 3.0);
}

namespace {

std::vector<ProbeRow> probe_fixture(double separation, bool shuffle, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const SynCategory cats[] = {SynCategory::nominal, SynCategory::verbal, SynCategory::modifier, SynCategory::other};
  const double offset[] = {1.0, -0.5, 0.5, 0.0};
  std::vector<ProbeRow> rows;
  for (int i = 0; i < 600; ++i) {
    ProbeRow r;
    const int k = int(rng() % 4);
    r.syn_category = cats[k];
    r.sent_n = 1 + i / 12;
    r.position = 1 + i % 12;
    r.length = 1 + int(rng() % 6);
    r.freq = -2.0 - 0.3 * r.length + 0.5 * z(rng);
    r.response = 5.0 + 0.4 * r.length - 0.3 * r.freq + separation * offset[k] + z(rng);
    rows.push_back(r);
  }
  if (shuffle) {
    std::vector<std::optional<SynCategory>> labels;
    for (const auto& r : rows) labels.push_back(r.syn_category);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].syn_category = labels[i];
  }
  return rows;
}

}  // namespace

TEST(Probe, IndependentCategoryHasNoEffect) {
  const auto rows = probe_fixture(0.0, false, 1);
  const auto d = factor_effect(rows, ProbeFactor::syn_category, "tokenN");
  // chi-square(3) 95% quantile 7.8147 over 2n.
  EXPECT_LT(d.value, 7.8147 / (2.0 * 600));
  EXPECT_EQ(d.df, 3u);
}

TEST(Probe, EffectGrowsWithSeparation) {
  const auto small = factor_effect(probe_fixture(0.5, false, 2), ProbeFactor::syn_category, "tokenN");
  const auto large = factor_effect(probe_fixture(1.5, false, 2), ProbeFactor::syn_category, "tokenN");
  EXPECT_GT(small.value, 0.0);
  EXPECT_GT(large.value, small.value);
  EXPECT_LT(large.p_value, 1e-6);
  const auto shuffled = factor_effect(probe_fixture(1.5, true, 2), ProbeFactor::syn_category, "tokenN");
  EXPECT_GT(large.value, 10.0 * shuffled.value);
}

TEST(Probe, SparseAnnotationRejected) {
  auto rows = probe_fixture(1.0, false, 3);
  for (std::size_t i = 0; i < rows.size(); i += 10) rows[i].syn_category.reset();
  EXPECT_THROW(factor_effect(rows, ProbeFactor::syn_category, "tokenN"), DomainError);
  EXPECT_THROW(factor_effect(rows, ProbeFactor::sem_category, "tokenN"), DomainError);
}

TEST(Dominance, GenerativeFactorRanksFirst) {
  SynthSpec spec;
  spec.n_articles = 6;
  spec.n_subjects = 6;
  spec.category_offsets = {{SynCategory::nominal, 60.0}, {SynCategory::modifier, 20.0}, {SynCategory::verbal, 0.0}};
  spec.seed = 5;
  const auto data = generate(spec);
  const auto gaze = prepare_gaze_data(data.corpus, FilterPolicy::for_style(spec.style), spec.style);
  const auto features = compute_text_features(gaze.index, data.surprisal, data.counts, SpilloverPolicy{2});
  const auto ranked = factor_dominance(gaze, features);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].factor, ProbeFactor::syn_category);
  EXPECT_GE(ranked[0].effect.value, ranked[1].effect.value);
  EXPECT_GE(ranked[1].effect.value, ranked[2].effect.value);
}

TEST(Power, SurprisalEffectDetected) {
  SynthSpec spec;
  spec.n_articles = 6;
  spec.n_subjects = 6;
  spec.beta.surprisal = 15.0;
  spec.seed = 7;
  const auto data = generate(spec);
  const auto gaze = prepare_gaze_data(data.corpus, FilterPolicy::for_style(spec.style), spec.style);
  PowerOptions opts;
  opts.spillover = SpilloverPolicy{2};
  const auto r = psychometric_power(gaze, data.surprisal, data.counts, opts);
  EXPECT_GT(r.delta.value, 0.0);
  EXPECT_LT(r.delta.p_value, 0.05);
  EXPECT_EQ(r.delta.df, 3u);
  EXPECT_TRUE(r.full.converged && r.base.converged);
  EXPECT_EQ(r.full.n, r.base.n);
}

TEST(Power, NullSurprisalNearZero) {
  SynthSpec spec;
  spec.n_articles = 6;
  spec.n_subjects = 6;
  spec.beta.surprisal = 0.0;
  spec.seed = 8;
  const auto data = generate(spec);
  const auto gaze = prepare_gaze_data(data.corpus, FilterPolicy::for_style(spec.style), spec.style);
  PowerOptions opts;
  opts.spillover = SpilloverPolicy{0};
  const auto r = psychometric_power(gaze, data.surprisal, data.counts, opts);
  EXPECT_GE(r.delta.value, -1e-9);
  // Loose bound: 99.9% chi-square(1) quantile over 2n.
  EXPECT_LT(r.delta.value, 10.83 / (2.0 * double(r.delta.n)));
}

TEST(Power, LogResponseVariant) {
  SynthSpec spec;
  spec.n_articles = 5;
  spec.n_subjects = 5;
  spec.residual = ResidualKind::lognormal;
  spec.sd_resid = 0.2;
  spec.seed = 9;
  const auto data = generate(spec);
  const auto gaze = prepare_gaze_data(data.corpus, FilterPolicy::for_style(spec.style), spec.style);
  PowerOptions opts;
  opts.transform = ResponseTransform::log;
  const auto r = psychometric_power(gaze, data.surprisal, data.counts, opts);
  EXPECT_TRUE(std::isfinite(r.delta.value));
  EXPECT_GT(r.delta.value, 0.0);
}
