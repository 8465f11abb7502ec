#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "gazefit/analysis.hpp"
#include "gazefit/error.hpp"
#include "gazefit/synth.hpp"

using namespace gazefit;

TEST(Synth, SameSeedSameOutput) {
  SynthSpec spec;
  spec.seed = 42;
  const auto a = generate(spec), b = generate(spec);
  EXPECT_EQ(format_corpus(a.corpus), format_corpus(b.corpus));
  EXPECT_EQ(format_surprisal_table(a.surprisal), format_surprisal_table(b.surprisal));
  EXPECT_EQ(format_unigram_counts(a.counts), format_unigram_counts(b.counts));
  spec.seed = 43;
  EXPECT_NE(format_corpus(generate(spec).corpus), format_corpus(a.corpus));
}

TEST(Synth, NoiselessGazeIsLinearInFeatures) {
  SynthSpec spec;
  spec.sd_article = spec.sd_subject = spec.sd_resid = 0.0;
  spec.beta = SynthBeta{250.0, 10.0, 4.0, 2.0, -3.0, 5.0};
  spec.seed = 3;
  const auto data = generate(spec);
  const auto gaze = prepare_gaze_data(data.corpus, FilterPolicy{}, spec.style, false);
  const auto features = compute_text_features(gaze.index, data.surprisal, data.counts, SpilloverPolicy{2});
  const auto t = gaze_feature_table(gaze, features);
  const auto& gd = t.numeric("gd");
  const auto& s = t.numeric("surprisal");
  const auto& f = t.numeric("freq");
  const auto& len = t.numeric("length");
  std::size_t checked = 0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double p1 = t.present("surprisal_prev_1", i) ? t.numeric("surprisal_prev_1")[i] : 0.0;
    const double p2 = t.present("surprisal_prev_2", i) ? t.numeric("surprisal_prev_2")[i] : 0.0;
    const double eta = 250.0 + 10.0 * s[i] + 4.0 * p1 + 2.0 * p2 - 3.0 * f[i] + 5.0 * len[i];
    EXPECT_NEAR(gd[i], eta, 1e-9 * std::abs(eta));
    ++checked;
  }
  EXPECT_EQ(checked, data.corpus.segments.size());
}

TEST(Synth, PositionSlopeShowsInMeans) {
  SynthSpec spec;
  spec.n_articles = 10;
  spec.n_subjects = 10;
  spec.segments_per_sentence = 10;
  spec.position_slope = -20.0;
  spec.beta.surprisal = 0.0;
  spec.sd_resid = 20.0;
  spec.seed = 4;
  const auto data = generate(spec);
  std::map<int, std::pair<double, int>> by_pos;
  for (const auto& s : data.corpus.segments) {
    by_pos[s.token_n].first += s.gaze_duration;
    ++by_pos[s.token_n].second;
  }
  // Least-squares slope of the per-position means.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [p, v] : by_pos) {
    const double m = v.first / v.second;
    sx += p;
    sy += m;
    sxx += double(p) * p;
    sxy += p * m;
  }
  const double k = double(by_pos.size());
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  EXPECT_NEAR(slope, -20.0, 1.0);
  for (auto it = std::next(by_pos.begin()); it != by_pos.end(); ++it) {
    const double prev = std::prev(it)->second.first / std::prev(it)->second.second;
    EXPECT_NEAR(it->second.first / it->second.second - prev, -20.0, 8.0);
  }
}

TEST(Synth, TargetPointCount) {
  SynthSpec spec;
  spec.n_points_target = 500;
  const auto data = generate(spec);
  EXPECT_EQ(data.corpus.segments.size(), 500u);
  EXPECT_EQ(data.truth.n_points, 500u);
}

TEST(Synth, SurprisalTableValidates) {
  const auto data = generate(SynthSpec{});
  EXPECT_TRUE(validate_surprisal_table(data.surprisal).empty());
  EXPECT_EQ(data.surprisal.lm_id, "truth");
}

TEST(Synth, SpecJsonRoundTrip) {
  SynthSpec spec;
  spec.n_articles = 3;
  spec.position_slope = -7.5;
  spec.category_offsets = {{SynCategory::nominal, 12.0}};
  spec.style = LanguageStyle::japanese_like;
  spec.target_cv = 0.4;
  const auto back = synth_spec_from_json(synth_spec_to_json(spec));
  EXPECT_EQ(synth_spec_to_json(back), synth_spec_to_json(spec));
  EXPECT_EQ(back.n_articles, 3u);
  EXPECT_EQ(back.category_offsets.at(SynCategory::nominal), 12.0);
}

TEST(Synth, SpecRejectsUnknownFieldsAndBadValues) {
  EXPECT_THROW(synth_spec_from_json(R"({"n_artcles": 3})"), SchemaError);
  EXPECT_THROW(synth_spec_from_json(R"({"sd_resid": -1})"), Error);
  EXPECT_THROW(synth_spec_from_json("not json"), Error);
}

TEST(Synth, TargetCvIsApproached) {
  SynthSpec spec;
  spec.n_articles = 10;
  spec.n_subjects = 10;
  spec.target_cv = 0.5;
  spec.seed = 11;
  const auto data = generate(spec);
  const auto u = uid_stats(data.corpus);
  EXPECT_NEAR(u.cv, 0.5, 0.02);
}

TEST(Suite, MonotoneShape) {
  const auto s = make_suite(12, SuiteShape::monotone, 1);
  ASSERT_EQ(s.lms.size(), 12u);
  for (std::size_t i = 1; i < s.lms.size(); ++i) {
    EXPECT_GT(s.lms[i].ppl, s.lms[i - 1].ppl);
    EXPECT_GE(s.lms[i].noise_sd, s.lms[i - 1].noise_sd);
  }
  EXPECT_DOUBLE_EQ(s.turning_ppl, s.lms.front().ppl);
}

TEST(Suite, UShapedTurnsInTheMiddle) {
  const auto s = make_suite(11, SuiteShape::u_shaped, 2);
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.lms.size(); ++i)
    if (s.lms[i].noise_sd < s.lms[best].noise_sd) best = i;
  EXPECT_EQ(best, 5u);
  EXPECT_DOUBLE_EQ(s.turning_ppl, s.lms[5].ppl);
}

TEST(Suite, LmSurprisalsMatchTargetPpl) {
  const auto data = generate(SynthSpec{});
  const auto suite = make_suite(4, SuiteShape::monotone, 3);
  for (const auto& cfg : suite.lms) {
    const auto t = lm_surprisals(data.surprisal, cfg, 3);
    EXPECT_NEAR(t.ppl(), cfg.ppl, 1e-9 * cfg.ppl);
    EXPECT_EQ(t.rows.size(), data.surprisal.rows.size());
    EXPECT_TRUE(validate_surprisal_table(t).empty());
  }
}
