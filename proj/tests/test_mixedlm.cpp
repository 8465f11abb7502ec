#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gazefit/error.hpp"
#include "gazefit/mixedlm.hpp"

using namespace gazefit;

namespace {

// Balanced one-way layout: k groups of m observations.
struct OneWay {
  std::vector<double> y;
  std::vector<std::string> group;
};

OneWay one_way(int k, int m, double sd_group, double sd_resid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  OneWay d;
  for (int g = 0; g < k; ++g) {
    const double u = sd_group * z(rng);
    for (int j = 0; j < m; ++j) {
      d.y.push_back(50.0 + u + sd_resid * z(rng));
      d.group.push_back("g" + std::to_string(100 + g));
    }
  }
  return d;
}

// ML log-likelihood of the balanced one-way random-intercept model from the ANOVA
// sums of squares.
double one_way_closed_form(const OneWay& d, int k, int m) {
  const double n = double(k) * m;
  double grand = 0.0;
  for (double v : d.y) grand += v;
  grand /= n;
  double ssw = 0.0, ssb = 0.0;
  for (int g = 0; g < k; ++g) {
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += d.y[std::size_t(g * m + j)];
    mean /= m;
    ssb += m * (mean - grand) * (mean - grand);
    for (int j = 0; j < m; ++j) {
      const double r = d.y[std::size_t(g * m + j)] - mean;
      ssw += r * r;
    }
  }
  double s2 = ssw / (k * (m - 1.0));
  double lambda = ssb / k;  // sigma^2 + m tau^2
  if (lambda < s2) {        // boundary: tau^2 = 0
    s2 = lambda = (ssw + ssb) / n;
  }
  return -0.5 * n * std::log(2 * std::numbers::pi) - 0.5 * k * (m - 1.0) * std::log(s2) -
         0.5 * k * std::log(lambda) - ssw / (2 * s2) - ssb / (2 * lambda);
}

FeatureTable table_from(const OneWay& d) {
  FeatureTable t(d.y.size());
  t.add_numeric("y", d.y);
  t.add_categorical("g", d.group);
  return t;
}

RegressionSpec one_way_spec() {
  RegressionSpec s;
  s.response = "y";
  s.random_intercepts = {"g"};
  return s;
}

struct Crossed {
  FeatureTable table;
  RegressionSpec spec;
  double realized_sd_article = 0.0;  // population SD of the drawn intercepts
  double realized_sd_subject = 0.0;
};

double population_sd(const std::vector<double>& v) {
  double m = 0.0, ss = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size()));
}

Crossed crossed_data(int n_articles, int n_subjects, int per_cell, unsigned seed, double b_x = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> ua(static_cast<std::size_t>(n_articles)), us(static_cast<std::size_t>(n_subjects));
  for (auto& v : ua) v = 5.0 * z(rng);
  for (auto& v : us) v = 3.0 * z(rng);
  std::vector<double> y, x, w;
  std::vector<std::string> art, subj;
  for (int a = 0; a < n_articles; ++a)
    for (int s = 0; s < n_subjects; ++s)
      for (int c = 0; c < per_cell; ++c) {
        const double xv = z(rng);
        const double wv = z(rng);
        x.push_back(xv);
        w.push_back(wv);
        y.push_back(10.0 + b_x * xv + ua[std::size_t(a)] + us[std::size_t(s)] + z(rng));
        art.push_back("a" + std::to_string(a));
        subj.push_back("s" + std::to_string(s));
      }
  Crossed out{FeatureTable(y.size()), {}, population_sd(ua), population_sd(us)};
  out.table.add_numeric("y", y);
  out.table.add_numeric("x", x);
  out.table.add_numeric("w", w);
  out.table.add_categorical("article", art);
  out.table.add_categorical("subj", subj);
  out.spec.response = "y";
  out.spec.fixed_terms = {"x"};
  out.spec.random_intercepts = {"article", "subj"};
  return out;
}

}  // namespace

TEST(RegressionSpec, InteractionExpansion) {
  RegressionSpec s;
  s.fixed_terms = {"freq*length"};
  EXPECT_EQ(s.expanded_terms(), (std::vector<std::string>{"freq", "length", "freq:length"}));

  FeatureTable t(4);
  t.add_numeric("gd", {1, 2, 3, 5});
  t.add_numeric("freq", {1, 2, 3, 4});
  t.add_numeric("length", {2, 1, 1, 3});
  const auto d = build_design(t, s);
  EXPECT_EQ(d.columns, (std::vector<std::string>{"(Intercept)", "freq", "length", "freq:length"}));
  EXPECT_DOUBLE_EQ(d.X(3, 3), 12.0);
}

TEST(RegressionSpec, RejectsDuplicatesAndDanglingInteractions) {
  RegressionSpec dup;
  dup.fixed_terms = {"freq", "freq"};
  EXPECT_THROW(dup.expanded_terms(), DomainError);
  RegressionSpec dangling;
  dangling.fixed_terms = {"freq", "freq:length"};
  EXPECT_THROW(dangling.expanded_terms(), DomainError);
}

TEST(BuildDesign, ConstantColumnIsRankDeficient) {
  FeatureTable t(5);
  t.add_numeric("gd", {1, 2, 3, 4, 6});
  t.add_numeric("c", {7, 7, 7, 7, 7});
  RegressionSpec s;
  s.fixed_terms = {"c"};
  try {
    build_design(t, s);
    FAIL() << "expected rank deficiency";
  } catch (const RankDeficiencyError& e) {
    EXPECT_NE(std::string(e.what()).find('c'), std::string::npos);
  }
}

TEST(BuildDesign, GroupingIndicatorsOnToyCorpus) {
  // 2 articles x 3 subjects, one point each.
  FeatureTable t(6);
  t.add_numeric("gd", {200, 210, 190, 250, 260, 240});
  t.add_categorical("article", {"A", "A", "A", "B", "B", "B"});
  t.add_categorical("subj", {"s1", "s2", "s3", "s1", "s2", "s3"});
  RegressionSpec s;
  s.random_intercepts = {"article", "subj"};
  const auto d = build_design(t, s);
  ASSERT_EQ(d.groups.size(), 2u);
  EXPECT_EQ(d.groups[0].levels, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(d.groups[0].level_of_row, (std::vector<int>{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(d.groups[1].level_of_row, (std::vector<int>{0, 1, 2, 0, 1, 2}));
}

TEST(BuildDesign, ListwiseDeletionAndSingleLevelGroup) {
  FeatureTable t(4);
  t.add_numeric("gd", {1, 2, 3, 4});
  t.add_numeric("x", {1, std::nan(""), 2, 5});
  t.add_categorical("subj", {"s", "s", "s", "s"});
  RegressionSpec s;
  s.fixed_terms = {"x"};
  s.random_intercepts = {"subj"};
  const auto d = build_design(t, s);
  EXPECT_EQ(d.rows, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_TRUE(d.groups.empty());
}

TEST(FitLmm, BalancedOneWayMatchesClosedForm) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto d = one_way(12, 8, 3.0, 2.0, seed);
    const auto design = build_design(table_from(d), one_way_spec());
    const auto fit = fit_lmm(design);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.loglik, one_way_closed_form(d, 12, 8), 1e-6) << "seed " << seed;
  }
}

TEST(FitLmm, BoundaryOneWayMatchesClosedForm) {
  // No group effect: the ML estimate of the group variance sits at zero for
  // most draws; the optimizer approaches the boundary.
  for (unsigned seed : {4u, 5u, 6u, 7u}) {
    const auto d = one_way(10, 6, 0.0, 2.0, seed);
    const auto fit = fit_lmm(build_design(table_from(d), one_way_spec()));
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.loglik, one_way_closed_form(d, 10, 6), 1e-6) << "seed " << seed;
  }
}

TEST(FitLmm, ZeroVarianceRatioReducesToOls) {
  auto c = crossed_data(6, 5, 2, 11);
  const auto d = build_design(c.table, c.spec);
  FitOptions opts;
  opts.fixed_theta = std::vector<double>{0.0, 0.0};
  const auto lmm = fit_lmm(d, opts);
  const auto ols = fit_ols(d);
  EXPECT_NEAR(lmm.loglik, ols.loglik, 1e-8);
  for (Eigen::Index j = 0; j < lmm.beta.size(); ++j) EXPECT_NEAR(lmm.beta(j), ols.beta(j), 1e-8);
  EXPECT_NEAR(lmm.sigma2, ols.sigma2_ml, 1e-10);
}

TEST(FitLmm, RecoversCrossedEffects) {
  auto c = crossed_data(40, 25, 2, 5);
  const auto fit = fit_lmm(build_design(c.table, c.spec));
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.beta(1), 2.0, 0.1);
  EXPECT_NEAR(std::sqrt(fit.sigma2), 1.0, 0.1);
  EXPECT_NEAR(std::sqrt(fit.variance_components[0].variance), c.realized_sd_article, 0.1 * c.realized_sd_article);
  EXPECT_NEAR(std::sqrt(fit.variance_components[1].variance), c.realized_sd_subject, 0.1 * c.realized_sd_subject);
}

TEST(FitLmm, GradientVanishesAtOptimum) {
  auto c = crossed_data(15, 10, 2, 9);
  const auto d = build_design(c.table, c.spec);
  const auto fit = fit_lmm(d);
  ProfiledDeviance dev(d);
  std::vector<double> psi;
  for (double t : fit.theta) psi.push_back(2.0 * std::log(t));
  const double h = 1e-5;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    auto up = psi, dn = psi;
    up[i] += h;
    dn[i] -= h;
    // Gradient of the log-likelihood (deviance / -2).
    const double g = -0.5 * (dev.at_log_ratio(up) - dev.at_log_ratio(dn)) / (2 * h);
    EXPECT_LT(std::abs(g), 1e-4);
  }
}

TEST(FitLmm, ResponseScalingShiftsLoglik) {
  auto c = crossed_data(10, 8, 2, 21);
  const auto base_d = build_design(c.table, c.spec);
  const auto fit = fit_lmm(base_d);
  const double k = 7.5;
  auto y = c.table.numeric("y");
  for (auto& v : y) v *= k;
  c.table.add_numeric("y", y);
  const auto scaled = fit_lmm(build_design(c.table, c.spec));
  EXPECT_NEAR(scaled.loglik, fit.loglik - double(fit.n) * std::log(k), 1e-6);
}

TEST(FitLmm, NestedModelsAndDeltaLogLik) {
  auto c = crossed_data(12, 10, 2, 33);
  RegressionSpec full = c.spec;
  full.fixed_terms = {"x", "w"};
  const auto rows = complete_rows(c.table, {c.spec, full});
  const auto fb = fit_lmm(build_design(c.table, c.spec, &rows));
  const auto ff = fit_lmm(build_design(c.table, full, &rows));
  EXPECT_GE(ff.loglik, fb.loglik - 1e-6);
  const auto dl = delta_loglik(ff, fb);
  EXPECT_EQ(dl.df, 1u);
  EXPECT_NEAR(dl.value, (ff.loglik - fb.loglik) / double(rows.size()), 1e-12);

  const auto same = delta_loglik(fb, fb);
  EXPECT_EQ(same.value, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
}

TEST(FitLmm, StrongPredictorIsSignificant) {
  auto c = crossed_data(10, 10, 2, 44);
  RegressionSpec base = c.spec;
  base.fixed_terms = {};
  const auto rows = complete_rows(c.table, {c.spec});
  const auto dl = delta_loglik(fit_lmm(build_design(c.table, c.spec, &rows)),
                               fit_lmm(build_design(c.table, base, &rows)));
  EXPECT_GT(dl.value, 0.0);
  EXPECT_LT(dl.p_value, 0.05);
}

TEST(DeltaLogLik, RejectsMismatchedRowsAndUnconverged) {
  FittedLMM a, b;
  a.converged = b.converged = true;
  a.n = 10;
  b.n = 11;
  EXPECT_THROW(delta_loglik(a, b), DomainError);
  b.n = 10;
  b.converged = false;
  EXPECT_THROW(delta_loglik(a, b), ConvergenceError);
}

TEST(FitOls, ExactAndOrthogonal) {
  Eigen::MatrixXd X(4, 2);
  X << 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  auto fit = fit_ols(X, y);
  EXPECT_NEAR(fit.beta(1), 1.0, 1e-12);
  EXPECT_NEAR(fit.rss, 0.0, 1e-20);

  Eigen::VectorXd orth(4);
  orth << 1, -1, -1, 1;  // orthogonal to the centered x
  fit = fit_ols(X, orth);
  EXPECT_NEAR(fit.beta(1), 0.0, 1e-12);
}

TEST(FitOls, TenPointNormalEquations) {
  const double xs[10] = {1.2, 2.3, 2.9, 4.1, 5.0, 6.4, 7.1, 7.9, 9.2, 10.5};
  const double ys[10] = {3.1, 4.8, 5.2, 8.3, 9.9, 12.1, 13.8, 15.2, 18.4, 20.1};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 10; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (10 * sxy - sx * sy) / (10 * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / 10;
  double rss = 0;
  for (int i = 0; i < 10; ++i) rss += std::pow(ys[i] - icpt - slope * xs[i], 2);
  const double se_slope = std::sqrt(rss / 8 / (sxx - sx * sx / 10));

  Eigen::MatrixXd X(10, 2);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = 1;
    X(i, 1) = xs[i];
    y(i) = ys[i];
  }
  const auto fit = fit_ols(X, y);
  EXPECT_NEAR(fit.beta(0), icpt, 1e-10);
  EXPECT_NEAR(fit.beta(1), slope, 1e-10);
  EXPECT_NEAR(fit.rss, rss, 1e-10);
  EXPECT_NEAR(fit.std_error(1), se_slope, 1e-10);
  EXPECT_NEAR(fit.loglik, -5.0 * (std::log(2 * std::numbers::pi * rss / 10) + 1), 1e-10);
}

TEST(FitOls, RankDeficiencyThrows) {
  Eigen::MatrixXd X(4, 3);
  X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
  EXPECT_THROW(fit_ols(X, Eigen::VectorXd::Ones(4)), RankDeficiencyError);
}
