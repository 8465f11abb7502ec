#include "gazefit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "gazefit/error.hpp"

namespace gazefit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double as_double(const std::optional<double>& v) { return v ? *v : kNaN; }
double as_double(const std::optional<int>& v) { return v ? double(*v) : kNaN; }

}  // namespace

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::trans_lg: return "trans_lg";
    case Architecture::trans_sm: return "trans_sm";
    case Architecture::lstm: return "lstm";
    case Architecture::ngram: return "ngram";
  }
  return "trans_lg";
}

std::string_view to_string(DataSize d) {
  switch (d) {
    case DataSize::lg: return "lg";
    case DataSize::md: return "md";
    case DataSize::sm: return "sm";
  }
  return "lg";
}

Architecture parse_architecture(std::string_view s) {
  for (auto a : {Architecture::trans_lg, Architecture::trans_sm, Architecture::lstm, Architecture::ngram}) {
    if (to_string(a) == s) return a;
  }
  throw DomainError("unknown architecture '" + std::string(s) + "'");
}

DataSize parse_data_size(std::string_view s) {
  for (auto d : {DataSize::lg, DataSize::md, DataSize::sm}) {
    if (to_string(d) == s) return d;
  }
  throw DomainError("unknown data size '" + std::string(s) + "'");
}

double relative_data_size(DataSize d) {
  switch (d) {
    case DataSize::lg: return 1.0;
    case DataSize::md: return 0.1;
    case DataSize::sm: return 0.01;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Regression data

GazeData prepare_gaze_data(const Corpus& raw, const FilterPolicy& policy, LanguageStyle style, bool filter) {
  GazeData d;
  d.style = style;
  d.index = build_text_index(raw);
  if (filter) {
    auto outcome = apply_filters_with_report(raw, policy);
    d.filtered = std::move(outcome.corpus);
    d.filter_counts = outcome.counts;
  } else {
    if (raw.empty()) throw DomainError("corpus has no data points");
    d.filtered = raw;
    d.filter_counts.input = d.filter_counts.kept = raw.size();
  }
  std::map<std::tuple<std::string_view, int, int>, std::size_t> pos;
  for (std::size_t k = 0; k < d.index.segments.size(); ++k) {
    const auto& s = d.index.segments[k];
    pos.emplace(std::tuple<std::string_view, int, int>{s.article_id, s.screen_n, s.segment_n}, k);
  }
  d.point_segment.reserve(d.filtered.size());
  for (const auto& s : d.filtered.segments) {
    auto it = pos.find({s.article_id, s.screen_n, s.segment_n});
    if (it == pos.end()) throw DomainError("filtered point is missing from the text index");
    d.point_segment.push_back(it->second);
  }
  return d;
}

FeatureTable gaze_feature_table(const GazeData& data, const TextFeatures& features) {
  if (features.segments.size() != data.index.segments.size()) {
    throw DomainError("features do not match the text index");
  }
  const std::size_t n = data.filtered.size();
  std::vector<double> gd, screen, line, segn, sent, tok, surp, p1, p2, freq, len, fp1, lp1;
  std::vector<std::string> article, subj;
  for (auto* v : {&gd, &screen, &line, &segn, &sent, &tok, &surp, &p1, &p2, &freq, &len, &fp1, &lp1}) v->reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data.filtered.segments[i];
    const auto& f = features.segments[data.point_segment[i]];
    gd.push_back(s.gaze_duration);
    screen.push_back(s.screen_n);
    line.push_back(s.line_n);
    segn.push_back(s.segment_n);
    sent.push_back(s.sent_n);
    tok.push_back(s.token_n);
    surp.push_back(f.surprisal);
    p1.push_back(as_double(f.surprisal_prev_1));
    p2.push_back(as_double(f.surprisal_prev_2));
    freq.push_back(f.freq);
    len.push_back(f.length);
    fp1.push_back(as_double(f.freq_prev_1));
    lp1.push_back(as_double(f.length_prev_1));
    article.push_back(s.article_id);
    subj.push_back(s.subject_id);
  }
  FeatureTable t(n);
  t.add_numeric("gd", std::move(gd));
  t.add_numeric("screenN", std::move(screen));
  t.add_numeric("lineN", std::move(line));
  t.add_numeric("segmentN", std::move(segn));
  t.add_numeric("sentN", std::move(sent));
  t.add_numeric("tokenN", std::move(tok));
  t.add_numeric("surprisal", std::move(surp));
  t.add_numeric("surprisal_prev_1", std::move(p1));
  t.add_numeric("surprisal_prev_2", std::move(p2));
  t.add_numeric("freq", std::move(freq));
  t.add_numeric("length", std::move(len));
  t.add_numeric("freq_prev_1", std::move(fp1));
  t.add_numeric("length_prev_1", std::move(lp1));
  t.add_categorical("article", std::move(article));
  t.add_categorical("subj", std::move(subj));
  return t;
}

RegressionSpec gaze_regression_spec(int spillover, bool with_surprisal, ResponseTransform transform) {
  if (spillover < 0 || spillover > 2) throw DomainError("spillover must be 0, 1 or 2");
  RegressionSpec s;
  s.response = "gd";
  s.transform = transform;
  if (with_surprisal) {
    s.fixed_terms.push_back("surprisal");
    if (spillover >= 1) s.fixed_terms.push_back("surprisal_prev_1");
    if (spillover >= 2) s.fixed_terms.push_back("surprisal_prev_2");
  }
  for (const char* t : {"freq*length", "freq_prev_1*length_prev_1", "screenN", "lineN", "segmentN"}) {
    s.fixed_terms.push_back(t);
  }
  s.random_intercepts = {"article", "subj"};
  return s;
}

PowerResult psychometric_power(const GazeData& data, const TextFeatures& features, double ppl,
                               const PowerOptions& options) {
  const auto table = gaze_feature_table(data, features);
  auto full_spec = gaze_regression_spec(options.spillover.prev_count, true, options.transform);
  auto base_spec = gaze_regression_spec(options.spillover.prev_count, false, options.transform);
  full_spec.standardize = base_spec.standardize = options.standardize;
  const auto rows = complete_rows(table, {full_spec, base_spec});
  PowerResult r;
  r.ppl = ppl;
  r.full = fit_lmm(build_design(table, full_spec, &rows), options.fit);
  r.base = fit_lmm(build_design(table, base_spec, &rows), options.fit);
  r.delta = delta_loglik(r.full, r.base);
  return r;
}

PowerResult psychometric_power(const GazeData& data, const SurprisalTable& table, const UnigramCounts& counts,
                               const PowerOptions& options) {
  const auto features = compute_text_features(data.index, table, counts, options.spillover);
  return psychometric_power(data, features, table.ppl(), options);
}

// ---------------------------------------------------------------------------
// Rank correlation

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("spearman: inputs differ in length");
  if (xs.size() < 2) throw DomainError("spearman: need at least two pairs");
  for (double v : xs)
    if (std::isnan(v)) throw DomainError("spearman: NaN input");
  for (double v : ys)
    if (std::isnan(v)) throw DomainError("spearman: NaN input");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = double(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("spearman: correlation undefined for a constant input");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::optional<double> split_rho(const std::vector<const LMRecord*>& recs) {
  if (recs.size() < 2) return std::nullopt;
  std::vector<double> x, y;
  for (const auto* r : recs) {
    x.push_back(r->ppl);
    y.push_back(r->delta_loglik);
  }
  try {
    return spearman(x, y);
  } catch (const DomainError& e) {
    warn(std::string("split correlation omitted: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace

SuiteReport suite_report(std::vector<LMRecord> records, double split_ppl) {
  if (records.size() < 3) throw DomainError("suite_report: need at least three LM records");
  SuiteReport rep;
  rep.split_ppl = split_ppl;
  std::vector<double> x, y;
  std::vector<const LMRecord*> above, below;
  for (const auto& r : records) {
    if (!(r.ppl > 0)) throw DomainError("LM record '" + r.lm_id + "' has a non-positive perplexity");
    x.push_back(r.ppl);
    y.push_back(r.delta_loglik);
    (r.ppl > split_ppl ? above : below).push_back(&r);
  }
  rep.rho = spearman(x, y);
  rep.n_above = above.size();
  rep.n_below = below.size();
  rep.rho_above = split_rho(above);
  rep.rho_below = split_rho(below);
  rep.records = std::move(records);
  return rep;
}

// ---------------------------------------------------------------------------
// Factor regression

FactorRegression factor_regression(std::span<const LMRecord> records) {
  std::vector<const LMRecord*> used;
  FactorRegression out;
  for (const auto& r : records) {
    if (r.updates > 0) {
      used.push_back(&r);
    } else {
      ++out.excluded;
    }
  }
  std::set<Architecture> archs;
  std::set<DataSize> sizes;
  std::set<long long> updates;
  for (const auto* r : used) {
    archs.insert(r->architecture);
    sizes.insert(r->data_size);
    updates.insert(r->updates);
  }
  if (archs.size() < 2 || sizes.size() < 2 || updates.size() < 2) {
    throw DomainError("factor_regression: every factor needs at least two levels");
  }
  const std::vector<Architecture> arch_levels(archs.begin(), archs.end());
  const auto n = static_cast<Eigen::Index>(used.size());
  const auto p = static_cast<Eigen::Index>(arch_levels.size() + 2);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> names{"(Intercept)"};
  for (std::size_t l = 1; l < arch_levels.size(); ++l) names.push_back("architecture=" + std::string(to_string(arch_levels[l])));
  names.push_back("log_data_size");
  names.push_back("log_updates");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *used[std::size_t(i)];
    X(i, 0) = 1.0;
    for (std::size_t l = 1; l < arch_levels.size(); ++l) X(i, Eigen::Index(l)) = r.architecture == arch_levels[l] ? 1.0 : 0.0;
    X(i, p - 2) = std::log(relative_data_size(r.data_size));
    X(i, p - 1) = std::log(double(r.updates));
    y(i) = r.delta_loglik;
  }
  out.n = used.size();
  out.fit = fit_ols(X, y, names);

  auto partial_f = [&](const std::string& factor, std::vector<Eigen::Index> drop) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < p; ++j)
      if (std::find(drop.begin(), drop.end(), j) == drop.end()) keep.push_back(j);
    Eigen::MatrixXd Xr(n, Eigen::Index(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) Xr.col(Eigen::Index(k)) = X.col(keep[k]);
    const auto reduced = fit_ols(Xr, y);
    FactorTest t;
    t.factor = factor;
    t.df = drop.size();
    const double df_resid = double(out.fit.df_resid);
    if (df_resid <= 0) {
      t.f_stat = kNaN;
      t.p_value = kNaN;
    } else {
      const double num = std::max(0.0, reduced.rss - out.fit.rss) / double(t.df);
      const double den = out.fit.rss / df_resid;
      t.f_stat = den > 0 ? num / den : (num > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      t.p_value = f_sf(t.f_stat, double(t.df), df_resid);
    }
    out.factors.push_back(t);
  };
  std::vector<Eigen::Index> arch_cols;
  for (std::size_t l = 1; l < arch_levels.size(); ++l) arch_cols.push_back(Eigen::Index(l));
  partial_f("architecture", arch_cols);
  partial_f("data_size", {p - 2});
  partial_f("updates", {p - 1});
  return out;
}

// ---------------------------------------------------------------------------
// Position curves

namespace {

struct PositionSums {
  std::vector<double> x;
  std::vector<double> count, sum, sumsq;
};

PositionSums aggregate(std::span<const double> x, std::span<const double> y) {
  std::map<double, std::tuple<double, double, double>> acc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& [c, s, ss] = acc[x[i]];
    c += 1;
    s += y[i];
    ss += y[i] * y[i];
  }
  PositionSums p;
  for (const auto& [xv, t] : acc) {
    p.x.push_back(xv);
    p.count.push_back(std::get<0>(t));
    p.sum.push_back(std::get<1>(t));
    p.sumsq.push_back(std::get<2>(t));
  }
  return p;
}

// Cubic B-spline basis on equally spaced knots over [lo, hi].
Eigen::VectorXd bspline_basis(double x, double lo, double hi, int nseg) {
  const int degree = 3;
  const int k = nseg + degree;  // number of basis functions
  const double dx = (hi - lo) / nseg;
  std::vector<double> knots(std::size_t(nseg + 2 * degree + 1));
  for (std::size_t i = 0; i < knots.size(); ++i) knots[i] = lo + (double(i) - degree) * dx;
  // Keep the right end inside the last interval.
  x = std::min(x, hi - 1e-9 * dx);
  std::vector<double> b(knots.size() - 1, 0.0);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) b[i] = (x >= knots[i] && x < knots[i + 1]) ? 1.0 : 0.0;
  for (int d = 1; d <= degree; ++d) {
    for (std::size_t i = 0; i + d + 1 < knots.size(); ++i) {
      const double left = (x - knots[i]) / (knots[i + d] - knots[i]) * b[i];
      const double right = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) * b[i + 1];
      b[i] = left + right;
    }
  }
  Eigen::VectorXd out(k);
  for (int i = 0; i < k; ++i) out(i) = b[std::size_t(i)];
  return out;
}

}  // namespace

std::vector<CurvePoint> binned_means(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("binned_means: inputs differ in length");
  const auto p = aggregate(x, y);
  std::vector<CurvePoint> out;
  for (std::size_t u = 0; u < p.x.size(); ++u) {
    CurvePoint c;
    c.position = p.x[u];
    c.count = std::size_t(p.count[u]);
    c.value = p.sum[u] / p.count[u];
    if (p.count[u] > 1) {
      const double var = std::max(0.0, (p.sumsq[u] - p.count[u] * c.value * c.value) / (p.count[u] - 1));
      c.half_width = 1.96 * std::sqrt(var / p.count[u]);
    }
    out.push_back(c);
  }
  return out;
}

SplineFit penalized_spline(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("penalized_spline: inputs differ in length");
  const auto p = aggregate(x, y);
  if (p.x.size() < 4) throw DomainError("penalized_spline: need at least four distinct positions");
  const double n = double(x.size());
  double ybar = 0.0;
  for (double v : p.sum) ybar += v;
  ybar /= n;

  const int nseg = int(std::min<std::size_t>(20, p.x.size() - 1));
  const int k = nseg + 3;
  const double lo = p.x.front(), hi = p.x.back();
  std::vector<Eigen::VectorXd> basis;
  Eigen::MatrixXd BtB = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd Bty = Eigen::VectorXd::Zero(k);
  double yty = 0.0;
  for (std::size_t u = 0; u < p.x.size(); ++u) {
    basis.push_back(bspline_basis(p.x[u], lo, hi, nseg));
    const auto& b = basis.back();
    BtB.noalias() += p.count[u] * b * b.transpose();
    const double centered_sum = p.sum[u] - p.count[u] * ybar;
    Bty += centered_sum * b;
    yty += p.sumsq[u] - 2.0 * ybar * p.sum[u] + p.count[u] * ybar * ybar;
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
  for (int i = 0; i < k - 2; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -2.0;
    D(i, i + 2) = 1.0;
  }
  const Eigen::MatrixXd P = D.transpose() * D;

  struct Candidate {
    double gcv = std::numeric_limits<double>::infinity();
    double lambda = 0.0, edf = 0.0, rss = 0.0;
    Eigen::VectorXd coef;
    Eigen::MatrixXd inv;
  } best;
  // Overall scale of the data term, so the grid is relative to it.
  const double scale = BtB.trace() / double(k);
  for (int g = -24; g <= 32; ++g) {
    const double lambda = scale * std::pow(10.0, g / 4.0 - 4.0);
    const Eigen::MatrixXd M = BtB + lambda * P;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::VectorXd a = inv * Bty;
    const double rss = std::max(0.0, yty - 2.0 * a.dot(Bty) + a.dot(BtB * a));
    const double edf = (inv * BtB).trace();
    if (n - edf <= 0.5) continue;
    const double gcv = n * rss / ((n - edf) * (n - edf));
    if (gcv < best.gcv - 1e-12 * std::abs(best.gcv) || !std::isfinite(best.gcv)) {
      best = Candidate{gcv, lambda, edf, rss, a, inv};
    }
  }
  if (best.coef.size() == 0) throw DomainError("penalized_spline: no admissible smoothing weight");
  const double sigma2 = best.rss / (n - best.edf);
  SplineFit fit;
  fit.lambda = best.lambda;
  fit.edf = best.edf;
  for (std::size_t u = 0; u < p.x.size(); ++u) {
    const auto& b = basis[u];
    CurvePoint c;
    c.position = p.x[u];
    c.count = std::size_t(p.count[u]);
    c.value = ybar + b.dot(best.coef);
    c.half_width = 1.96 * std::sqrt(std::max(0.0, sigma2 * b.dot(best.inv * b)));
    fit.curve.push_back(c);
  }
  return fit;
}

UidReport uid_stats(const Corpus& c) {
  if (c.empty()) throw DomainError("uid_stats: corpus has no data points");
  UidReport r;
  r.n = c.size();
  std::vector<double> gd, pos;
  for (const auto& s : c.segments) {
    gd.push_back(s.gaze_duration);
    pos.push_back(s.token_n);
  }
  r.mean = std::accumulate(gd.begin(), gd.end(), 0.0) / double(r.n);
  double ss = 0.0;
  for (double v : gd) ss += (v - r.mean) * (v - r.mean);
  r.sd = r.n > 1 ? std::sqrt(ss / double(r.n - 1)) : 0.0;
  r.cv = r.sd == 0.0 ? 0.0 : r.sd / r.mean;

  const std::set<double> distinct(pos.begin(), pos.end());
  if (distinct.size() >= kMinSplinePositions) {
    auto fit = penalized_spline(pos, gd);
    r.position_curve = std::move(fit.curve);
    r.curve_method = "pspline";
    r.smoothing_lambda = fit.lambda;
    r.effective_df = fit.edf;
  } else {
    r.position_curve = binned_means(pos, gd);
    r.curve_method = "binned";
  }
  if (distinct.size() >= 2 && r.n > 2 && r.sd > 0.0) {
    Eigen::MatrixXd X(Eigen::Index(r.n), 2);
    Eigen::VectorXd y(Eigen::Index(r.n));
    for (std::size_t i = 0; i < r.n; ++i) {
      X(Eigen::Index(i), 0) = 1.0;
      X(Eigen::Index(i), 1) = pos[i];
      y(Eigen::Index(i)) = gd[i];
    }
    const auto ols = fit_ols(X, y);
    r.position_slope = ols.beta(1);
    r.position_slope_p = ols.p_value(1);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Probing

std::string_view to_string(ProbeFactor f) {
  switch (f) {
    case ProbeFactor::syn_category: return "syn_category";
    case ProbeFactor::sem_category: return "sem_category";
    case ProbeFactor::n_dependents: return "n_dependents";
  }
  return "syn_category";
}

ProbeFactor parse_probe_factor(std::string_view s) {
  for (auto f : {ProbeFactor::syn_category, ProbeFactor::sem_category, ProbeFactor::n_dependents}) {
    if (to_string(f) == s) return f;
  }
  throw DomainError("unknown probe factor '" + std::string(s) + "'");
}

DeltaLogLik factor_effect(std::span<const ProbeRow> rows, ProbeFactor factor, std::string_view position_name) {
  auto annotated = [&](const ProbeRow& r) {
    switch (factor) {
      case ProbeFactor::syn_category: return r.syn_category.has_value();
      case ProbeFactor::sem_category: return r.sem_category.has_value();
      case ProbeFactor::n_dependents: return r.n_dependents.has_value();
    }
    return false;
  };
  std::vector<const ProbeRow*> used;
  for (const auto& r : rows)
    if (annotated(r)) used.push_back(&r);
  if (rows.empty() || double(used.size()) < kMinAnnotationShare * double(rows.size())) {
    throw DomainError(std::string(to_string(factor)) + " is annotated on " + std::to_string(used.size()) + " of " +
                      std::to_string(rows.size()) + " rows; at least 95% is required");
  }
  const std::string pos(position_name);
  const std::size_t n = used.size();
  std::vector<double> resp, sent, position, len, freq, deps;
  std::vector<std::string> cat;
  for (const auto* r : used) {
    resp.push_back(r->response);
    sent.push_back(r->sent_n);
    position.push_back(r->position);
    len.push_back(r->length);
    freq.push_back(r->freq);
    if (factor == ProbeFactor::syn_category) cat.emplace_back(to_string(*r->syn_category));
    if (factor == ProbeFactor::sem_category) cat.emplace_back(to_string(*r->sem_category));
    if (factor == ProbeFactor::n_dependents) deps.push_back(*r->n_dependents);
  }
  FeatureTable t(n);
  t.add_numeric("response", std::move(resp));
  t.add_numeric("sentN", std::move(sent));
  t.add_numeric(pos, std::move(position));
  t.add_numeric("length", std::move(len));
  t.add_numeric("freq", std::move(freq));
  const std::string fname(to_string(factor));
  if (factor == ProbeFactor::n_dependents) {
    t.add_numeric(fname, std::move(deps));
  } else {
    t.add_categorical(fname, std::move(cat));
  }
  RegressionSpec base;
  base.response = "response";
  base.fixed_terms = {"sentN", pos, "freq*length"};
  RegressionSpec full = base;
  full.fixed_terms.insert(full.fixed_terms.begin(), fname);
  const auto fb = fit_ols(build_design(t, base));
  const auto ff = fit_ols(build_design(t, full));
  return delta_loglik(ff.loglik, fb.loglik, n, ff.columns.size() - fb.columns.size());
}

std::vector<ProbeRow> probe_rows(const GazeData& data, const TextFeatures& features) {
  if (features.segments.size() != data.index.segments.size()) {
    throw DomainError("features do not match the text index");
  }
  const std::set<std::size_t> segs(data.point_segment.begin(), data.point_segment.end());
  std::vector<ProbeRow> rows;
  for (auto k : segs) {
    const auto& s = data.index.segments[k];
    const auto& f = features.segments[k];
    rows.push_back(ProbeRow{f.surprisal, s.sent_n, s.token_n, s.length, f.freq, s.syn_category, s.sem_category,
                            s.n_dependents});
  }
  return rows;
}

DeltaLogLik probe_effect(const GazeData& data, const TextFeatures& features, ProbeFactor factor) {
  const auto rows = probe_rows(data, features);
  return factor_effect(rows, factor, "tokenN");
}

std::vector<DominanceEntry> factor_dominance(const GazeData& data, const TextFeatures& features) {
  if (features.segments.size() != data.index.segments.size()) {
    throw DomainError("features do not match the text index");
  }
  std::vector<ProbeRow> rows;
  rows.reserve(data.filtered.size());
  for (std::size_t i = 0; i < data.filtered.size(); ++i) {
    const auto& s = data.filtered.segments[i];
    const auto& f = features.segments[data.point_segment[i]];
    rows.push_back(ProbeRow{s.gaze_duration, s.sent_n, s.segment_n, s.length, f.freq, s.syn_category,
                            s.sem_category, s.n_dependents});
  }
  std::vector<DominanceEntry> out;
  for (auto f : {ProbeFactor::syn_category, ProbeFactor::sem_category, ProbeFactor::n_dependents}) {
    out.push_back(DominanceEntry{f, factor_effect(rows, f, "segmentN")});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DominanceEntry& a, const DominanceEntry& b) { return a.effect.value > b.effect.value; });
  return out;
}

}  // namespace gazefit
