#include "gazefit/mixedlm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {

// ---------------------------------------------------------------------------
// FeatureTable

void FeatureTable::add_numeric(const std::string& name, std::vector<double> values) {
  if (values.size() != rows_) throw DomainError("feature '" + name + "' has the wrong length");
  categorical_.erase(name);
  numeric_[name] = std::move(values);
}

void FeatureTable::add_categorical(const std::string& name, std::vector<std::string> values) {
  if (values.size() != rows_) throw DomainError("feature '" + name + "' has the wrong length");
  numeric_.erase(name);
  categorical_[name] = std::move(values);
}

const std::vector<double>& FeatureTable::numeric(const std::string& name) const {
  auto it = numeric_.find(name);
  if (it == numeric_.end()) throw DomainError("no numeric feature '" + name + "'");
  return it->second;
}

const std::vector<std::string>& FeatureTable::categorical(const std::string& name) const {
  auto it = categorical_.find(name);
  if (it == categorical_.end()) throw DomainError("no categorical feature '" + name + "'");
  return it->second;
}

bool FeatureTable::present(const std::string& name, std::size_t row) const {
  if (auto it = numeric_.find(name); it != numeric_.end()) return !std::isnan(it->second[row]);
  if (auto it = categorical_.find(name); it != categorical_.end()) return !it->second[row].empty();
  throw DomainError("no feature '" + name + "'");
}

FeatureTable FeatureTable::subset(const std::vector<std::size_t>& rows) const {
  FeatureTable out(rows.size());
  for (const auto& [name, col] : numeric_) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto r : rows) v.push_back(col.at(r));
    out.numeric_[name] = std::move(v);
  }
  for (const auto& [name, col] : categorical_) {
    std::vector<std::string> v;
    v.reserve(rows.size());
    for (auto r : rows) v.push_back(col.at(r));
    out.categorical_[name] = std::move(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Formula handling

namespace {

std::vector<std::string> split_term(const std::string& term, char sep) {
  std::vector<std::string> parts;
  for (const auto& p : text::split(term, sep)) {
    const auto t = std::string(text::trim(p));
    if (t.empty()) throw DomainError("malformed term '" + term + "'");
    parts.push_back(t);
  }
  return parts;
}

std::string canonical_interaction(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return a + ":" + b;
}

}  // namespace

std::vector<std::string> RegressionSpec::expanded_terms() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::set<std::string> explicit_terms;
  auto add = [&](const std::string& t) {
    if (seen.insert(t).second) out.push_back(t);
  };
  std::vector<std::pair<std::string, std::string>> interactions;
  for (const auto& raw : fixed_terms) {
    const auto term = std::string(text::trim(raw));
    std::string key = term;
    if (term.find('*') != std::string::npos) {
      const auto parts = split_term(term, '*');
      if (parts.size() != 2) throw DomainError("only pairwise interactions are supported: '" + term + "'");
      key = "*" + canonical_interaction(parts[0], parts[1]);
      add(parts[0]);
      add(parts[1]);
      add(canonical_interaction(parts[0], parts[1]));
    } else if (term.find(':') != std::string::npos) {
      const auto parts = split_term(term, ':');
      if (parts.size() != 2) throw DomainError("only pairwise interactions are supported: '" + term + "'");
      key = canonical_interaction(parts[0], parts[1]);
      interactions.emplace_back(parts[0], parts[1]);
      add(key);
    } else {
      if (term.empty()) throw DomainError("empty fixed term");
      add(term);
    }
    if (!explicit_terms.insert(key).second) throw DomainError("duplicate fixed term '" + term + "'");
  }
  for (const auto& [a, b] : interactions) {
    if (!seen.count(a) || !seen.count(b)) {
      throw DomainError("interaction '" + a + ":" + b + "' references an undeclared main effect");
    }
  }
  return out;
}

std::vector<std::string> RegressionSpec::required_columns() const {
  std::vector<std::string> cols{response};
  for (const auto& t : expanded_terms()) {
    if (t.find(':') == std::string::npos) cols.push_back(t);
  }
  cols.insert(cols.end(), random_intercepts.begin(), random_intercepts.end());
  return cols;
}

std::vector<std::size_t> complete_rows(const FeatureTable& t, const std::vector<RegressionSpec>& specs) {
  std::set<std::string> cols;
  for (const auto& s : specs) {
    for (const auto& c : s.required_columns()) {
      if (!t.has(c)) throw DomainError("regression references missing column '" + c + "'");
      cols.insert(c);
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    bool ok = true;
    for (const auto& c : cols) {
      if (!t.present(c, r)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

DesignMatrices build_design(const FeatureTable& t, const RegressionSpec& spec, const std::vector<std::size_t>* rows_in) {
  DesignMatrices d;
  d.rows = rows_in ? *rows_in : complete_rows(t, {spec});
  const std::size_t n = d.rows.size();
  d.terms = spec.expanded_terms();
  for (const auto& c : spec.required_columns()) {
    if (!t.has(c)) throw DomainError("regression references missing column '" + c + "'");
    for (auto r : d.rows) {
      if (!t.present(c, r)) throw DomainError("column '" + c + "' has absent values in the selected rows");
    }
  }
  if (n == 0) throw DomainError("regression has no complete rows");
  if (!t.has_numeric(spec.response)) throw DomainError("response '" + spec.response + "' must be numeric");

  d.y.resize(static_cast<Eigen::Index>(n));
  const auto& resp = t.numeric(spec.response);
  for (std::size_t i = 0; i < n; ++i) {
    double v = resp[d.rows[i]];
    if (spec.transform == ResponseTransform::log) {
      if (!(v > 0)) throw DomainError("log response requires positive values of '" + spec.response + "'");
      v = std::log(v);
    }
    d.y(static_cast<Eigen::Index>(i)) = v;
  }

  // Numeric main effects, standardized on the selected rows when requested.
  std::map<std::string, Eigen::VectorXd> numeric_cols;
  auto numeric_column = [&](const std::string& name) -> const Eigen::VectorXd& {
    auto it = numeric_cols.find(name);
    if (it != numeric_cols.end()) return it->second;
    const auto& src = t.numeric(name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = src[d.rows[i]];
    if (spec.standardize && n > 1) {
      const double mean = v.mean();
      const double sd = std::sqrt((v.array() - mean).square().sum() / double(n - 1));
      if (sd > 0) v = (v.array() - mean) / sd;
    }
    return numeric_cols.emplace(name, std::move(v)).first->second;
  };

  std::vector<Eigen::VectorXd> cols;
  cols.emplace_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  d.columns.push_back("(Intercept)");
  d.column_term.push_back(-1);
  for (std::size_t ti = 0; ti < d.terms.size(); ++ti) {
    const auto& term = d.terms[ti];
    if (term.find(':') != std::string::npos) {
      const auto parts = split_term(term, ':');
      for (const auto& p : parts) {
        if (!t.has_numeric(p)) throw DomainError("interaction '" + term + "' needs numeric columns");
      }
      cols.emplace_back(numeric_column(parts[0]).cwiseProduct(numeric_column(parts[1])));
      d.columns.push_back(term);
      d.column_term.push_back(int(ti));
    } else if (t.has_numeric(term)) {
      cols.push_back(numeric_column(term));
      d.columns.push_back(term);
      d.column_term.push_back(int(ti));
    } else {
      const auto& src = t.categorical(term);
      std::set<std::string> level_set;
      for (auto r : d.rows) level_set.insert(src[r]);
      const std::vector<std::string> levels(level_set.begin(), level_set.end());
      for (std::size_t li = 1; li < levels.size(); ++li) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = src[d.rows[i]] == levels[li] ? 1.0 : 0.0;
        cols.push_back(std::move(v));
        d.columns.push_back(term + "=" + levels[li]);
        d.column_term.push_back(int(ti));
      }
    }
  }
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) d.X.col(static_cast<Eigen::Index>(j)) = cols[j];

  if (n < d.p()) {
    throw RankDeficiencyError("design has " + std::to_string(d.p()) + " columns but only " + std::to_string(n) + " rows");
  }
  // Scale columns before the rank test so that units do not matter.
  Eigen::MatrixXd scaled = d.X;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-9);
  const auto rank = qr.rank();
  if (rank < scaled.cols()) {
    std::string names;
    for (Eigen::Index k = rank; k < scaled.cols(); ++k) {
      if (!names.empty()) names += ", ";
      names += d.columns[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
    }
    throw RankDeficiencyError("fixed-effect design is rank deficient; collinear terms: " + names);
  }

  for (const auto& g : spec.random_intercepts) {
    GroupingFactor gf;
    gf.name = g;
    std::vector<std::string> labels;
    labels.reserve(n);
    if (t.has_categorical(g)) {
      for (auto r : d.rows) labels.push_back(t.categorical(g)[r]);
    } else {
      for (auto r : d.rows) labels.push_back(tsv::format_double(t.numeric(g)[r]));
    }
    std::set<std::string> level_set(labels.begin(), labels.end());
    gf.levels.assign(level_set.begin(), level_set.end());
    if (gf.levels.size() < 2) {
      warn("grouping factor '" + g + "' has a single level and is dropped from the random effects");
      continue;
    }
    gf.level_of_row.reserve(n);
    for (const auto& l : labels) {
      gf.level_of_row.push_back(int(std::lower_bound(gf.levels.begin(), gf.levels.end(), l) - gf.levels.begin()));
    }
    d.groups.push_back(std::move(gf));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Profiled deviance

ProfiledDeviance::ProfiledDeviance(const DesignMatrices& d) : n_(d.n()), p_(d.p()), q_(0) {
  for (const auto& g : d.groups) {
    group_offsets_.push_back(q_);
    q_ += g.levels.size();
  }
  for (std::size_t j = 0; j < p_; ++j) {
    if (d.column_term[j] == -1) intercept_col_ = int(j);
  }
  Eigen::VectorXd y = d.y;
  if (intercept_col_ >= 0) {
    y_shift_ = y.mean();
    y.array() -= y_shift_;
  }
  const auto q = static_cast<Eigen::Index>(q_);
  const auto p = static_cast<Eigen::Index>(p_);
  ZtZ_ = Eigen::MatrixXd::Zero(q, q);
  ZtX_ = Eigen::MatrixXd::Zero(q, p);
  Zty_ = Eigen::VectorXd::Zero(q);
  std::vector<Eigen::Index> idx(d.groups.size());
  for (std::size_t i = 0; i < n_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
      idx[g] = static_cast<Eigen::Index>(group_offsets_[g]) + d.groups[g].level_of_row[i];
    }
    for (std::size_t g = 0; g < idx.size(); ++g) {
      for (std::size_t h = 0; h < idx.size(); ++h) ZtZ_(idx[g], idx[h]) += 1.0;
      ZtX_.row(idx[g]) += d.X.row(ii);
      Zty_(idx[g]) += y(ii);
    }
  }
  XtX_ = d.X.transpose() * d.X;
  Xty_ = d.X.transpose() * y;
  yty_ = y.squaredNorm();
}

ProfiledDeviance::Solution ProfiledDeviance::solve(const std::vector<double>& theta) const {
  if (theta.size() != group_offsets_.size()) throw DomainError("theta has the wrong dimension");
  const auto q = static_cast<Eigen::Index>(q_);
  Eigen::VectorXd lam(q);
  for (std::size_t g = 0; g < group_offsets_.size(); ++g) {
    const std::size_t end = g + 1 < group_offsets_.size() ? group_offsets_[g + 1] : q_;
    for (std::size_t k = group_offsets_[g]; k < end; ++k) lam(static_cast<Eigen::Index>(k)) = theta[g];
  }
  Solution s;
  double logdet = 0.0;
  Eigen::VectorXd cu;
  Eigen::MatrixXd RZX;
  if (q > 0) {
    Eigen::MatrixXd M = lam.asDiagonal() * ZtZ_ * lam.asDiagonal();
    M.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> L(M);
    if (L.info() != Eigen::Success) {
      s.deviance = std::numeric_limits<double>::infinity();
      return s;
    }
    logdet = 2.0 * L.matrixL().toDenseMatrix().diagonal().array().log().sum();
    cu = L.matrixL().solve(lam.cwiseProduct(Zty_));
    RZX = L.matrixL().solve(lam.asDiagonal() * ZtX_);
  } else {
    cu = Eigen::VectorXd::Zero(0);
    RZX = Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(p_));
  }
  const Eigen::MatrixXd A = XtX_ - RZX.transpose() * RZX;
  const Eigen::VectorXd b = Xty_ - RZX.transpose() * cu;
  Eigen::LLT<Eigen::MatrixXd> LA(A);
  if (LA.info() != Eigen::Success) {
    s.deviance = std::numeric_limits<double>::infinity();
    return s;
  }
  s.beta = LA.solve(b);
  const double r2 = yty_ - cu.squaredNorm() - b.dot(s.beta);
  if (!(r2 > 0)) {
    s.deviance = std::numeric_limits<double>::infinity();
    return s;
  }
  if (intercept_col_ >= 0) s.beta(intercept_col_) += y_shift_;
  const double n = static_cast<double>(n_);
  s.sigma2 = r2 / n;
  s.deviance = logdet + n * (1.0 + std::log(2.0 * std::numbers::pi * r2 / n));
  return s;
}

double ProfiledDeviance::operator()(const std::vector<double>& theta) const { return solve(theta).deviance; }

double ProfiledDeviance::at_log_ratio(const std::vector<double>& log_ratio) const {
  std::vector<double> theta(log_ratio.size());
  for (std::size_t i = 0; i < log_ratio.size(); ++i) theta[i] = std::exp(0.5 * log_ratio[i]);
  return (*this)(theta);
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

constexpr double kMinLogRatio = -40.0;  // variance ratio ~4e-18

struct Minimum {
  std::vector<double> x;
  double f = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

template <class F>
Minimum nelder_mead(const F& f, std::vector<double> x0, double step, double tol, std::size_t max_iter) {
  const std::size_t dim = x0.size();
  auto clamp = [](std::vector<double> x) {
    for (auto& v : x) v = std::max(v, kMinLogRatio);
    return x;
  };
  std::vector<std::vector<double>> pts{clamp(x0)};
  for (std::size_t i = 0; i < dim; ++i) {
    auto p = x0;
    p[i] += step;
    pts.push_back(clamp(p));
  }
  std::vector<double> fv;
  for (const auto& p : pts) fv.push_back(f(p));

  Minimum m;
  for (m.iterations = 0; m.iterations < max_iter; ++m.iterations) {
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> sp;
    std::vector<double> sf;
    for (auto i : order) {
      sp.push_back(pts[i]);
      sf.push_back(fv[i]);
    }
    pts = std::move(sp);
    fv = std::move(sf);

    const double spread = fv.back() - fv.front();
    if (std::isfinite(fv.front()) && spread <= tol * std::max(1.0, std::abs(fv.front()))) {
      m.converged = true;
      break;
    }
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) centroid[k] += pts[i][k] / double(dim);
    auto along = [&](double t) {
      std::vector<double> p(dim);
      for (std::size_t k = 0; k < dim; ++k) p[k] = centroid[k] + t * (pts[dim][k] - centroid[k]);
      return clamp(p);
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[dim] = xe;
        fv[dim] = fe;
      } else {
        pts[dim] = xr;
        fv[dim] = fr;
      }
      continue;
    }
    if (fr < fv[dim - 1]) {
      pts[dim] = xr;
      fv[dim] = fr;
      continue;
    }
    const bool outside = fr < fv[dim];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : fv[dim])) {
      pts[dim] = xc;
      fv[dim] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= dim; ++i) {
      for (std::size_t k = 0; k < dim; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
      pts[i] = clamp(pts[i]);
      fv[i] = f(pts[i]);
    }
  }
  const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
  m.x = pts[static_cast<std::size_t>(best)];
  m.f = fv[static_cast<std::size_t>(best)];
  return m;
}

// Newton iterations on central finite differences. Coordinates pinned at the
// lower bound with an outward gradient are held fixed.
template <class F>
void newton_polish(const F& f, Minimum& m, std::size_t max_steps = 30) {
  const std::size_t dim = m.x.size();
  const double h = 1e-4;
  for (std::size_t it = 0; it < max_steps; ++it) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd H(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
      auto x = m.x;
      x[i] += di;
      x[j] += dj;
      return f(x);
    };
    for (std::size_t i = 0; i < dim; ++i) {
      const double fp = at(i, h, i, 0.0), fm = at(i, -h, i, 0.0);
      g(Eigen::Index(i)) = (fp - fm) / (2 * h);
      H(Eigen::Index(i), Eigen::Index(i)) = (fp - 2 * m.f + fm) / (h * h);
      for (std::size_t j = 0; j < i; ++j) {
        const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4 * h * h);
        H(Eigen::Index(i), Eigen::Index(j)) = H(Eigen::Index(j), Eigen::Index(i)) = v;
      }
    }
    std::vector<bool> active(dim, true);
    for (std::size_t i = 0; i < dim; ++i) {
      if (m.x[i] <= kMinLogRatio + 1e-12 && g(Eigen::Index(i)) > 0) active[i] = false;
      // Far into the boundary region the objective is flat; leave those alone.
      if (m.x[i] < -20.0 && std::abs(g(Eigen::Index(i))) < 1e-8) active[i] = false;
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(Eigen::Index(dim));
    std::vector<Eigen::Index> act;
    for (std::size_t i = 0; i < dim; ++i)
      if (active[i]) act.push_back(Eigen::Index(i));
    if (act.empty()) return;
    double gmax = 0.0;
    for (auto i : act) gmax = std::max(gmax, std::abs(g(i)));
    if (gmax < 1e-9) return;
    Eigen::MatrixXd Ha(act.size(), act.size());
    Eigen::VectorXd ga(act.size());
    for (std::size_t a = 0; a < act.size(); ++a) {
      ga(Eigen::Index(a)) = g(act[a]);
      for (std::size_t b = 0; b < act.size(); ++b) Ha(Eigen::Index(a), Eigen::Index(b)) = H(act[a], act[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Ha);
    Eigen::VectorXd sa = llt.info() == Eigen::Success ? Eigen::VectorXd(-llt.solve(ga)) : Eigen::VectorXd(-ga);
    for (std::size_t a = 0; a < act.size(); ++a) step(act[a]) = sa(Eigen::Index(a));
    double t = 1.0;
    bool improved = false;
    while (t > 1e-10) {
      auto x = m.x;
      for (std::size_t i = 0; i < dim; ++i) x[i] = std::max(kMinLogRatio, x[i] + t * step(Eigen::Index(i)));
      const double fx = f(x);
      if (fx < m.f) {
        m.x = x;
        m.f = fx;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) return;
  }
}

}  // namespace

FittedLMM fit_lmm(const DesignMatrices& d, const FitOptions& options) {
  if (d.n() <= d.p()) throw DomainError("fit_lmm: need more observations than fixed effects");
  ProfiledDeviance dev(d);
  FittedLMM fit;
  fit.columns = d.columns;
  fit.n = d.n();

  std::vector<double> theta;
  if (options.fixed_theta) {
    theta = *options.fixed_theta;
    fit.converged = true;
  } else if (dev.n_theta() == 0) {
    fit.converged = true;
  } else {
    auto objective = [&](const std::vector<double>& x) { return dev.at_log_ratio(x); };
    Minimum best = nelder_mead(objective, std::vector<double>(dev.n_theta(), 0.0), 1.0, options.tolerance,
                               options.max_iterations);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<double> start = best.x;
    for (auto& v : start) v = std::max(kMinLogRatio, v + jitter(rng));
    Minimum second = nelder_mead(objective, start, 0.5, options.tolerance, options.max_iterations);
    fit.iterations = best.iterations + second.iterations;
    const bool both = best.converged && second.converged;
    if (second.f < best.f) best = second;
    newton_polish(objective, best);
    fit.converged = both && std::isfinite(best.f);
    for (double v : best.x) theta.push_back(std::exp(0.5 * v));
  }

  const auto sol = dev.solve(theta);
  if (!std::isfinite(sol.deviance)) {
    fit.converged = false;
    fit.loglik = -std::numeric_limits<double>::infinity();
    fit.beta = Eigen::VectorXd::Constant(Eigen::Index(d.p()), std::numeric_limits<double>::quiet_NaN());
    return fit;
  }
  fit.theta = theta;
  fit.beta = sol.beta;
  fit.sigma2 = sol.sigma2;
  fit.loglik = -0.5 * sol.deviance;
  for (std::size_t g = 0; g < d.groups.size(); ++g) {
    fit.variance_components.push_back(VarianceComponent{d.groups[g].name, sol.sigma2 * theta[g] * theta[g]});
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Likelihood-ratio comparison

double chi_square_sf(double stat, std::size_t df) {
  if (df == 0) return 1.0;
  if (!(stat > 0)) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double student_t_two_sided(double t, double df) {
  if (std::isnan(t) || !(df > 0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double f_sf(double stat, double df1, double df2) {
  if (std::isnan(stat)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(stat)) return 0.0;
  if (!(stat > 0)) return 1.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

DeltaLogLik delta_loglik(double ll_full, double ll_base, std::size_t n, std::size_t df) {
  if (n == 0) throw DomainError("delta_loglik: no data points");
  DeltaLogLik out;
  out.n = n;
  out.df = df;
  out.value = (ll_full - ll_base) / static_cast<double>(n);
  out.lrt_stat = 2.0 * (ll_full - ll_base);
  out.p_value = chi_square_sf(out.lrt_stat, df);
  return out;
}

DeltaLogLik delta_loglik(const FittedLMM& full, const FittedLMM& base) {
  if (!full.converged || !base.converged) throw ConvergenceError("delta_loglik: model did not converge");
  if (full.n != base.n) {
    throw DomainError("delta_loglik: models were fitted on different row counts (" + std::to_string(full.n) +
                      " vs " + std::to_string(base.n) + ")");
  }
  const std::set<std::string> full_cols(full.columns.begin(), full.columns.end());
  for (const auto& c : base.columns) {
    if (!full_cols.count(c)) throw DomainError("delta_loglik: baseline column '" + c + "' is not in the full model");
  }
  std::vector<std::string> fg, bg;
  for (const auto& v : full.variance_components) fg.push_back(v.name);
  for (const auto& v : base.variance_components) bg.push_back(v.name);
  if (fg != bg) throw DomainError("delta_loglik: random-effect structures differ");
  return delta_loglik(full.loglik, base.loglik, full.n, full.columns.size() - base.columns.size());
}

// ---------------------------------------------------------------------------
// Ordinary least squares

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> columns) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw DomainError("fit_ols: response length does not match the design");
  if (n < p || p == 0) throw RankDeficiencyError("fit_ols: too few rows for the design");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw RankDeficiencyError("fit_ols: design is rank deficient");

  OlsFit fit;
  fit.columns = std::move(columns);
  fit.n = static_cast<std::size_t>(n);
  fit.df_resid = static_cast<std::size_t>(n - p);
  fit.beta = qr.solve(y);
  fit.residuals = y - X * fit.beta;
  fit.rss = fit.residuals.squaredNorm();
  fit.sigma2_ml = fit.rss / double(n);
  fit.loglik = fit.rss > 0 ? -0.5 * double(n) * (std::log(2.0 * std::numbers::pi * fit.sigma2_ml) + 1.0)
                           : std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  const double s2 = fit.df_resid > 0 ? fit.rss / double(fit.df_resid) : std::numeric_limits<double>::quiet_NaN();
  fit.std_error.resize(p);
  fit.t_value.resize(p);
  fit.p_value.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto j = perm(k);
    fit.std_error(j) = std::sqrt(s2 * cov_perm(k, k));
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = fit.std_error(j);
    const double b = fit.beta(j);
    if (se == 0.0 && std::abs(b) < 1e-12) {
      fit.t_value(j) = 0.0;
      fit.p_value(j) = 1.0;
    } else {
      fit.t_value(j) = b / se;
      fit.p_value(j) = student_t_two_sided(fit.t_value(j), double(fit.df_resid));
    }
  }
  return fit;
}

OlsFit fit_ols(const DesignMatrices& d) { return fit_ols(d.X, d.y, d.columns); }

}  // namespace gazefit
