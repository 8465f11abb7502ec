#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gazefit {

// Column store feeding the regressions. Absent numeric values are NaN, absent
// categorical values are empty strings.
class FeatureTable {
 public:
  explicit FeatureTable(std::size_t rows = 0) : rows_(rows) {}

  std::size_t rows() const { return rows_; }
  void add_numeric(const std::string& name, std::vector<double> values);
  void add_categorical(const std::string& name, std::vector<std::string> values);
  bool has_numeric(const std::string& name) const { return numeric_.count(name) > 0; }
  bool has_categorical(const std::string& name) const { return categorical_.count(name) > 0; }
  bool has(const std::string& name) const { return has_numeric(name) || has_categorical(name); }
  const std::vector<double>& numeric(const std::string& name) const;
  const std::vector<std::string>& categorical(const std::string& name) const;
  bool present(const std::string& name, std::size_t row) const;

  // New table holding only `rows`, in that order.
  FeatureTable subset(const std::vector<std::size_t>& rows) const;

 private:
  std::size_t rows_;
  std::map<std::string, std::vector<double>> numeric_;
  std::map<std::string, std::vector<std::string>> categorical_;
};

enum class ResponseTransform { identity, log };

// Fixed terms are column names, "a:b" interactions, or "a*b" which expands to
// a + b + a:b. Categorical columns enter with treatment coding.
struct RegressionSpec {
  std::string response = "gd";
  std::vector<std::string> fixed_terms;
  std::vector<std::string> random_intercepts;
  ResponseTransform transform = ResponseTransform::identity;
  bool standardize = false;  // z-score numeric predictors before forming products

  // Main effects and interactions after expansion, without duplicates. Throws
  // DomainError for duplicates or interactions whose parts are not main effects.
  std::vector<std::string> expanded_terms() const;
  // Every column a RegressionSpec reads: response, predictors, grouping factors.
  std::vector<std::string> required_columns() const;
};

struct GroupingFactor {
  std::string name;
  std::vector<std::string> levels;
  std::vector<int> level_of_row;
};

struct DesignMatrices {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> columns;  // "(Intercept)" first
  std::vector<std::string> terms;    // expanded terms
  std::vector<int> column_term;      // term index per column, -1 for the intercept
  std::vector<GroupingFactor> groups;
  std::vector<std::size_t> rows;  // source rows of the FeatureTable

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

// Rows where every column required by any of `specs` is present. Baseline and
// full models built on these rows see identical data.
std::vector<std::size_t> complete_rows(const FeatureTable& t, const std::vector<RegressionSpec>& specs);

// Throws RankDeficiencyError naming the collinear columns. Grouping factors with a
// single level are dropped with a warning.
DesignMatrices build_design(const FeatureTable& t, const RegressionSpec& spec,
                            const std::vector<std::size_t>* rows = nullptr);

struct VarianceComponent {
  std::string name;
  double variance = 0.0;
};

struct FittedLMM {
  std::vector<std::string> columns;
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  std::vector<VarianceComponent> variance_components;
  std::vector<double> theta;  // relative standard deviations, one per grouping factor
  double loglik = 0.0;
  std::size_t n = 0;
  bool converged = false;
  std::size_t iterations = 0;
};

struct FitOptions {
  std::size_t max_iterations = 4000;
  double tolerance = 1e-10;  // relative objective spread across the simplex
  // Evaluate at these relative standard deviations instead of optimizing.
  std::optional<std::vector<double>> fixed_theta;
  std::uint64_t seed = 271828;  // perturbation of the restart point
};

// Profiled ML deviance (-2 log-likelihood) of a crossed random-intercept model,
// with beta and sigma^2 profiled out. Built once per design; each evaluation costs
// O(q^3) in the number of random-effect levels q.
class ProfiledDeviance {
 public:
  explicit ProfiledDeviance(const DesignMatrices& d);

  std::size_t n_theta() const { return group_offsets_.size(); }
  // theta: relative standard deviations (>= 0).
  double operator()(const std::vector<double>& theta) const;
  // Objective in the optimizer's coordinates: log variance ratios.
  double at_log_ratio(const std::vector<double>& log_ratio) const;

  struct Solution {
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    double deviance = 0.0;
  };
  Solution solve(const std::vector<double>& theta) const;

 private:
  std::size_t n_, p_, q_;
  double y_shift_ = 0.0;
  int intercept_col_ = -1;
  std::vector<std::size_t> group_offsets_;
  Eigen::MatrixXd ZtZ_, ZtX_, XtX_;
  Eigen::VectorXd Zty_, Xty_;
  double yty_ = 0.0;
};

// Maximum-likelihood fit with crossed random intercepts. Nelder-Mead over log
// variance ratios with one seeded restart, then Newton polishing.
FittedLMM fit_lmm(const DesignMatrices& d, const FitOptions& options = {});

struct DeltaLogLik {
  double value = 0.0;  // nats per data point
  double lrt_stat = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Requires converged fits on the same rows with base columns contained in full.
DeltaLogLik delta_loglik(const FittedLMM& full, const FittedLMM& base);
DeltaLogLik delta_loglik(double ll_full, double ll_base, std::size_t n, std::size_t df);

struct OlsFit {
  std::vector<std::string> columns;
  Eigen::VectorXd beta;
  Eigen::VectorXd std_error;
  Eigen::VectorXd t_value;
  Eigen::VectorXd p_value;  // two-sided
  Eigen::VectorXd residuals;
  double rss = 0.0;
  double sigma2_ml = 0.0;
  double loglik = 0.0;
  std::size_t n = 0;
  std::size_t df_resid = 0;
};

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> columns = {});
OlsFit fit_ols(const DesignMatrices& d);

// Upper tail of the chi-square distribution; p = 1 when df = 0.
double chi_square_sf(double stat, std::size_t df);
// Two-sided Student t p-value.
double student_t_two_sided(double t, double df);
// Upper tail of the F distribution.
double f_sf(double stat, double df1, double df2);

}  // namespace gazefit
