#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefit/corpus.hpp"
#include "gazefit/mixedlm.hpp"
#include "gazefit/surprisal.hpp"

namespace gazefit {

enum class Architecture { trans_lg, trans_sm, lstm, ngram };
enum class DataSize { lg, md, sm };

std::string_view to_string(Architecture a);
std::string_view to_string(DataSize d);
Architecture parse_architecture(std::string_view s);
DataSize parse_data_size(std::string_view s);
// Relative training-set size: lg = 1, md = 0.1, sm = 0.01.
double relative_data_size(DataSize d);

struct LMRecord {
  std::string lm_id;
  Architecture architecture = Architecture::trans_lg;
  DataSize data_size = DataSize::lg;
  long long updates = 0;
  long long seed = 0;
  double ppl = 0.0;
  double delta_loglik = 0.0;  // nats per data point
  double p_value = 1.0;
  double lrt_stat = 0.0;
  std::size_t df = 0;
  std::size_t n = 0;
};

// A corpus ready for regression: the filtered data points plus the text index of
// the unfiltered corpus they came from.
struct GazeData {
  Corpus filtered;
  TextIndex index;                         // built on the unfiltered corpus
  std::vector<std::size_t> point_segment;  // filtered point -> TextIndex segment
  FilterCounts filter_counts;
  LanguageStyle style = LanguageStyle::english_like;
};

// Filters `raw` with `policy` (or keeps every point when `filter` is false) and
// maps the surviving points onto the text index.
GazeData prepare_gaze_data(const Corpus& raw, const FilterPolicy& policy, LanguageStyle style, bool filter = true);

// One row per filtered data point with the gaze-duration regression columns:
// gd, article, subj, screenN, lineN, segmentN, sentN, tokenN, surprisal,
// surprisal_prev_1, surprisal_prev_2, freq, length, freq_prev_1, length_prev_1.
FeatureTable gaze_feature_table(const GazeData& data, const TextFeatures& features);

// GD ~ surprisal [+ lags] + freq*length + freq_prev_1*length_prev_1
//      + screenN + lineN + segmentN + (1|article) + (1|subj).
RegressionSpec gaze_regression_spec(int spillover, bool with_surprisal,
                                    ResponseTransform transform = ResponseTransform::identity);

struct PowerOptions {
  SpilloverPolicy spillover;
  ResponseTransform transform = ResponseTransform::identity;
  bool standardize = false;
  FitOptions fit;
};

struct PowerResult {
  double ppl = 0.0;
  DeltaLogLik delta;
  FittedLMM full;
  FittedLMM base;
};

// Fits the full and surprisal-free models on identical rows.
PowerResult psychometric_power(const GazeData& data, const TextFeatures& features, double ppl,
                               const PowerOptions& options);
PowerResult psychometric_power(const GazeData& data, const SurprisalTable& table, const UnigramCounts& counts,
                               const PowerOptions& options);

// Pearson correlation of average ranks. Throws DomainError for unequal lengths,
// fewer than two points, or a constant input.
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> v);

struct SuiteReport {
  double rho = 0.0;
  double split_ppl = 400.0;
  std::optional<double> rho_above;  // ppl > split
  std::optional<double> rho_below;  // ppl <= split
  std::size_t n_above = 0;
  std::size_t n_below = 0;
  std::vector<LMRecord> records;
};

SuiteReport suite_report(std::vector<LMRecord> records, double split_ppl = 400.0);

struct FactorTest {
  std::string factor;  // architecture, data_size, updates
  std::size_t df = 0;
  double f_stat = 0.0;
  double p_value = 1.0;
};

struct FactorRegression {
  OlsFit fit;
  std::vector<FactorTest> factors;
  std::size_t n = 0;
  std::size_t excluded = 0;  // records without parameter updates (n-gram LMs)
};

// OLS of delta_loglik on architecture dummies, log relative data size and
// log updates, with a partial F test per factor.
FactorRegression factor_regression(std::span<const LMRecord> records);

struct CurvePoint {
  double position = 0.0;
  double value = 0.0;
  double half_width = 0.0;  // 95% band
  std::size_t count = 0;
};

struct UidReport {
  double cv = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  std::vector<CurvePoint> position_curve;
  std::string curve_method;  // "pspline" or "binned"
  double smoothing_lambda = 0.0;
  double effective_df = 0.0;
  double position_slope = 0.0;
  double position_slope_p = 1.0;
};

// Binned means are used when fewer than this many distinct positions exist.
inline constexpr std::size_t kMinSplinePositions = 6;

// Penalized cubic regression spline of y on x with the smoothing weight chosen
// by generalized cross-validation; evaluated at the distinct x values.
struct SplineFit {
  std::vector<CurvePoint> curve;
  double lambda = 0.0;
  double edf = 0.0;
};
SplineFit penalized_spline(std::span<const double> x, std::span<const double> y);
std::vector<CurvePoint> binned_means(std::span<const double> x, std::span<const double> y);

UidReport uid_stats(const Corpus& c);

enum class ProbeFactor { syn_category, sem_category, n_dependents };
std::string_view to_string(ProbeFactor f);
ProbeFactor parse_probe_factor(std::string_view s);

// Minimum share of rows carrying the probed annotation.
inline constexpr double kMinAnnotationShare = 0.95;

struct ProbeRow {
  double response = 0.0;
  int sent_n = 1;
  int position = 1;  // tokenN for probing, segmentN for dominance
  int length = 1;
  double freq = 0.0;
  std::optional<SynCategory> syn_category;
  std::optional<SemCategory> sem_category;
  std::optional<int> n_dependents;
};

// OLS of response ~ factor + sentN + position + freq*length against the model
// without the factor, on the annotated rows. value is the per-row log-likelihood
// gain. Throws DomainError when fewer than kMinAnnotationShare rows are annotated.
DeltaLogLik factor_effect(std::span<const ProbeRow> rows, ProbeFactor factor, std::string_view position_name);

// Simulated gaze durations: one row per text segment that survives filtering,
// response = the LM's segment surprisal.
std::vector<ProbeRow> probe_rows(const GazeData& data, const TextFeatures& features);
DeltaLogLik probe_effect(const GazeData& data, const TextFeatures& features, ProbeFactor factor);

struct DominanceEntry {
  ProbeFactor factor;
  DeltaLogLik effect;
};

// Effect of each annotation on the human gaze durations (one row per data
// point), ranked from strongest.
std::vector<DominanceEntry> factor_dominance(const GazeData& data, const TextFeatures& features);

}  // namespace gazefit
