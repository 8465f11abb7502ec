#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazefit/analysis.hpp"
#include "gazefit/corpus.hpp"
#include "gazefit/surprisal.hpp"

namespace gazefit {

enum class ResidualKind { gaussian, lognormal };

// Coefficients of the generating model. Lag and frequency terms read the same
// features the regression uses.
struct SynthBeta {
  double intercept = 250.0;
  double surprisal = 10.0;
  double surprisal_prev_1 = 0.0;
  double surprisal_prev_2 = 0.0;
  double freq = 0.0;
  double length = 0.0;
};

struct SynthSpec {
  std::size_t n_articles = 8;
  std::size_t n_subjects = 8;
  std::size_t n_sentences = 6;  // per article
  std::size_t segments_per_sentence = 8;
  std::size_t segments_per_line = 7;
  std::size_t lines_per_screen = 4;
  SynthBeta beta;
  double sd_article = 10.0;
  double sd_subject = 20.0;
  double sd_resid = 40.0;  // log-scale SD for lognormal residuals
  double position_slope = 0.0;  // GD change per tokenN step
  std::map<SynCategory, double> category_offsets;
  std::map<SemCategory, double> sem_category_offsets;
  double dependents_slope = 0.0;
  // Added to every subword surprisal of a segment in the category.
  std::map<SynCategory, double> surprisal_category_offsets;
  double subword_surprisal_mean = 2.5;
  double subword_surprisal_shape = 2.0;
  ResidualKind residual = ResidualKind::gaussian;
  LanguageStyle style = LanguageStyle::english_like;
  // Randomly keep this many data points.
  std::optional<std::size_t> n_points_target;
  // Replaces sd_resid with the value giving this expected coefficient of variation.
  std::optional<double> target_cv;
  std::uint64_t seed = 1;

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct GroundTruth {
  SynthSpec spec;  // sd_resid resolved
  double expected_cv = 0.0;
  double realized_sd_article = 0.0;
  double realized_sd_subject = 0.0;
  std::size_t n_points = 0;
};

struct SynthData {
  Corpus corpus;
  SurprisalTable surprisal;  // the generating surprisals
  UnigramCounts counts;
  GroundTruth truth;
};

SynthData generate(const SynthSpec& spec);

// Writes corpus.tsv, surprisal.tsv, counts.tsv and truth.json into `dir`.
void write_synth(const SynthData& data, const std::filesystem::path& dir);
std::string ground_truth_json(const GroundTruth& truth);

enum class SuiteShape { monotone, u_shaped };
std::string_view to_string(SuiteShape s);
SuiteShape parse_suite_shape(std::string_view s);

struct LMConfig {
  std::string lm_id;
  Architecture architecture = Architecture::trans_lg;
  DataSize data_size = DataSize::lg;
  long long updates = 0;
  double ppl = 0.0;
  double noise_sd = 0.0;  // log-scale multiplicative noise on the generating surprisals
};

struct Suite {
  std::vector<LMConfig> lms;
  SuiteShape shape = SuiteShape::monotone;
  double turning_ppl = 0.0;  // PPL of the best LM
};

// Perplexities log-spaced over [30, 3000]. Monotone suites degrade with PPL;
// u-shaped suites are best at the middle LM.
Suite make_suite(std::size_t n_lms, SuiteShape shape, std::uint64_t seed);

// Noisy copy of the generating surprisals, scaled so exp(mean) equals cfg.ppl.
SurprisalTable lm_surprisals(const SurprisalTable& truth, const LMConfig& cfg, std::uint64_t seed);

LMRecord record_for(const LMConfig& cfg, std::uint64_t seed);

// Writes lms.json and lms/<id>.tsv into `dir`.
void write_suite(const Suite& suite, const SurprisalTable& truth, std::uint64_t seed,
                 const std::filesystem::path& dir);

}  // namespace gazefit
