#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gazefit/analysis.hpp"
#include "gazefit/corpus.hpp"
#include "gazefit/error.hpp"
#include "gazefit/ngram.hpp"
#include "gazefit/surprisal.hpp"
#include "gazefit/synth.hpp"
#include "gazefit/tokenize.hpp"

namespace gazefit {

// Worker count: `requested` (0 = hardware concurrency) capped by GAZEFIT_THREADS.
unsigned worker_count(unsigned requested = 0);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception is
// rethrown after every worker stops.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

// One LM of a suite: metadata plus the surprisal file it was scored into.
struct SuiteEntry {
  LMRecord record;
  std::filesystem::path surprisal;
};

// lms.json: {"lms": [{lm_id, architecture, data_size, updates, seed, surprisal}, ...]};
// surprisal paths are relative to the manifest's directory.
std::vector<SuiteEntry> read_suite_manifest(const std::filesystem::path& path);

// Eye-tracking sentences as text, one per TextIndex sentence, segments joined by a
// space so that no subword can straddle a segment boundary.
std::vector<std::string> sentence_texts(const TextIndex& index);

// Tokenizes and scores every sentence of the text index with an n-gram model.
SurprisalTable score_text(const TextIndex& index, const BpeModel& bpe, const NGramModel& lm,
                          const std::string& lm_id);

// Scores pre-tokenized lines of the form "article<TAB>sent<TAB>subword subword ...".
SurprisalTable score_lines(const std::vector<std::string>& lines, const NGramModel& lm, const std::string& lm_id);

UnigramCounts count_subwords(const std::vector<std::string>& lines, const BpeModel& bpe);

struct EvaluationOptions {
  PowerOptions power;
  double split_ppl = 400.0;
  unsigned threads = 0;
};

struct LMResult {
  LMRecord record;
  PowerResult power;
  std::vector<std::pair<ProbeFactor, DeltaLogLik>> probes;
};

struct SuiteEvaluation {
  std::vector<LMResult> lms;
  std::optional<SuiteReport> suite;
  std::string suite_note;  // why the correlations were skipped
  std::optional<FactorRegression> factors;
  std::string factor_note;  // why the factor regression was skipped
  UidReport uid;
  std::vector<DominanceEntry> dominance;
  std::string dominance_note;
  LanguageStyle style = LanguageStyle::english_like;
  CorpusStats stats;
  FilterCounts filter_counts;
  EvaluationOptions options;
};

// Aligns every table to the text index and derives its features, in parallel.
std::vector<TextFeatures> compute_suite_features(const GazeData& data, const std::vector<SurprisalTable>& tables,
                                                 const UnigramCounts& counts, SpilloverPolicy spillover,
                                                 unsigned threads);

// Fits every LM (records carry their PPL) and assembles the suite-level analyses.
SuiteEvaluation evaluate_suite(const GazeData& data, std::vector<LMRecord> records,
                               const std::vector<TextFeatures>& features, const EvaluationOptions& options);

// Deterministic JSON documents (sorted keys, shortest round-trip numbers).
std::string fit_report_json(const PowerResult& r);
std::string suite_report_json(const SuiteEvaluation& e);
std::string uid_report_json(const UidReport& u);

// Scatter of PPL (log x) against delta log-likelihood.
std::string ppl_scatter_svg(const SuiteReport& r);
// Curve of mean GD by position in sentence with its band.
std::string position_curve_svg(const UidReport& u);

// Pipeline configuration (one JSON document; relative paths resolve against the
// config file's directory).
struct RunConfig {
  LanguageStyle style = LanguageStyle::english_like;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> counts;
  std::optional<std::filesystem::path> suite;  // lms.json
  struct NGramArm {
    std::string lm_id = "ngram";
    std::filesystem::path train_text;
    int order = 5;
    std::size_t vocab_size = 1000;
    double coverage = 0.9995;
  };
  std::vector<NGramArm> ngram;
  std::optional<SynthSpec> synth;
  std::size_t synth_lms = 0;
  SuiteShape synth_shape = SuiteShape::monotone;
  FilterPolicy filter;
  bool apply_filter = true;
  int spillover = -1;  // -1: from language_style
  bool log_gd = false;
  bool standardize = false;
  double split_ppl = 400.0;
  std::filesystem::path output_dir = "gazefit_out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Carries the name of the pipeline stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Runs every stage and writes report.json, fits/<lm>.json, uid.json and the SVG
// plots into the output directory. Artifacts are assembled in a sibling
// temporary directory and moved into place only on success.
void run_pipeline(const RunConfig& config);

}  // namespace gazefit
