#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gazefit/analysis.hpp"
#include "gazefit/corpus.hpp"
#include "gazefit/ngram.hpp"
#include "gazefit/pipeline.hpp"
#include "gazefit/surprisal.hpp"
#include "gazefit/synth.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tokenize.hpp"
#include "gazefit/tsv.hpp"

namespace fs = std::filesystem;
using namespace gazefit;

namespace {

void require(const std::string& path) {
  if (!fs::exists(path)) throw Error("input not found: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  require(path);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string read_text(const std::string& path) {
  require(path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& out, const std::string& contents) {
  if (out.empty() || out == "-") {
    std::cout << contents;
  } else {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    tsv::write_atomic(out, contents);
  }
}

const std::map<std::string, LanguageStyle> kStyles{{"english_like", LanguageStyle::english_like},
                                                   {"japanese_like", LanguageStyle::japanese_like}};

struct GazeInput {
  std::string corpus;
  std::string counts;
  std::string style_name = "english_like";
  bool no_filter = false;
  double sd = 3.0;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "Eye-tracking corpus TSV (unfiltered)")->required();
    app->add_option("--counts", counts, "Unigram count TSV of the LM training data");
    app->add_option("--style", style_name, "Language style")->transform(CLI::IsMember(kStyles));
    app->add_flag("--no-filter", no_filter, "Corpus is already filtered");
    app->add_option("--sd", sd, "Outlier cutoff in standard deviations");
  }
  LanguageStyle style() const { return parse_language_style(style_name); }
  GazeData load() const {
    require(corpus);
    auto policy = FilterPolicy::for_style(style());
    policy.sd_cutoff = sd;
    return prepare_gaze_data(load_corpus(corpus), policy, style(), !no_filter);
  }
  UnigramCounts unigram(const SurprisalTable& t) const {
    if (!counts.empty()) {
      require(counts);
      return read_unigram_counts(counts);
    }
    warn("no --counts given; frequencies are estimated from the surprisal table");
    return counts_from_table(t);
  }
};

SurprisalTable load_table(const std::string& path) {
  require(path);
  auto t = read_surprisal_table(path);
  const auto problems = validate_surprisal_table(t);
  if (!problems.empty()) throw SchemaError(path + ": " + problems.front());
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surprisal and reading-time analysis toolkit"};
  app.require_subcommand(1);

  // filter
  auto* filter = app.add_subcommand("filter", "Apply the standard data-point exclusions");
  std::string filter_in, filter_out, filter_style = "english_like";
  double filter_sd = 3.0;
  bool keep_next_punct = false;
  filter->add_option("--in", filter_in)->required();
  filter->add_option("--out", filter_out)->required();
  filter->add_option("--sd", filter_sd, "Outlier cutoff in standard deviations");
  filter->add_flag("--keep-next-punct", keep_next_punct, "Keep segments followed by punctuation or numerals");
  filter->add_option("--style", filter_style)->transform(CLI::IsMember(kStyles));

  // bpe-train / bpe-encode
  auto* bpe_train = app.add_subcommand("bpe-train", "Learn BPE merges");
  std::string bpe_input, bpe_prefix;
  std::size_t vocab_size = 1000;
  double coverage = 0.9995;
  bpe_train->add_option("--input", bpe_input)->required();
  bpe_train->add_option("--vocab-size", vocab_size);
  bpe_train->add_option("--coverage", coverage);
  bpe_train->add_option("--out", bpe_prefix, "Output prefix for .merges and .vocab")->required();

  auto* bpe_encode = app.add_subcommand("bpe-encode", "Segment text into subwords");
  std::string enc_model, enc_in, enc_out;
  bpe_encode->add_option("--model", enc_model, "Model prefix")->required();
  bpe_encode->add_option("--in", enc_in)->required();
  bpe_encode->add_option("--out", enc_out);

  // ngram-train / score
  auto* ngram_train = app.add_subcommand("ngram-train", "Train an interpolated modified Kneser-Ney model");
  int order = 5;
  std::string ng_in, ng_out;
  ngram_train->add_option("--order", order)->check(CLI::Range(1, 10));
  ngram_train->add_option("--in", ng_in, "One tokenized sentence per line")->required();
  ngram_train->add_option("--out", ng_out, "ARPA file")->required();

  auto* score = app.add_subcommand("score", "Per-subword surprisal under an ARPA model");
  std::string sc_arpa, sc_in, sc_out, sc_id;
  score->add_option("--arpa", sc_arpa)->required();
  score->add_option("--in", sc_in, "Lines of article<TAB>sentN<TAB>space-separated subwords")->required();
  score->add_option("--out", sc_out);
  score->add_option("--lm-id", sc_id);

  // fit
  auto* fit = app.add_subcommand("fit", "Psychometric predictive power of one LM");
  GazeInput fit_in;
  std::string fit_surprisal, fit_out;
  int fit_spillover = -1;
  bool log_gd = false, standardize = false;
  fit_in.add(fit);
  fit->add_option("--surprisal", fit_surprisal)->required();
  fit->add_option("--spillover", fit_spillover, "2 or 0; defaults by style")->check(CLI::IsMember({0, 2}));
  fit->add_flag("--log-gd", log_gd);
  fit->add_flag("--standardize", standardize, "z-score numeric predictors");
  fit->add_option("--out", fit_out);

  // report
  auto* report = app.add_subcommand("report", "Evaluate an LM suite");
  GazeInput rep_in;
  std::string rep_suite, rep_out, rep_plots;
  double split_ppl = 400.0;
  int rep_spillover = -1;
  bool rep_log_gd = false;
  unsigned threads = 0;
  rep_in.add(report);
  report->add_option("--suite", rep_suite, "Directory holding lms.json")->required();
  report->add_option("--split-ppl", split_ppl);
  report->add_option("--spillover", rep_spillover)->check(CLI::IsMember({0, 2}));
  report->add_flag("--log-gd", rep_log_gd);
  report->add_option("--threads", threads);
  report->add_option("--out", rep_out);
  report->add_option("--plots", rep_plots, "Directory for SVG plots");

  // uid
  auto* uid = app.add_subcommand("uid", "Uniformity of gaze duration");
  GazeInput uid_in;
  std::string uid_out, uid_plot;
  uid_in.add(uid);
  uid->add_option("--out", uid_out);
  uid->add_option("--plot", uid_plot, "SVG of the position curve");

  // probe
  auto* probe = app.add_subcommand("probe", "Linguistic factor probing");
  GazeInput probe_in;
  std::string probe_surprisal, probe_out;
  std::vector<std::string> factors;
  bool dominance = false;
  probe_in.add(probe);
  probe->add_option("--surprisal", probe_surprisal)->required();
  probe->add_option("--factor", factors, "syn_category, sem_category or n_dependents (anti-locality)")
      ->check(CLI::IsMember({"syn_category", "sem_category", "n_dependents"}));
  probe->add_flag("--dominance", dominance, "Rank factors by their effect on gaze duration");
  probe->add_option("--out", probe_out);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with known ground truth");
  std::string synth_spec, synth_out, synth_shape = "monotone";
  std::size_t synth_lms = 0;
  synth->add_option("--spec", synth_spec)->required();
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--lms", synth_lms, "Also write a synthetic LM suite of this size");
  synth->add_option("--shape", synth_shape)->check(CLI::IsMember({"monotone", "u_shaped"}));

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline from a JSON config");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<unsigned> run_threads;
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out, "Overrides output_dir");
  run->add_option("--seed", run_seed, "Overrides seed");
  run->add_option("--threads", run_threads, "Overrides threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*filter) {
      require(filter_in);
      const auto style = parse_language_style(filter_style);
      auto policy = FilterPolicy::for_style(style);
      policy.sd_cutoff = filter_sd;
      if (keep_next_punct) policy.exclude_next_punct_num = false;
      const auto r = apply_filters_with_report(load_corpus(filter_in), policy);
      write_corpus(r.corpus, filter_out);
      std::fprintf(stderr, "input %zu, zero_gd %zu, outlier %zu, punct_num %zu, next_punct_num %zu, line_boundary %zu, kept %zu\n",
                   r.counts.input, r.counts.zero_gd, r.counts.outlier, r.counts.punct_num, r.counts.next_punct_num,
                   r.counts.line_boundary, r.counts.kept);
    } else if (*bpe_train) {
      train_bpe(read_lines(bpe_input), vocab_size, coverage).save(bpe_prefix);
    } else if (*bpe_encode) {
      const auto model = BpeModel::load(enc_model);
      std::string out;
      for (const auto& line : read_lines(enc_in)) {
        const auto pieces = model.encode(line);
        for (std::size_t i = 0; i < pieces.size(); ++i) {
          if (i) out += ' ';
          out += pieces[i];
        }
        out += '\n';
      }
      emit(enc_out, out);
    } else if (*ngram_train) {
      std::vector<std::vector<std::string>> sentences;
      for (const auto& line : read_lines(ng_in)) {
        auto toks = text::split_whitespace(line);
        if (!toks.empty()) sentences.push_back(std::move(toks));
      }
      train_kn(sentences, order).save_arpa(ng_out);
    } else if (*score) {
      require(sc_arpa);
      const auto lm = NGramModel::load_arpa(sc_arpa);
      const auto t = score_lines(read_lines(sc_in), lm, sc_id.empty() ? fs::path(sc_arpa).stem().string() : sc_id);
      emit(sc_out, format_surprisal_table(t));
      std::fprintf(stderr, "ppl %s\n", tsv::format_double(perplexity(t.values())).c_str());
    } else if (*fit) {
      const auto data = fit_in.load();
      const auto table = load_table(fit_surprisal);
      PowerOptions opts;
      opts.spillover = fit_spillover >= 0 ? SpilloverPolicy{fit_spillover} : SpilloverPolicy::for_style(fit_in.style());
      opts.transform = log_gd ? ResponseTransform::log : ResponseTransform::identity;
      opts.standardize = standardize;
      emit(fit_out, fit_report_json(psychometric_power(data, table, fit_in.unigram(table), opts)));
    } else if (*report) {
      const auto data = rep_in.load();
      const fs::path manifest = fs::is_directory(rep_suite) ? fs::path(rep_suite) / "lms.json" : fs::path(rep_suite);
      require(manifest.string());
      std::vector<LMRecord> records;
      std::vector<SurprisalTable> tables;
      for (auto& e : read_suite_manifest(manifest)) {
        auto t = load_table(e.surprisal.string());
        t.lm_id = e.record.lm_id;
        e.record.ppl = t.ppl();
        records.push_back(e.record);
        tables.push_back(std::move(t));
      }
      if (tables.empty()) throw Error(manifest.string() + ": no LMs listed");
      EvaluationOptions opts;
      opts.power.spillover =
          rep_spillover >= 0 ? SpilloverPolicy{rep_spillover} : SpilloverPolicy::for_style(rep_in.style());
      opts.power.transform = rep_log_gd ? ResponseTransform::log : ResponseTransform::identity;
      opts.split_ppl = split_ppl;
      opts.threads = threads;
      const auto counts = rep_in.unigram(tables.front());
      const auto features = compute_suite_features(data, tables, counts, opts.power.spillover, threads);
      const auto ev = evaluate_suite(data, records, features, opts);
      emit(rep_out, suite_report_json(ev));
      if (!rep_plots.empty()) {
        fs::create_directories(rep_plots);
        if (ev.suite) tsv::write_atomic(fs::path(rep_plots) / "ppl_vs_power.svg", ppl_scatter_svg(*ev.suite));
        tsv::write_atomic(fs::path(rep_plots) / "position_curve.svg", position_curve_svg(ev.uid));
      }
    } else if (*uid) {
      const auto data = uid_in.load();
      const auto u = uid_stats(data.filtered);
      emit(uid_out, uid_report_json(u));
      if (!uid_plot.empty()) emit(uid_plot, position_curve_svg(u));
    } else if (*probe) {
      const auto data = probe_in.load();
      const auto table = load_table(probe_surprisal);
      const auto features =
          compute_text_features(data.index, table, probe_in.unigram(table), SpilloverPolicy::for_style(probe_in.style()));
      if (factors.empty() && !dominance) throw Error("probe: give --factor or --dominance");
      nlohmann::json j = nlohmann::json::object();
      auto delta = [](const DeltaLogLik& d) {
        return nlohmann::json{{"value", d.value}, {"lrt_stat", d.lrt_stat}, {"df", d.df}, {"p_value", d.p_value},
                              {"n", d.n}};
      };
      for (const auto& f : factors) j["probe"][f] = delta(probe_effect(data, features, parse_probe_factor(f)));
      if (dominance) {
        j["factor_dominance"] = nlohmann::json::array();
        for (const auto& e : factor_dominance(data, features)) {
          j["factor_dominance"].push_back({{"factor", to_string(e.factor)}, {"effect", delta(e.effect)}});
        }
      }
      emit(probe_out, j.dump(2) + "\n");
    } else if (*synth) {
      const auto spec = synth_spec_from_json(read_text(synth_spec));
      const auto data = generate(spec);
      write_synth(data, synth_out);
      if (synth_lms > 0) {
        write_suite(make_suite(synth_lms, parse_suite_shape(synth_shape), spec.seed), data.surprisal, spec.seed,
                    synth_out);
      }
    } else if (*run) {
      auto config = load_run_config(run_config);
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_seed) config.seed = *run_seed;
      if (run_threads) config.threads = *run_threads;
      run_pipeline(config);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gazefit: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
