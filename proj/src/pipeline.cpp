#include "gazefit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "gazefit/text.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Workers

unsigned worker_count(unsigned requested) {
  unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GAZEFIT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Inputs

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<SuiteEntry> read_suite_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (!j.contains("lms") || !j["lms"].is_array()) throw SchemaError(path.string() + ": missing 'lms' array");
  std::vector<SuiteEntry> out;
  std::set<std::string> ids;
  try {
    for (const auto& e : j["lms"]) {
      SuiteEntry s;
      s.record.lm_id = e.at("lm_id").get<std::string>();
      if (!ids.insert(s.record.lm_id).second) throw SchemaError(path.string() + ": duplicate lm_id " + s.record.lm_id);
      s.record.architecture = parse_architecture(e.value("architecture", "trans_lg"));
      s.record.data_size = parse_data_size(e.value("data_size", "lg"));
      s.record.updates = e.value("updates", 0LL);
      s.record.seed = e.value("seed", 0LL);
      s.surprisal = path.parent_path() / e.at("surprisal").get<std::string>();
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::string> sentence_texts(const TextIndex& index) {
  std::vector<std::string> out;
  out.reserve(index.sentences.size());
  for (const auto& s : index.sentences) {
    std::string line;
    for (std::size_t k = s.begin; k < s.end; ++k) {
      if (k > s.begin) line += ' ';
      line += index.segments[k].text;
    }
    out.push_back(std::move(line));
  }
  return out;
}

SurprisalTable score_text(const TextIndex& index, const BpeModel& bpe, const NGramModel& lm,
                          const std::string& lm_id) {
  SurprisalTable t;
  t.lm_id = lm_id;
  const auto texts = sentence_texts(index);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto subwords = bpe.encode(texts[i]);
    const auto nats = lm.sentence_surprisals(subwords);
    for (std::size_t j = 0; j < subwords.size(); ++j) {
      t.rows.push_back(SurprisalRow{index.sentences[i].article_id, index.sentences[i].sent_n, int(j), subwords[j],
                                    nats[j]});
    }
  }
  return t;
}

SurprisalTable score_lines(const std::vector<std::string>& lines, const NGramModel& lm, const std::string& lm_id) {
  SurprisalTable t;
  t.lm_id = lm_id;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (text::trim(lines[l]).empty()) continue;
    const auto fields = text::split(lines[l], '\t');
    if (fields.size() != 3) throw ParseError("score input: expected article, sent and subwords", l + 1);
    int sent = 0;
    try {
      sent = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw ParseError("score input: sentence number is not an integer", l + 1);
    }
    const auto subwords = text::split_whitespace(fields[2]);
    const auto nats = lm.sentence_surprisals(subwords);
    for (std::size_t j = 0; j < subwords.size(); ++j) {
      t.rows.push_back(SurprisalRow{std::string(text::trim(fields[0])), sent, int(j), subwords[j], nats[j]});
    }
  }
  return t;
}

UnigramCounts count_subwords(const std::vector<std::string>& lines, const BpeModel& bpe) {
  UnigramCounts c;
  for (const auto& l : lines)
    for (const auto& p : bpe.encode(l)) c.add(p);
  return c;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<TextFeatures> compute_suite_features(const GazeData& data, const std::vector<SurprisalTable>& tables,
                                                 const UnigramCounts& counts, SpilloverPolicy spillover,
                                                 unsigned threads) {
  std::vector<TextFeatures> out(tables.size());
  parallel_for(tables.size(), worker_count(threads),
               [&](std::size_t i) { out[i] = compute_text_features(data.index, tables[i], counts, spillover); });
  return out;
}

SuiteEvaluation evaluate_suite(const GazeData& data, std::vector<LMRecord> records,
                               const std::vector<TextFeatures>& features, const EvaluationOptions& options) {
  if (records.size() != features.size()) throw DomainError("evaluate_suite: one feature set per LM is required");
  if (records.empty()) throw DomainError("evaluate_suite: no LMs to evaluate");
  SuiteEvaluation ev;
  ev.options = options;
  ev.style = data.style;
  ev.filter_counts = data.filter_counts;
  ev.stats = corpus_stats(data.filtered);
  ev.lms.resize(records.size());
  parallel_for(records.size(), worker_count(options.threads), [&](std::size_t i) {
    auto& r = ev.lms[i];
    r.record = records[i];
    r.power = psychometric_power(data, features[i], r.record.ppl, options.power);
    r.record.delta_loglik = r.power.delta.value;
    r.record.p_value = r.power.delta.p_value;
    r.record.lrt_stat = r.power.delta.lrt_stat;
    r.record.df = r.power.delta.df;
    r.record.n = r.power.delta.n;
    for (auto f : {ProbeFactor::syn_category, ProbeFactor::sem_category, ProbeFactor::n_dependents}) {
      try {
        r.probes.emplace_back(f, probe_effect(data, features[i], f));
      } catch (const DomainError&) {
        // Annotation missing or too sparse; probing is skipped for this factor.
      }
    }
  });

  std::vector<LMRecord> recs;
  for (const auto& r : ev.lms) recs.push_back(r.record);
  if (recs.size() >= 3) {
    try {
      ev.suite = suite_report(recs, options.split_ppl);
    } catch (const DomainError& e) {
      ev.suite_note = e.what();
    }
  } else {
    ev.suite_note = "fewer than three LMs";
  }
  try {
    ev.factors = factor_regression(recs);
  } catch (const Error& e) {
    ev.factor_note = e.what();
  }
  ev.uid = uid_stats(data.filtered);
  try {
    ev.dominance = factor_dominance(data, features.front());
  } catch (const Error& e) {
    ev.dominance_note = e.what();
  }
  return ev;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fitted_json(const FittedLMM& f) {
  json j;
  j["beta"] = json::object();
  for (std::size_t c = 0; c < f.columns.size(); ++c) j["beta"][f.columns[c]] = number(f.beta(Eigen::Index(c)));
  j["variance_components"] = json::object();
  for (const auto& v : f.variance_components) j["variance_components"][v.name] = number(v.variance);
  j["sigma2"] = number(f.sigma2);
  j["loglik"] = number(f.loglik);
  j["n"] = f.n;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  return j;
}

json delta_json(const DeltaLogLik& d) {
  return json{{"value", number(d.value)}, {"lrt_stat", number(d.lrt_stat)}, {"df", d.df},
              {"p_value", number(d.p_value)}, {"n", d.n}};
}

json flags_json() {
  // The frequency covariate enters on the log scale.
  return json{{"freq_scale", "log"}, {"freq_smoothing", "add_one"}};
}

json record_json(const LMRecord& r) {
  return json{{"lm_id", r.lm_id},
              {"architecture", to_string(r.architecture)},
              {"data_size", to_string(r.data_size)},
              {"updates", r.updates},
              {"seed", r.seed},
              {"ppl", number(r.ppl)},
              {"delta_loglik", number(r.delta_loglik)},
              {"p_value", number(r.p_value)},
              {"lrt_stat", number(r.lrt_stat)},
              {"df", r.df},
              {"n", r.n}};
}

json uid_json(const UidReport& u) {
  json curve = json::array();
  for (const auto& c : u.position_curve) {
    curve.push_back(json{{"position", c.position}, {"value", number(c.value)}, {"half_width", number(c.half_width)},
                         {"count", c.count}});
  }
  return json{{"cv", number(u.cv)},
              {"mean", number(u.mean)},
              {"sd", number(u.sd)},
              {"n", u.n},
              {"position_curve", curve},
              {"curve_method", u.curve_method},
              {"smoothing_lambda", number(u.smoothing_lambda)},
              {"effective_df", number(u.effective_df)},
              {"position_slope", number(u.position_slope)},
              {"position_slope_p", number(u.position_slope_p)}};
}

}  // namespace

std::string fit_report_json(const PowerResult& r) {
  json j = fitted_json(r.full);
  j["delta_loglik"] = number(r.delta.value);
  j["lrt_stat"] = number(r.delta.lrt_stat);
  j["df"] = r.delta.df;
  j["p_value"] = number(r.delta.p_value);
  j["ppl"] = number(r.ppl);
  j["baseline"] = fitted_json(r.base);
  j["flags"] = flags_json();
  return j.dump(2) + "\n";
}

std::string uid_report_json(const UidReport& u) { return uid_json(u).dump(2) + "\n"; }

std::string suite_report_json(const SuiteEvaluation& e) {
  json j;
  j["records"] = json::array();
  for (const auto& r : e.lms) {
    json rec = record_json(r.record);
    rec["probes"] = json::object();
    for (const auto& [f, d] : r.probes) rec["probes"][std::string(to_string(f))] = delta_json(d);
    rec["full_converged"] = r.power.full.converged;
    rec["base_converged"] = r.power.base.converged;
    j["records"].push_back(rec);
  }
  if (e.suite) {
    j["correlations"] = json{{"rho", number(e.suite->rho)},
                             {"split_ppl", e.suite->split_ppl},
                             {"rho_above", e.suite->rho_above ? number(*e.suite->rho_above) : json(nullptr)},
                             {"rho_below", e.suite->rho_below ? number(*e.suite->rho_below) : json(nullptr)},
                             {"n_above", e.suite->n_above},
                             {"n_below", e.suite->n_below}};
  } else {
    j["correlations"] = json{{"skipped", e.suite_note}};
  }
  if (e.factors) {
    json coef = json::object();
    const auto& f = e.factors->fit;
    for (std::size_t c = 0; c < f.columns.size(); ++c) {
      const auto k = Eigen::Index(c);
      coef[f.columns[c]] = json{{"estimate", number(f.beta(k))}, {"std_error", number(f.std_error(k))},
                                {"t", number(f.t_value(k))}, {"p_value", number(f.p_value(k))}};
    }
    json tests = json::object();
    for (const auto& t : e.factors->factors) {
      tests[t.factor] = json{{"df", t.df}, {"f", number(t.f_stat)}, {"p_value", number(t.p_value)}};
    }
    j["factor_regression"] =
        json{{"coefficients", coef}, {"factors", tests}, {"n", e.factors->n}, {"excluded", e.factors->excluded}};
  } else {
    j["factor_regression"] = json{{"skipped", e.factor_note}};
  }
  j["uid"] = uid_json(e.uid);
  if (!e.dominance.empty()) {
    json d = json::array();
    for (const auto& entry : e.dominance) {
      d.push_back(json{{"factor", to_string(entry.factor)}, {"effect", delta_json(entry.effect)}});
    }
    j["factor_dominance"] = d;
  } else {
    j["factor_dominance"] = json{{"skipped", e.dominance_note}};
  }
  j["corpus"] = json{{"articles", e.stats.articles},
                     {"sentences", e.stats.sentences},
                     {"segments", e.stats.segments},
                     {"data_points", e.stats.data_points},
                     {"subjects", e.stats.subjects},
                     {"subjects_per_article", number(e.stats.subjects_per_article)},
                     {"mean_gd", number(e.stats.mean_gd)}};
  const auto& fc = e.filter_counts;
  j["filter"] = json{{"input", fc.input},         {"zero_gd", fc.zero_gd},
                     {"outlier", fc.outlier},     {"punct_num", fc.punct_num},
                     {"next_punct_num", fc.next_punct_num}, {"line_boundary", fc.line_boundary},
                     {"kept", fc.kept}};
  j["settings"] = json{{"language_style", to_string(e.style)},
                       {"spillover", e.options.power.spillover.prev_count},
                       {"response", e.options.power.transform == ResponseTransform::log ? "log_gd" : "gd"},
                       {"standardized", e.options.power.standardize}};
  j["flags"] = flags_json();
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string fx(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 30, kBottom = 55;

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fx(kWidth, 0) + "\" height=\"" + fx(kHeight, 0) +
         "\" viewBox=\"0 0 " + fx(kWidth, 0) + " " + fx(kHeight, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + fx(kWidth / 2, 0) +
         "\" y=\"18\" text-anchor=\"middle\">" + title + "</text>\n";
}

struct Axis {
  double lo, hi;
  double to_x(double v) const { return kLeft + (v - lo) / (hi - lo) * (kWidth - kLeft - kRight); }
  double to_y(double v) const { return kHeight - kBottom - (v - lo) / (hi - lo) * (kHeight - kTop - kBottom); }
};

Axis padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return Axis{lo - pad, hi + pad};
}

std::string frame(const Axis& xa, const Axis& ya, const std::string& xlabel, const std::string& ylabel,
                  const std::vector<std::pair<double, std::string>>& xticks) {
  std::string s;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s += "<path d=\"M" + fx(x0) + "," + fx(y1) + " V" + fx(y0) + " H" + fx(x1) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& [v, label] : xticks) {
    const double x = xa.to_x(v);
    s += "<line x1=\"" + fx(x) + "\" y1=\"" + fx(y0) + "\" x2=\"" + fx(x) + "\" y2=\"" + fx(y0 + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fx(x) + "\" y=\"" + fx(y0 + 18) + "\" text-anchor=\"middle\">" + label + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = ya.lo + (ya.hi - ya.lo) * i / 4.0;
    const double y = ya.to_y(v);
    s += "<line x1=\"" + fx(x0 - 5) + "\" y1=\"" + fx(y) + "\" x2=\"" + fx(x0) + "\" y2=\"" + fx(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fx(x0 - 8) + "\" y=\"" + fx(y + 4) + "\" text-anchor=\"end\">" +
         fx(v, std::abs(ya.hi - ya.lo) < 0.1 ? 4 : 2) + "</text>\n";
  }
  s += "<text x=\"" + fx((x0 + x1) / 2) + "\" y=\"" + fx(kHeight - 12) + "\" text-anchor=\"middle\">" + xlabel +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + fx((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fx((y0 + y1) / 2) + ")\">" + ylabel + "</text>\n";
  return s;
}

}  // namespace

std::string ppl_scatter_svg(const SuiteReport& r) {
  std::vector<const LMRecord*> shown;
  for (const auto& rec : r.records)
    if (rec.ppl > 0 && rec.ppl <= 1e6 && std::isfinite(rec.delta_loglik)) shown.push_back(&rec);
  std::string s = svg_open("Perplexity vs. psychometric predictive power");
  if (shown.empty()) return s + "</svg>\n";
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto* rec : shown) {
    xlo = std::min(xlo, std::log10(rec->ppl));
    xhi = std::max(xhi, std::log10(rec->ppl));
    ylo = std::min(ylo, rec->delta_loglik);
    yhi = std::max(yhi, rec->delta_loglik);
  }
  const Axis xa = padded(xlo, xhi), ya = padded(ylo, yhi);
  std::vector<std::pair<double, std::string>> ticks;
  for (int e = int(std::ceil(xa.lo)); e <= int(std::floor(xa.hi)); ++e) ticks.emplace_back(e, "1e" + std::to_string(e));
  s += frame(xa, ya, "PPL (log scale)", "delta LogLik (nats/point)", ticks);
  const double split = std::log10(r.split_ppl);
  if (split > xa.lo && split < xa.hi) {
    s += "<line x1=\"" + fx(xa.to_x(split)) + "\" y1=\"" + fx(kTop) + "\" x2=\"" + fx(xa.to_x(split)) + "\" y2=\"" +
         fx(kHeight - kBottom) + "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
  }
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  for (const auto* rec : shown) {
    s += "<circle cx=\"" + fx(xa.to_x(std::log10(rec->ppl))) + "\" cy=\"" + fx(ya.to_y(rec->delta_loglik)) +
         "\" r=\"4\" fill=\"" + kColors[int(rec->architecture)] + "\"><title>" + rec->lm_id + "</title></circle>\n";
  }
  return s + "</svg>\n";
}

std::string position_curve_svg(const UidReport& u) {
  std::string s = svg_open("Gaze duration by position in sentence");
  if (u.position_curve.empty()) return s + "</svg>\n";
  double ylo = 1e300, yhi = -1e300;
  for (const auto& c : u.position_curve) {
    ylo = std::min(ylo, c.value - c.half_width);
    yhi = std::max(yhi, c.value + c.half_width);
  }
  const Axis xa = padded(u.position_curve.front().position, u.position_curve.back().position);
  const Axis ya = padded(ylo, yhi);
  std::vector<std::pair<double, std::string>> ticks;
  const std::size_t step = std::max<std::size_t>(1, u.position_curve.size() / 10);
  for (std::size_t i = 0; i < u.position_curve.size(); i += step) {
    ticks.emplace_back(u.position_curve[i].position, fx(u.position_curve[i].position, 0));
  }
  s += frame(xa, ya, "tokenN (position in sentence)", "gaze duration", ticks);
  std::string band = "<path d=\"";
  for (std::size_t i = 0; i < u.position_curve.size(); ++i) {
    const auto& c = u.position_curve[i];
    band += (i == 0 ? "M" : " L") + fx(xa.to_x(c.position)) + "," + fx(ya.to_y(c.value + c.half_width));
  }
  for (std::size_t i = u.position_curve.size(); i-- > 0;) {
    const auto& c = u.position_curve[i];
    band += " L" + fx(xa.to_x(c.position)) + "," + fx(ya.to_y(c.value - c.half_width));
  }
  s += band + " Z\" fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
  std::string line = "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < u.position_curve.size(); ++i) {
    const auto& c = u.position_curve[i];
    line += (i == 0 ? "" : " ") + fx(xa.to_x(c.position)) + "," + fx(ya.to_y(c.value));
  }
  s += line + "\"/>\n";
  return s + "</svg>\n";
}

// ---------------------------------------------------------------------------
// Run configuration

RunConfig parse_run_config(const std::string& text, const fs::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  static const std::set<std::string> known{"language_style", "corpus", "counts", "suite", "ngram", "synth",
                                           "filter", "regression", "split_ppl", "output_dir", "seed", "threads"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw SchemaError("config: unknown field '" + k + "'");
  RunConfig c;
  auto path = [&](const json& v) { return base / v.get<std::string>(); };
  try {
    if (j.contains("language_style")) c.style = parse_language_style(j["language_style"].get<std::string>());
    c.filter = FilterPolicy::for_style(c.style);
    if (j.contains("corpus")) c.corpus = path(j["corpus"]);
    if (j.contains("counts")) c.counts = path(j["counts"]);
    if (j.contains("suite")) c.suite = path(j["suite"]);
    if (j.contains("ngram")) {
      for (const auto& a : j["ngram"]) {
        RunConfig::NGramArm arm;
        arm.lm_id = a.value("lm_id", std::string("ngram") + std::to_string(c.ngram.size() + 1));
        arm.train_text = path(a.at("train_text"));
        arm.order = a.value("order", 5);
        arm.vocab_size = a.value("vocab_size", std::size_t(1000));
        arm.coverage = a.value("coverage", 0.9995);
        c.ngram.push_back(arm);
      }
    }
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      c.synth = synth_spec_from_json(s.value("spec", json::object()).dump());
      c.synth_lms = s.value("n_lms", std::size_t(0));
      c.synth_shape = parse_suite_shape(s.value("shape", std::string("monotone")));
    }
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      c.filter.sd_cutoff = f.value("sd_cutoff", c.filter.sd_cutoff);
      c.filter.exclude_zero_gd = f.value("exclude_zero_gd", c.filter.exclude_zero_gd);
      c.filter.exclude_punct_num = f.value("exclude_punct_num", c.filter.exclude_punct_num);
      c.filter.exclude_next_punct_num = f.value("exclude_next_punct_num", c.filter.exclude_next_punct_num);
      c.filter.exclude_line_boundary = f.value("exclude_line_boundary", c.filter.exclude_line_boundary);
      c.apply_filter = f.value("apply", true);
    }
    if (j.contains("regression")) {
      const auto& r = j["regression"];
      c.spillover = r.value("spillover", -1);
      c.log_gd = r.value("log_gd", false);
      c.standardize = r.value("standardize", false);
    }
    c.split_ppl = j.value("split_ppl", 400.0);
    if (j.contains("output_dir")) c.output_dir = path(j["output_dir"]);
    c.seed = j.value("seed", std::uint64_t(1));
    c.threads = j.value("threads", 0u);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  if (c.spillover != -1 && c.spillover != 0 && c.spillover != 2) throw SchemaError("config: spillover must be 0 or 2");
  if (!c.synth && !c.corpus) throw SchemaError("config: needs 'corpus' or 'synth'");
  if (!c.synth && !c.suite && c.ngram.empty()) throw SchemaError("config: needs 'suite' or 'ngram' LMs");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path.string());
  return parse_run_config(read_file(path), path.parent_path());
}

namespace {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw Error("input not found: " + p.string());
}

}  // namespace

void run_pipeline(const RunConfig& config) {
  const fs::path out = config.output_dir;
  const fs::path tmp = out.string() + ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    fs::path corpus_path, manifest_path;
    std::optional<fs::path> counts_path = config.counts;
    if (config.synth) {
      stage("synth", [&] {
        SynthSpec spec = *config.synth;
        spec.seed = config.seed;
        spec.style = config.style;
        const auto data = generate(spec);
        write_synth(data, tmp / "inputs");
        corpus_path = tmp / "inputs" / "corpus.tsv";
        if (!counts_path) counts_path = tmp / "inputs" / "counts.tsv";
        if (config.synth_lms > 0) {
          const auto suite = make_suite(config.synth_lms, config.synth_shape, config.seed);
          write_suite(suite, data.surprisal, config.seed, tmp / "inputs");
          manifest_path = tmp / "inputs" / "lms.json";
        }
        return 0;
      });
    }
    if (config.corpus) corpus_path = *config.corpus;
    if (config.suite) manifest_path = *config.suite;

    const Corpus raw = stage("load", [&] {
      require_file(corpus_path);
      return load_corpus(corpus_path);
    });
    const GazeData data = stage("filter", [&] {
      return prepare_gaze_data(raw, config.filter, config.style, config.apply_filter);
    });

    std::vector<LMRecord> records;
    std::vector<SurprisalTable> tables;
    std::optional<UnigramCounts> counts;
    stage("score", [&] {
      if (!config.ngram.empty()) fs::create_directories(tmp / "lms");
      for (const auto& arm : config.ngram) {
        require_file(arm.train_text);
        const auto lines = read_lines(arm.train_text);
        const auto bpe = train_bpe(lines, arm.vocab_size, arm.coverage);
        std::vector<std::vector<std::string>> sentences;
        for (const auto& l : lines)
          if (!text::trim(l).empty()) sentences.push_back(bpe.encode(l));
        const auto lm = train_kn(sentences, arm.order);
        auto table = score_text(data.index, bpe, lm, arm.lm_id);
        write_surprisal_table(table, tmp / "lms" / (arm.lm_id + ".tsv"));
        if (!counts && !counts_path) counts = count_subwords(lines, bpe);
        LMRecord r;
        r.lm_id = arm.lm_id;
        r.architecture = Architecture::ngram;
        r.data_size = DataSize::lg;
        records.push_back(r);
        tables.push_back(std::move(table));
      }
      return 0;
    });
    stage("ingest", [&] {
      if (!manifest_path.empty()) {
        require_file(manifest_path);
        for (auto& e : read_suite_manifest(manifest_path)) {
          require_file(e.surprisal);
          auto t = read_surprisal_table(e.surprisal, e.record.lm_id);
          const auto problems = validate_surprisal_table(t);
          if (!problems.empty()) throw SchemaError(e.surprisal.string() + ": " + problems.front());
          records.push_back(e.record);
          tables.push_back(std::move(t));
        }
      }
      if (tables.empty()) throw Error("no LM surprisal tables");
      if (counts_path) {
        require_file(*counts_path);
        counts = read_unigram_counts(*counts_path);
      } else if (!counts) {
        warn("no unigram count file; frequencies are estimated from the first surprisal table");
        counts = counts_from_table(tables.front());
      }
      for (std::size_t i = 0; i < tables.size(); ++i) records[i].ppl = tables[i].ppl();
      return 0;
    });

    EvaluationOptions opts;
    opts.power.spillover = config.spillover >= 0 ? SpilloverPolicy{config.spillover} : SpilloverPolicy::for_style(config.style);
    opts.power.transform = config.log_gd ? ResponseTransform::log : ResponseTransform::identity;
    opts.split_ppl = config.split_ppl;
    opts.threads = config.threads;
    opts.power.standardize = config.standardize;

    const auto features = stage("align", [&] {
      return compute_suite_features(data, tables, *counts, opts.power.spillover, config.threads);
    });
    const auto ev = stage("fit", [&] { return evaluate_suite(data, records, features, opts); });

    stage("report", [&] {
      fs::create_directories(tmp / "fits");
      fs::create_directories(tmp / "plots");
      for (const auto& r : ev.lms) tsv::write_atomic(tmp / "fits" / (r.record.lm_id + ".json"), fit_report_json(r.power));
      tsv::write_atomic(tmp / "report.json", suite_report_json(ev));
      tsv::write_atomic(tmp / "uid.json", uid_report_json(ev.uid));
      if (ev.suite) tsv::write_atomic(tmp / "plots" / "ppl_vs_power.svg", ppl_scatter_svg(*ev.suite));
      tsv::write_atomic(tmp / "plots" / "position_curve.svg", position_curve_svg(ev.uid));
      return 0;
    });
    fs::remove_all(out, ec);
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    fs::rename(tmp, out);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

}  // namespace gazefit
