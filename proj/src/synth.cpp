#include "gazefit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"
#include "gazefit/tokenize.hpp"
#include "gazefit/tsv.hpp"

namespace gazefit {

using nlohmann::json;

void SynthSpec::validate() const {
  if (n_articles < 1 || n_subjects < 1 || n_sentences < 1 || segments_per_sentence < 1) {
    throw DomainError("synth spec: counts must be at least 1");
  }
  if (segments_per_line < 1 || lines_per_screen < 1) throw DomainError("synth spec: layout counts must be at least 1");
  if (sd_article < 0 || sd_subject < 0 || sd_resid < 0) throw DomainError("synth spec: standard deviations must be >= 0");
  if (!(subword_surprisal_mean > 0) || !(subword_surprisal_shape > 0)) {
    throw DomainError("synth spec: subword surprisal distribution must have positive mean and shape");
  }
  if (target_cv && !(*target_cv > 0)) throw DomainError("synth spec: target_cv must be positive");
  if (n_points_target && *n_points_target < 1) throw DomainError("synth spec: n_points_target must be at least 1");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string_view to_string(ResidualKind r) { return r == ResidualKind::gaussian ? "gaussian" : "lognormal"; }

ResidualKind parse_residual(std::string_view s) {
  if (s == "gaussian") return ResidualKind::gaussian;
  if (s == "lognormal") return ResidualKind::lognormal;
  throw SchemaError("synth spec: unknown residual kind '" + std::string(s) + "'");
}

template <class Cat, class Parse>
std::map<Cat, double> category_map(const json& j, Parse parse, const char* what) {
  std::map<Cat, double> out;
  for (const auto& [k, v] : j.items()) {
    const auto c = parse(k);
    if (!c) throw SchemaError(std::string("synth spec: unknown ") + what + " '" + k + "'");
    out[*c] = v.template get<double>();
  }
  return out;
}

template <class Cat>
json category_json(const std::map<Cat, double>& m) {
  json j = json::object();
  for (const auto& [c, v] : m) j[std::string(gazefit::to_string(c))] = v;
  return j;
}

json spec_json(const SynthSpec& s) {
  json j;
  j["n_articles"] = s.n_articles;
  j["n_subjects"] = s.n_subjects;
  j["n_sentences"] = s.n_sentences;
  j["segments_per_sentence"] = s.segments_per_sentence;
  j["segments_per_line"] = s.segments_per_line;
  j["lines_per_screen"] = s.lines_per_screen;
  j["beta"] = {{"intercept", s.beta.intercept},
               {"surprisal", s.beta.surprisal},
               {"surprisal_prev_1", s.beta.surprisal_prev_1},
               {"surprisal_prev_2", s.beta.surprisal_prev_2},
               {"freq", s.beta.freq},
               {"length", s.beta.length}};
  j["sd_article"] = s.sd_article;
  j["sd_subject"] = s.sd_subject;
  j["sd_resid"] = s.sd_resid;
  j["position_slope"] = s.position_slope;
  j["category_offsets"] = category_json(s.category_offsets);
  j["sem_category_offsets"] = category_json(s.sem_category_offsets);
  j["dependents_slope"] = s.dependents_slope;
  j["surprisal_category_offsets"] = category_json(s.surprisal_category_offsets);
  j["subword_surprisal_mean"] = s.subword_surprisal_mean;
  j["subword_surprisal_shape"] = s.subword_surprisal_shape;
  j["residual"] = to_string(s.residual);
  j["language_style"] = gazefit::to_string(s.style);
  j["n_points_target"] = s.n_points_target ? json(*s.n_points_target) : json(nullptr);
  j["target_cv"] = s.target_cv ? json(*s.target_cv) : json(nullptr);
  j["seed"] = s.seed;
  return j;
}

SynthSpec spec_from(const json& j) {
  if (!j.is_object()) throw SchemaError("synth spec: expected a JSON object");
  static const std::set<std::string> known{
      "n_articles", "n_subjects", "n_sentences", "segments_per_sentence", "segments_per_line", "lines_per_screen",
      "beta", "sd_article", "sd_subject", "sd_resid", "position_slope", "category_offsets",
      "sem_category_offsets", "dependents_slope", "surprisal_category_offsets", "subword_surprisal_mean",
      "subword_surprisal_shape", "residual", "language_style", "n_points_target", "target_cv", "seed"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw SchemaError("synth spec: unknown field '" + k + "'");
  }
  SynthSpec s;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key) && !j[key].is_null()) dst = j[key].get<std::decay_t<decltype(dst)>>();
  };
  try {
    get("n_articles", s.n_articles);
    get("n_subjects", s.n_subjects);
    get("n_sentences", s.n_sentences);
    get("segments_per_sentence", s.segments_per_sentence);
    get("segments_per_line", s.segments_per_line);
    get("lines_per_screen", s.lines_per_screen);
    if (j.contains("beta")) {
      const auto& b = j["beta"];
      for (const auto& [k, v] : b.items()) {
        const double x = v.get<double>();
        if (k == "intercept") s.beta.intercept = x;
        else if (k == "surprisal") s.beta.surprisal = x;
        else if (k == "surprisal_prev_1") s.beta.surprisal_prev_1 = x;
        else if (k == "surprisal_prev_2") s.beta.surprisal_prev_2 = x;
        else if (k == "freq") s.beta.freq = x;
        else if (k == "length") s.beta.length = x;
        else throw SchemaError("synth spec: unknown beta term '" + k + "'");
      }
    }
    get("sd_article", s.sd_article);
    get("sd_subject", s.sd_subject);
    get("sd_resid", s.sd_resid);
    get("position_slope", s.position_slope);
    if (j.contains("category_offsets"))
      s.category_offsets = category_map<SynCategory>(j["category_offsets"], parse_syn_category, "syn_category");
    if (j.contains("sem_category_offsets"))
      s.sem_category_offsets =
          category_map<SemCategory>(j["sem_category_offsets"], parse_sem_category, "sem_category");
    get("dependents_slope", s.dependents_slope);
    if (j.contains("surprisal_category_offsets"))
      s.surprisal_category_offsets =
          category_map<SynCategory>(j["surprisal_category_offsets"], parse_syn_category, "syn_category");
    get("subword_surprisal_mean", s.subword_surprisal_mean);
    get("subword_surprisal_shape", s.subword_surprisal_shape);
    if (j.contains("residual")) s.residual = parse_residual(j["residual"].get<std::string>());
    if (j.contains("language_style")) s.style = parse_language_style(j["language_style"].get<std::string>());
    if (j.contains("n_points_target") && !j["n_points_target"].is_null())
      s.n_points_target = j["n_points_target"].get<std::size_t>();
    if (j.contains("target_cv") && !j["target_cv"].is_null()) s.target_cv = j["target_cv"].get<double>();
    get("seed", s.seed);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace

SynthSpec synth_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("synth spec: ") + e.what());
  }
  return spec_from(j);
}

std::string synth_spec_to_json(const SynthSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

std::string ground_truth_json(const GroundTruth& t) {
  json j;
  j["spec"] = spec_json(t.spec);
  j["expected_cv"] = t.expected_cv;
  j["realized_sd_article"] = t.realized_sd_article;
  j["realized_sd_subject"] = t.realized_sd_subject;
  j["n_points"] = t.n_points;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Generation

namespace {

// Syllable inventory with Zipf-like training counts.
struct Inventory {
  std::vector<std::string> syllables;
  std::vector<double> weights;
  UnigramCounts counts;
};

Inventory make_inventory() {
  Inventory inv;
  const std::string consonants = "kstnhmyrwgzdbp";
  const std::string vowels = "aeiou";
  for (char v : vowels) inv.syllables.emplace_back(1, v);
  for (char c : consonants)
    for (char v : vowels) inv.syllables.push_back(std::string{c, v});
  for (std::size_t r = 0; r < inv.syllables.size(); ++r) {
    const double w = 1.0 / double(r + 1);
    inv.weights.push_back(w);
    const auto n = static_cast<long long>(std::llround(2.0e6 * w / 5.0));
    inv.counts.add(inv.syllables[r], std::max(1LL, n));
    inv.counts.add(std::string(kWordBoundary) + inv.syllables[r], std::max(1LL, n / 2));
  }
  return inv;
}

double population_sd(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size()));
}

std::optional<double> lookup(const auto& m, const auto& key) {
  auto it = m.find(key);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

}  // namespace

SynthData generate(const SynthSpec& spec_in) {
  spec_in.validate();
  SynthSpec spec = spec_in;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::gamma_distribution<double> gamma(spec.subword_surprisal_shape,
                                        spec.subword_surprisal_mean / spec.subword_surprisal_shape);
  const auto inv = make_inventory();
  std::discrete_distribution<std::size_t> pick(inv.weights.begin(), inv.weights.end());
  std::discrete_distribution<int> syn_pick({0.4, 0.25, 0.2, 0.15});
  std::uniform_int_distribution<int> sem_pick(0, 4);
  std::uniform_int_distribution<int> dep_pick(0, 3);
  std::discrete_distribution<int> len_pick({0.35, 0.45, 0.2});

  SynthData out;
  out.counts = inv.counts;
  out.surprisal.lm_id = "truth";

  // Text layout with one placeholder reader, used to derive the regression features.
  Corpus text;
  const std::size_t per_screen = spec.segments_per_line * spec.lines_per_screen;
  for (std::size_t a = 0; a < spec.n_articles; ++a) {
    char id[32];
    std::snprintf(id, sizeof id, "A%03zu", a + 1);
    std::size_t p = 0;
    const std::size_t total = spec.n_sentences * spec.segments_per_sentence;
    for (std::size_t sn = 1; sn <= spec.n_sentences; ++sn) {
      int idx = 0;
      for (std::size_t tn = 1; tn <= spec.segments_per_sentence; ++tn, ++p) {
        Segment s;
        s.article_id = id;
        s.subject_id = "_";
        const std::size_t line = p / spec.segments_per_line;
        s.screen_n = int(p / per_screen) + 1;
        s.line_n = int(line % spec.lines_per_screen) + 1;
        s.segment_n = int(p % per_screen) + 1;
        s.sent_n = int(sn);
        s.token_n = int(tn);
        s.is_line_first = p % spec.segments_per_line == 0;
        s.is_line_last = (p + 1) % spec.segments_per_line == 0 || p + 1 == total;
        s.syn_category = kAllSynCategories[std::size_t(syn_pick(rng))];
        s.sem_category = kAllSemCategories[std::size_t(sem_pick(rng))];
        s.n_dependents = dep_pick(rng);
        const int n_sub = len_pick(rng) + 1;
        const double offset = lookup(spec.surprisal_category_offsets, *s.syn_category).value_or(0.0);
        for (int k = 0; k < n_sub; ++k) {
          const auto& syl = inv.syllables[pick(rng)];
          s.text += syl;
          SurprisalRow row;
          row.article_id = id;
          row.sent = int(sn);
          row.idx = idx++;
          row.subword = (k == 0 ? std::string(kWordBoundary) : std::string()) + syl;
          row.surprisal = std::max(0.01, gamma(rng) + offset);
          out.surprisal.rows.push_back(std::move(row));
        }
        s.length = int(text::char_count(s.text));
        text.segments.push_back(std::move(s));
      }
    }
  }
  const auto index = build_text_index(text);
  const auto features = compute_text_features(index, out.surprisal, out.counts, SpilloverPolicy{2});

  std::vector<double> eta_fixed(index.segments.size());
  for (std::size_t k = 0; k < index.segments.size(); ++k) {
    const auto& s = index.segments[k];
    const auto& f = features.segments[k];
    const auto& b = spec.beta;
    double e = b.intercept + b.surprisal * f.surprisal + b.surprisal_prev_1 * f.surprisal_prev_1.value_or(0.0) +
               b.surprisal_prev_2 * f.surprisal_prev_2.value_or(0.0) + b.freq * f.freq + b.length * f.length +
               spec.position_slope * (s.token_n - 1) + spec.dependents_slope * s.n_dependents.value_or(0);
    if (s.syn_category) e += lookup(spec.category_offsets, *s.syn_category).value_or(0.0);
    if (s.sem_category) e += lookup(spec.sem_category_offsets, *s.sem_category).value_or(0.0);
    eta_fixed[k] = e;
  }

  std::vector<double> ua(spec.n_articles), us(spec.n_subjects);
  for (auto& v : ua) v = spec.sd_article * z(rng);
  for (auto& v : us) v = spec.sd_subject * z(rng);
  out.truth.realized_sd_article = population_sd(ua);
  out.truth.realized_sd_subject = population_sd(us);

  const std::size_t per_article = spec.n_sentences * spec.segments_per_sentence;
  // Moments of the realized linear predictor over every data point; the residual
  // scale is resolved against them.
  double mu = 0.0, m2 = 0.0;
  for (std::size_t a = 0; a < spec.n_articles; ++a)
    for (std::size_t subj = 0; subj < spec.n_subjects; ++subj)
      for (std::size_t k = a * per_article; k < (a + 1) * per_article; ++k) {
        const double eta = eta_fixed[k] + ua[a] + us[subj];
        mu += eta;
        m2 += eta * eta;
      }
  const double n_all = double(spec.n_articles * spec.n_subjects * per_article);
  mu /= n_all;
  m2 /= n_all;
  const double v_eta = std::max(0.0, m2 - mu * mu);
  if (spec.target_cv) {
    const double cv = *spec.target_cv;
    if (spec.residual == ResidualKind::gaussian) {
      const double r2 = cv * cv * mu * mu - v_eta;
      if (!(r2 >= 0)) throw DomainError("synth spec: target_cv is below the CV of the noiseless design");
      spec.sd_resid = std::sqrt(r2);
    } else {
      const double s2 = std::log((1.0 + cv * cv) * mu * mu / m2);
      if (!(s2 >= 0)) throw DomainError("synth spec: target_cv is below the CV of the noiseless design");
      spec.sd_resid = std::sqrt(s2);
    }
  }
  const double var_total = spec.residual == ResidualKind::gaussian
                               ? v_eta + spec.sd_resid * spec.sd_resid
                               : m2 * std::exp(spec.sd_resid * spec.sd_resid) - mu * mu;
  out.truth.expected_cv = mu != 0.0 ? std::sqrt(var_total) / std::abs(mu) : 0.0;

  auto& points = out.corpus.segments;
  points.reserve(text.size() * spec.n_subjects);
  for (std::size_t a = 0; a < spec.n_articles; ++a) {
    for (std::size_t subj = 0; subj < spec.n_subjects; ++subj) {
      char sid[32];
      std::snprintf(sid, sizeof sid, "S%03zu", subj + 1);
      for (std::size_t k = a * per_article; k < (a + 1) * per_article; ++k) {
        Segment s = text.segments[k];
        s.subject_id = sid;
        const double eta = eta_fixed[k] + ua[a] + us[subj];
        if (spec.residual == ResidualKind::gaussian) {
          s.gaze_duration = eta + spec.sd_resid * z(rng);
        } else {
          if (!(eta > 0)) throw DomainError("synth: lognormal residuals need a positive linear predictor");
          s.gaze_duration = eta * std::exp(spec.sd_resid * z(rng) - 0.5 * spec.sd_resid * spec.sd_resid);
        }
        points.push_back(std::move(s));
      }
    }
  }
  if (spec.n_points_target && *spec.n_points_target < points.size()) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < *spec.n_points_target; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, order.size() - 1);
      std::swap(order[i], order[d(rng)]);
    }
    order.resize(*spec.n_points_target);
    std::sort(order.begin(), order.end());
    std::vector<Segment> kept;
    kept.reserve(order.size());
    for (auto i : order) kept.push_back(std::move(points[i]));
    points = std::move(kept);
  }
  for (auto& s : points) s.has_punct_or_num = text::has_punct_or_digit(s.text);
  out.corpus.language_tag = spec.style == LanguageStyle::japanese_like ? "ja-synthetic" : "en-synthetic";
  out.corpus.metadata = "synthetic seed=" + std::to_string(spec.seed);
  out.truth.spec = spec;
  out.truth.n_points = points.size();
  return out;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(data.corpus, dir / "corpus.tsv");
  write_surprisal_table(data.surprisal, dir / "surprisal.tsv");
  write_unigram_counts(data.counts, dir / "counts.tsv");
  tsv::write_atomic(dir / "truth.json", ground_truth_json(data.truth));
}

// ---------------------------------------------------------------------------
// LM suites

std::string_view to_string(SuiteShape s) { return s == SuiteShape::monotone ? "monotone" : "u_shaped"; }

SuiteShape parse_suite_shape(std::string_view s) {
  if (s == "monotone") return SuiteShape::monotone;
  if (s == "u_shaped") return SuiteShape::u_shaped;
  throw DomainError("unknown suite shape '" + std::string(s) + "'");
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr double kMinNoise = 0.05;
constexpr double kMaxNoise = 1.25;

}  // namespace

Suite make_suite(std::size_t n_lms, SuiteShape shape, std::uint64_t seed) {
  if (n_lms < 3) throw DomainError("make_suite: need at least three LMs");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  Suite suite;
  suite.shape = shape;
  const std::size_t turn = shape == SuiteShape::monotone ? 0 : (n_lms - 1) / 2;
  const double reach = double(std::max(turn, n_lms - 1 - turn));
  static constexpr Architecture kArchs[] = {Architecture::trans_lg, Architecture::trans_sm, Architecture::lstm};
  static constexpr long long kUpdates[] = {1000, 10000, 100000, 1000000};
  std::vector<double> noise(n_lms);
  for (std::size_t j = 0; j < n_lms; ++j) {
    // PPL steps are jittered within a third of the log spacing so the order is kept.
    const double t = (double(j) + jitter(rng)) / double(n_lms - 1);
    LMConfig cfg;
    char id[32];
    std::snprintf(id, sizeof id, "lm%02zu", j + 1);
    cfg.lm_id = id;
    cfg.ppl = 30.0 * std::pow(100.0, std::clamp(t, 0.0, 1.0));
    const double dist = std::abs(double(j) - double(turn)) / reach;
    cfg.noise_sd = kMinNoise + (kMaxNoise - kMinNoise) * dist;
    cfg.architecture = kArchs[j % 3];
    cfg.updates = kUpdates[j % 4];
    noise[j] = cfg.noise_sd;
    suite.lms.push_back(cfg);
  }
  // Better LMs (less noise) get more training data.
  std::vector<std::size_t> order(n_lms);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return noise[a] < noise[b]; });
  for (std::size_t r = 0; r < n_lms; ++r) {
    const std::size_t tercile = r * 3 / n_lms;
    suite.lms[order[r]].data_size = tercile == 0 ? DataSize::lg : tercile == 1 ? DataSize::md : DataSize::sm;
  }
  suite.turning_ppl = suite.lms[turn].ppl;
  return suite;
}

SurprisalTable lm_surprisals(const SurprisalTable& truth, const LMConfig& cfg, std::uint64_t seed) {
  if (truth.rows.empty()) throw DomainError("lm_surprisals: empty generating table");
  if (!(cfg.ppl > 1.0)) throw DomainError("lm_surprisals: perplexity must exceed 1");
  std::mt19937_64 rng(fnv1a(cfg.lm_id, seed ^ 0x9e3779b97f4a7c15ULL));
  std::normal_distribution<double> z(0.0, 1.0);
  SurprisalTable t;
  t.lm_id = cfg.lm_id;
  t.rows = truth.rows;
  double sum = 0.0;
  for (auto& r : t.rows) {
    r.surprisal *= std::exp(cfg.noise_sd * z(rng));
    sum += r.surprisal;
  }
  const double scale = std::log(cfg.ppl) / (sum / double(t.rows.size()));
  for (auto& r : t.rows) r.surprisal *= scale;
  return t;
}

LMRecord record_for(const LMConfig& cfg, std::uint64_t seed) {
  LMRecord r;
  r.lm_id = cfg.lm_id;
  r.architecture = cfg.architecture;
  r.data_size = cfg.data_size;
  r.updates = cfg.updates;
  r.seed = static_cast<long long>(seed);
  r.ppl = cfg.ppl;
  return r;
}

void write_suite(const Suite& suite, const SurprisalTable& truth, std::uint64_t seed,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "lms");
  json j;
  j["shape"] = to_string(suite.shape);
  j["turning_ppl"] = suite.turning_ppl;
  j["seed"] = seed;
  j["lms"] = json::array();
  for (const auto& cfg : suite.lms) {
    const auto table = lm_surprisals(truth, cfg, seed);
    const std::string rel = "lms/" + cfg.lm_id + ".tsv";
    write_surprisal_table(table, dir / rel);
    j["lms"].push_back({{"lm_id", cfg.lm_id},
                        {"architecture", to_string(cfg.architecture)},
                        {"data_size", to_string(cfg.data_size)},
                        {"updates", cfg.updates},
                        {"seed", seed},
                        {"ppl", cfg.ppl},
                        {"noise_sd", cfg.noise_sd},
                        {"surprisal", rel}});
  }
  tsv::write_atomic(dir / "lms.json", j.dump(2) + "\n");
}

}  // namespace gazefit
