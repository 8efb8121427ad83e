#pragma once

// Experiment runner: named figure studies over the operator laboratory,
// with deterministic outputs, content-addressed caching, and plot scripts.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "specdecay/analysis.hpp"
#include "specdecay/common.hpp"
#include "specdecay/hilbert.hpp"
#include "specdecay/io.hpp"
#include "specdecay/operators.hpp"
#include "specdecay/spectra.hpp"

namespace specdecay {

// A configuration issue that run_experiment refuses to execute. The message
// always names the violated guard.
class GuardViolation : public std::runtime_error {
 public:
  GuardViolation(const std::string& guard, const std::string& details)
      : std::runtime_error("guard '" + guard + "' violated: " + details),
        guard_(guard) {}
  const std::string& guard() const { return guard_; }

 private:
  std::string guard_;
};

struct ExperimentConfig {
  std::string id = "custom";  // fig1..fig7 or custom
  std::string op;             // operator select for custom runs
  int N = 2000;               // time grid size
  int M = 2000;               // moment count (second size)
  int num_moments = 2000;     // rows for ad-hoc moment operators
  double kappa = 4.0;
  std::vector<long long> j_max_list;  // truncation sweep (fig3)
  std::vector<long long> levels;      // n / M / K sweeps (fig5..fig7)
  WeightingMode weighting = WeightingMode::PaperFaithful;
  std::string engine = "lanczos";  // lanczos | dense | sym
  int k = 20;                      // leading values for partial spectra
  std::uint64_t seed = 20260814ull;
  bool full_scale = false;
  std::string out_dir = "out";
  bool cache_enabled = true;
};

struct TimingEntry {
  std::string label;
  double seconds = 0.0;
};

struct NamedSpectrum {
  std::string name;
  std::string file;  // CSV holding the values
  int block = -1;    // ordinal within a sweep CSV, -1 for plain spectra
  Spectrum spectrum;
};

struct NamedFit {
  std::string name;
  FitComparison fit;
};

struct NamedStudy {
  std::string name;
  ConvergenceStudy study;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string cache_key;
  std::vector<NamedSpectrum> spectra;
  std::vector<NamedFit> fits;
  std::vector<BoundReport> bounds;
  std::vector<NamedStudy> studies;
  std::vector<std::pair<double, double>> rho_curve;  // fig4 only
  std::vector<TimingEntry> timings;
  std::vector<std::string> warnings;
  Manifest manifest;
  std::filesystem::path run_dir;
  bool cache_hit = false;
};

inline WeightingMode weighting_from_string(const std::string& s) {
  if (s == "paper") return WeightingMode::PaperFaithful;
  if (s == "l2") return WeightingMode::L2Consistent;
  throw std::invalid_argument("unknown weighting '" + s +
                              "' (expected paper or l2)");
}

inline SpectrumMethod method_from_string(const std::string& s) {
  if (s == "DenseSVD") return SpectrumMethod::DenseSVD;
  if (s == "SymmetricEig") return SpectrumMethod::SymmetricEig;
  if (s == "LanczosPartial") return SpectrumMethod::LanczosPartial;
  throw std::invalid_argument("unknown spectrum method '" + s + "'");
}

inline bool is_figure_id(const std::string& id) {
  return id.size() == 4 && id.rfind("fig", 0) == 0 && id[3] >= '1' &&
         id[3] <= '7';
}

// Desk-scale defaults; every figure finishes in well under ten minutes.
inline ExperimentConfig default_config(const std::string& id) {
  if (!is_figure_id(id) && id != "custom") {
    throw std::invalid_argument("unknown experiment id '" + id + "'");
  }
  ExperimentConfig cfg;
  cfg.id = id;
  if (id == "fig3") {
    cfg.N = 1000;
    cfg.j_max_list = {100, 1000, 10000, 20000};
    cfg.weighting = WeightingMode::L2Consistent;
    cfg.k = 25;
  } else if (id == "fig5") {
    cfg.levels = {20, 40, 80, 160, 320};
  } else if (id == "fig6") {
    cfg.levels = {500, 1000, 2000, 4000};
  } else if (id == "fig7") {
    cfg.levels = {100, 400, 1600, 6400};
  }
  return cfg;
}

// Source-scale parameters; opt-in because several take serious compute time.
inline void apply_full_scale(ExperimentConfig& cfg) {
  cfg.full_scale = true;
  if (cfg.id == "fig1" || cfg.id == "fig2") {
    cfg.N = 10000;
    cfg.M = 10000;
    cfg.k = 25;
  } else if (cfg.id == "fig3") {
    cfg.N = 5000;
    cfg.j_max_list = {100, 1000, 10000, 200000};
  }
}

inline std::string cache_key(const ExperimentConfig& cfg) {
  std::string s = "v1|" + cfg.id + "|" + cfg.op + "|" + std::to_string(cfg.N) +
                  "|" + std::to_string(cfg.M) + "|" +
                  std::to_string(cfg.num_moments) + "|" + fmt_g17(cfg.kappa) +
                  "|jmax=";
  for (auto j : cfg.j_max_list) s += std::to_string(j) + ",";
  s += "|levels=";
  for (auto l : cfg.levels) s += std::to_string(l) + ",";
  s += std::string("|") + to_string(cfg.weighting) + "|" + cfg.engine + "|" +
       std::to_string(cfg.k) + "|" + std::to_string(cfg.seed) + "|" +
       (cfg.full_scale ? "full" : "desk");
  return hash_bytes(s);
}

namespace detail {

inline void require_guard(bool ok, const std::string& guard,
                          const std::string& details) {
  if (!ok) throw GuardViolation(guard, details);
}

inline void validate_config(const ExperimentConfig& cfg) {
  require_guard(is_figure_id(cfg.id) || cfg.id == "custom", "id-recognized",
                "unknown experiment id '" + cfg.id + "'");
  require_guard(cfg.N >= 2 && cfg.M >= 2 && cfg.num_moments >= 2,
                "sizes-at-least-2",
                "N, M, num_moments must all be >= 2 (got N=" +
                    std::to_string(cfg.N) + ", M=" + std::to_string(cfg.M) +
                    ", num_moments=" + std::to_string(cfg.num_moments) + ")");
  require_guard(cfg.k >= 1, "k-positive",
                "k must be >= 1, got " + std::to_string(cfg.k));
  require_guard(cfg.kappa > 0.0, "kappa-positive",
                "kappa must be > 0, got " + fmt_g17(cfg.kappa));
  require_guard(cfg.engine == "lanczos" || cfg.engine == "dense" ||
                    cfg.engine == "sym",
                "engine-recognized",
                "engine must be lanczos, dense, or sym; got '" + cfg.engine +
                    "'");
  for (std::size_t i = 0; i < cfg.j_max_list.size(); ++i) {
    require_guard(cfg.j_max_list[i] >= 1, "jmax-positive",
                  "j_max entries must be >= 1");
    if (i > 0) {
      require_guard(cfg.j_max_list[i] > cfg.j_max_list[i - 1],
                    "jmax-ascending", "j_max list must be strictly ascending");
    }
  }
  for (std::size_t i = 1; i < cfg.levels.size(); ++i) {
    require_guard(cfg.levels[i] > cfg.levels[i - 1], "levels-ascending",
                  "level list must be strictly ascending");
  }

  // Desk-scale ceilings; --full-scale raises them to source-scale sizes.
  const long long n_cap = cfg.full_scale ? 10000 : 2500;
  const long long m_cap = cfg.full_scale ? 200000 : 20000;
  const long long j_cap = cfg.full_scale ? 200000 : 20000;
  const std::string hint =
      cfg.full_scale ? "" : " (pass --full-scale to raise the ceiling)";
  require_guard(cfg.N <= n_cap, "N-scale-ceiling",
                "N=" + std::to_string(cfg.N) + " exceeds " +
                    std::to_string(n_cap) + hint);
  require_guard(cfg.M <= m_cap, "M-scale-ceiling",
                "M=" + std::to_string(cfg.M) + " exceeds " +
                    std::to_string(m_cap) + hint);
  require_guard(cfg.num_moments <= m_cap, "M-scale-ceiling",
                "num_moments=" + std::to_string(cfg.num_moments) +
                    " exceeds " + std::to_string(m_cap) + hint);
  for (auto j : cfg.j_max_list) {
    require_guard(j <= j_cap, "jmax-scale-ceiling",
                  "j_max=" + std::to_string(j) + " exceeds " +
                      std::to_string(j_cap) + hint);
  }

  if (cfg.id == "fig3") {
    require_guard(!cfg.j_max_list.empty(), "fig3-jmax-list",
                  "fig3 needs a nonempty j_max list");
    const auto entries = static_cast<long long>(cfg.N) * cfg.N;
    require_guard(entries <= kMaxDenseEntries, "dense-threshold",
                  "fig3 stores an NxN kernel; N=" + std::to_string(cfg.N) +
                      " needs " + std::to_string(entries) +
                      " entries, budget is " +
                      std::to_string(kMaxDenseEntries));
  }
  if (cfg.id == "fig5" || cfg.id == "fig6" || cfg.id == "fig7") {
    require_guard(cfg.levels.size() >= 2, "levels-at-least-2",
                  cfg.id + " needs at least two sweep levels");
    require_guard(cfg.levels.front() >= 2, "sizes-at-least-2",
                  "sweep levels are matrix sizes and must be >= 2");
  }
  if (cfg.id == "fig5") {
    const long long n = cfg.levels.back();
    require_guard(n * n <= kMaxDenseEntries, "dense-threshold",
                  "fig5 runs dense SVDs; n=" + std::to_string(n) +
                      " exceeds the dense budget");
  }
  if (cfg.id == "fig6") {
    require_guard(cfg.k >= 20, "fig6-tracked-indices",
                  "fig6 tracks sigma_20, so k must be >= 20");
    require_guard(cfg.levels.back() <= m_cap, "M-scale-ceiling",
                  "fig6 levels are moment counts; " +
                      std::to_string(cfg.levels.back()) + " exceeds " +
                      std::to_string(m_cap) + hint);
  }
  if (cfg.id == "fig7") {
    require_guard(cfg.levels.back() <= j_cap, "K-scale-ceiling",
                  "fig7 grid size " + std::to_string(cfg.levels.back()) +
                      " exceeds " + std::to_string(j_cap) + hint);
  }
  if (cfg.id == "fig1" || cfg.id == "fig2") {
    const int fit_len = cfg.engine == "lanczos" ? cfg.k
                                                : std::min(cfg.N, cfg.M);
    require_guard(fit_len >= 5, "fit-range",
                  cfg.id + " fits decay laws and needs at least 5 "
                           "spectrum values");
  }
  if (cfg.engine == "dense" && (cfg.id == "fig1" || cfg.id == "fig2")) {
    const auto entries = static_cast<long long>(cfg.N) *
                         std::max(cfg.N, cfg.M);
    require_guard(entries <= kMaxDenseEntries, "dense-threshold",
                  "dense engine needs " + std::to_string(entries) +
                      " entries, budget is " +
                      std::to_string(kMaxDenseEntries));
  }
  if (cfg.id == "custom") {
    static const std::vector<std::string> ops = {
        "J", "BH", "BM", "A", "gram", "hilbert", "cholesky"};
    require_guard(std::find(ops.begin(), ops.end(), cfg.op) != ops.end(),
                  "op-recognized",
                  "custom runs need op in {J, BH, BM, A, gram, hilbert, "
                  "cholesky}; got '" +
                      cfg.op + "'");
  }
}

// --- JSON (de)serialization ------------------------------------------------

using nlohmann::json;

inline json config_to_json(const ExperimentConfig& cfg) {
  return json{{"id", cfg.id},
              {"op", cfg.op},
              {"N", cfg.N},
              {"M", cfg.M},
              {"num_moments", cfg.num_moments},
              {"kappa", cfg.kappa},
              {"j_max", cfg.j_max_list},
              {"levels", cfg.levels},
              {"weighting", to_string(cfg.weighting)},
              {"engine", cfg.engine},
              {"k", cfg.k},
              {"seed", cfg.seed},
              {"full_scale", cfg.full_scale},
              {"out_dir", cfg.out_dir},
              {"cache", cfg.cache_enabled}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.id = j.at("id").get<std::string>();
  cfg.op = j.at("op").get<std::string>();
  cfg.N = j.at("N").get<int>();
  cfg.M = j.at("M").get<int>();
  cfg.num_moments = j.at("num_moments").get<int>();
  cfg.kappa = j.at("kappa").get<double>();
  cfg.j_max_list = j.at("j_max").get<std::vector<long long>>();
  cfg.levels = j.at("levels").get<std::vector<long long>>();
  cfg.weighting = weighting_from_string(j.at("weighting").get<std::string>());
  cfg.engine = j.at("engine").get<std::string>();
  cfg.k = j.at("k").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.full_scale = j.at("full_scale").get<bool>();
  cfg.out_dir = j.at("out_dir").get<std::string>();
  cfg.cache_enabled = j.at("cache").get<bool>();
  return cfg;
}

inline json fit_to_json(const DecayFit& f) {
  return json{{"model", to_string(f.model)},
              {"amplitude", f.amplitude},
              {"rate", f.rate},
              {"residual_sum_squares", f.residual_sum_squares},
              {"r_squared", f.r_squared},
              {"range", {f.i_lo, f.i_hi}}};
}

inline DecayFit fit_from_json(const json& j) {
  DecayFit f;
  f.model = j.at("model").get<std::string>() == "polynomial"
                ? DecayModel::Polynomial
                : DecayModel::Exponential;
  f.amplitude = j.at("amplitude").get<double>();
  f.rate = j.at("rate").get<double>();
  f.residual_sum_squares = j.at("residual_sum_squares").get<double>();
  f.r_squared = j.at("r_squared").get<double>();
  f.i_lo = j.at("range")[0].get<int>();
  f.i_hi = j.at("range")[1].get<int>();
  return f;
}

inline json result_to_json(const ExperimentResult& r) {
  json j;
  j["schema"] = "specdecay-result-v1";
  j["cache_key"] = r.cache_key;
  j["config"] = config_to_json(r.config);
  j["spectra"] = json::array();
  for (const auto& ns : r.spectra) {
    const auto& s = ns.spectrum;
    j["spectra"].push_back(json{{"name", ns.name},
                                {"file", ns.file},
                                {"block", ns.block},
                                {"method", to_string(s.method)},
                                {"rows", s.rows},
                                {"cols", s.cols},
                                {"requested_k", s.requested_k},
                                {"tolerance", s.tolerance},
                                {"numerical_rank", s.numerical_rank},
                                {"metadata", s.metadata}});
  }
  j["fits"] = json::array();
  for (const auto& nf : r.fits) {
    j["fits"].push_back(json{{"name", nf.name},
                             {"preferred", to_string(nf.fit.preferred)},
                             {"polynomial", fit_to_json(nf.fit.polynomial)},
                             {"exponential", fit_to_json(nf.fit.exponential)}});
  }
  j["bounds"] = json::array();
  for (const auto& b : r.bounds) {
    json rec = json::array();
    for (const auto& x : b.records) {
      rec.push_back(json{{"index", x.index},
                         {"lhs", x.lhs},
                         {"rhs", x.rhs},
                         {"satisfied", x.satisfied}});
    }
    j["bounds"].push_back(json{{"bound_name", b.bound_name},
                               {"overall_satisfied", b.overall_satisfied},
                               {"parameters", b.parameters},
                               {"records", rec}});
  }
  j["studies"] = json::array();
  for (const auto& st : r.studies) {
    j["studies"].push_back(
        json{{"name", st.name},
             {"levels", st.study.levels},
             {"tracked_indices", st.study.tracked_indices},
             {"values", st.study.values},
             {"monotone", st.study.monotone},
             {"limit_candidate", st.study.limit_candidate},
             {"relative_last_step", st.study.relative_last_step}});
  }
  if (!r.rho_curve.empty()) j["rho_file"] = "rho.csv";
  j["timings"] = json::array();
  for (const auto& t : r.timings) {
    j["timings"].push_back(json{{"label", t.label}, {"seconds", t.seconds}});
  }
  j["warnings"] = r.warnings;
  j["manifest"] = json::array();
  for (const auto& e : r.manifest.entries) {
    j["manifest"].push_back(json{{"file", e.file}, {"hash", e.hash}});
  }
  return j;
}

// Rebuilds a result from result.json plus the CSVs it references.
inline ExperimentResult result_from_json(const json& j,
                                         const std::filesystem::path& dir) {
  if (j.at("schema").get<std::string>() != "specdecay-result-v1") {
    throw std::runtime_error("unrecognized result schema in " + dir.string());
  }
  ExperimentResult r;
  r.cache_key = j.at("cache_key").get<std::string>();
  r.config = config_from_json(j.at("config"));
  r.run_dir = dir;
  std::map<std::string, SweepData> sweeps;
  for (const auto& js : j.at("spectra")) {
    NamedSpectrum ns;
    ns.name = js.at("name").get<std::string>();
    ns.file = js.at("file").get<std::string>();
    ns.block = js.at("block").get<int>();
    Spectrum& s = ns.spectrum;
    if (ns.block < 0) {
      s.values = parse_spectrum_csv(dir / ns.file);
    } else {
      if (!sweeps.count(ns.file)) {
        sweeps[ns.file] = parse_sweep_csv(dir / ns.file);
      }
      s.values = sweeps[ns.file].values.at(ns.block);
    }
    s.method = method_from_string(js.at("method").get<std::string>());
    s.rows = js.at("rows").get<Eigen::Index>();
    s.cols = js.at("cols").get<Eigen::Index>();
    s.requested_k = js.at("requested_k").get<int>();
    s.tolerance = js.at("tolerance").get<double>();
    s.numerical_rank = js.at("numerical_rank").get<int>();
    s.metadata =
        js.at("metadata").get<std::map<std::string, std::string>>();
    r.spectra.push_back(std::move(ns));
  }
  for (const auto& jf : j.at("fits")) {
    NamedFit nf;
    nf.name = jf.at("name").get<std::string>();
    const auto pref = jf.at("preferred").get<std::string>();
    nf.fit.preferred = pref == "polynomial" ? PreferredModel::Polynomial
                       : pref == "exponential" ? PreferredModel::Exponential
                                               : PreferredModel::Tie;
    nf.fit.polynomial = fit_from_json(jf.at("polynomial"));
    nf.fit.exponential = fit_from_json(jf.at("exponential"));
    r.fits.push_back(std::move(nf));
  }
  for (const auto& jb : j.at("bounds")) {
    BoundReport b;
    b.bound_name = jb.at("bound_name").get<std::string>();
    b.overall_satisfied = jb.at("overall_satisfied").get<bool>();
    b.parameters =
        jb.at("parameters").get<std::map<std::string, std::string>>();
    for (const auto& jr : jb.at("records")) {
      b.records.push_back(BoundRecord{jr.at("index").get<int>(),
                                      jr.at("lhs").get<double>(),
                                      jr.at("rhs").get<double>(),
                                      jr.at("satisfied").get<bool>()});
    }
    r.bounds.push_back(std::move(b));
  }
  for (const auto& js : j.at("studies")) {
    NamedStudy st;
    st.name = js.at("name").get<std::string>();
    st.study.levels = js.at("levels").get<std::vector<double>>();
    st.study.tracked_indices =
        js.at("tracked_indices").get<std::vector<int>>();
    st.study.values =
        js.at("values").get<std::vector<std::vector<double>>>();
    st.study.monotone = js.at("monotone").get<std::vector<bool>>();
    st.study.limit_candidate =
        js.at("limit_candidate").get<std::vector<double>>();
    st.study.relative_last_step =
        js.at("relative_last_step").get<std::vector<double>>();
    r.studies.push_back(std::move(st));
  }
  if (j.contains("rho_file")) {
    r.rho_curve = parse_rho_csv(dir / j.at("rho_file").get<std::string>());
  }
  for (const auto& jt : j.at("timings")) {
    r.timings.push_back(TimingEntry{jt.at("label").get<std::string>(),
                                    jt.at("seconds").get<double>()});
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& je : j.at("manifest")) {
    r.manifest.entries.push_back(ManifestEntry{
        je.at("file").get<std::string>(), je.at("hash").get<std::string>()});
  }
  return r;
}

class StopWatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - t0_).count();
    t0_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

struct EmitBuffer {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }
};

inline Spectrum engine_spectrum(const DiscreteOperator& op,
                                const ExperimentConfig& cfg) {
  if (cfg.engine == "dense") return full_svd(op);
  if (cfg.engine == "sym") return sym_eigs(op);
  LanczosConfig lc;
  lc.k = cfg.k;
  lc.seed = cfg.seed;
  return lanczos_topk(op, lc);
}

inline std::string reference_curve_csv(int count, double amplitude,
                                       bool exponential, double power = 1.0) {
  std::string out = "index,sigma\n";
  for (int i = 1; i <= count; ++i) {
    const double v = exponential
                         ? amplitude * std::exp(-static_cast<double>(i))
                         : amplitude * std::pow(static_cast<double>(i), -power);
    out += std::to_string(i) + "," + fmt_g17(v) + "\n";
  }
  return out;
}

inline void compute_fig1(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  StopWatch w;
  const Grid g = make_grid(cfg.N);
  const auto J = build_J(g, cfg.weighting);
  const auto BH = build_BH(cfg.M, g, cfg.weighting);
  const auto A = build_composite_A(cfg.M, g, cfg.weighting);
  r.timings.push_back({"assemble", w.lap()});
  Spectrum sJ = engine_spectrum(J, cfg);
  r.timings.push_back({"integration spectrum", w.lap()});
  Spectrum sBH = engine_spectrum(BH, cfg);
  r.timings.push_back({"moment spectrum", w.lap()});
  Spectrum sA = engine_spectrum(A, cfg);
  r.timings.push_back({"composite spectrum", w.lap()});

  out.add("J.csv", spectrum_csv(sJ));
  out.add("BH.csv", spectrum_csv(sBH));
  out.add("A.csv", spectrum_csv(sA));
  out.add("ref_exp.csv", reference_curve_csv(sA.length(), 1.0, true));
  out.add("ref_inv.csv", reference_curve_csv(sJ.length(), 1.0, false));

  r.fits.push_back(
      {"composite", fit_decay(sA, 1, std::min(15, sA.length()))});
  r.fits.push_back(
      {"integration", fit_decay(sJ, 1, std::min(20, sJ.length()))});
  r.spectra.push_back({"integration", "J.csv", -1, std::move(sJ)});
  r.spectra.push_back({"moments", "BH.csv", -1, std::move(sBH)});
  r.spectra.push_back({"composite", "A.csv", -1, std::move(sA)});
}

inline void compute_fig2(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  StopWatch w;
  const Grid g = make_grid(cfg.N);
  const auto J = build_J(g, cfg.weighting);
  const auto BM = build_BM(cfg.kappa, g);
  const auto C = make_product({BM, J});
  r.timings.push_back({"assemble", w.lap()});
  Spectrum sJ = engine_spectrum(J, cfg);
  Spectrum sBM = engine_spectrum(BM, cfg);
  Spectrum sC = engine_spectrum(C, cfg);
  r.timings.push_back({"spectra", w.lap()});

  out.add("J.csv", spectrum_csv(sJ));
  out.add("BM.csv", spectrum_csv(sBM));
  out.add("composite.csv", spectrum_csv(sC));
  out.add("ref_inv.csv", reference_curve_csv(sC.length(), 1.0, false));

  r.fits.push_back(
      {"composite", fit_decay(sC, 1, std::min(50, sC.length()))});
  r.spectra.push_back({"integration", "J.csv", -1, std::move(sJ)});
  r.spectra.push_back({"multiplication", "BM.csv", -1, std::move(sBM)});
  r.spectra.push_back({"composite", "composite.csv", -1, std::move(sC)});
}

inline void compute_fig3(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  const Grid g = make_grid(cfg.N);
  std::vector<double> levels;
  std::vector<Spectrum> spectra;
  for (std::size_t l = 0; l < cfg.j_max_list.size(); ++l) {
    StopWatch w;
    const auto gram =
        build_AstarA(g, cfg.j_max_list[l], cfg.weighting);
    Spectrum s = sym_eigs(gram);
    r.timings.push_back(
        {"gram j_max=" + std::to_string(cfg.j_max_list[l]), w.lap()});
    levels.push_back(static_cast<double>(cfg.j_max_list[l]));
    r.spectra.push_back({"jmax=" + std::to_string(cfg.j_max_list[l]),
                         "gram_sweep.csv", static_cast<int>(l), s});
    spectra.push_back(std::move(s));
  }
  out.add("gram_sweep.csv", sweep_csv(levels, spectra));
  std::vector<int> tracked;
  for (int i = 1; i <= 10; ++i) tracked.push_back(i);
  r.studies.push_back(
      {"gram-truncation", convergence_study(levels, spectra, tracked)});

  // Overlay: the eigenvalues above equal the squared singular values of the
  // L2-weighted composite truncated at the same j_max, so the overlay is
  // computed in that weighting regardless of the sweep's mode.
  StopWatch w;
  const auto A = build_composite_A(static_cast<int>(cfg.j_max_list.back()),
                                   g, WeightingMode::L2Consistent);
  LanczosConfig lc;
  lc.k = cfg.k;
  lc.seed = cfg.seed;
  Spectrum sA = lanczos_topk(A, lc);
  r.timings.push_back({"composite overlay", w.lap()});
  out.add("A.csv", spectrum_csv(sA));
  std::string sq = "index,sigma\n";
  for (int i = 0; i < sA.length(); ++i) {
    sq += std::to_string(i + 1) + "," +
          fmt_g17(sA.values[i] * sA.values[i]) + "\n";
  }
  out.add("A_squared.csv", sq);
  out.add("ref_inv3.csv",
          reference_curve_csv(std::max(30, sA.length()), 1.0, false, 3.0));
  r.spectra.push_back({"composite", "A.csv", -1, std::move(sA)});
}

inline void compute_fig4(ExperimentResult& r, EmitBuffer& out) {
  StopWatch w;
  std::vector<double> ns, rhos;
  for (int j = 0; j <= 60; ++j) {
    const double n = std::pow(10.0, 0.5 * j);
    ns.push_back(n);
    rhos.push_back(beckermann_rho(n));
    r.rho_curve.emplace_back(n, rhos.back());
  }
  r.timings.push_back({"rho curve", w.lap()});
  out.add("rho.csv", rho_csv(ns, rhos));
}

inline void compute_fig5(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  std::vector<double> levels;
  std::vector<Spectrum> spectra;
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    StopWatch w;
    const int n = static_cast<int>(cfg.levels[l]);
    Spectrum s = full_svd(hilbert_matrix(n).to_operator());
    r.timings.push_back({"hilbert n=" + std::to_string(n), w.lap()});
    levels.push_back(static_cast<double>(n));
    r.spectra.push_back(
        {"n=" + std::to_string(n), "hilbert_sweep.csv",
         static_cast<int>(l), s});
    spectra.push_back(std::move(s));
  }
  out.add("hilbert_sweep.csv", sweep_csv(levels, spectra));
  std::vector<int> tracked;
  const int top = static_cast<int>(std::min<long long>(10, cfg.levels.front()));
  for (int i = 1; i <= top; ++i) tracked.push_back(i);
  r.studies.push_back(
      {"hilbert-truncation", convergence_study(levels, spectra, tracked)});
}

inline void compute_fig6(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  const Grid g = make_grid(cfg.N);
  std::vector<double> levels;
  std::vector<Spectrum> spectra;
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    StopWatch w;
    const int m = static_cast<int>(cfg.levels[l]);
    const auto A = build_composite_A(m, g, cfg.weighting);
    Spectrum s = engine_spectrum(A, cfg);
    r.timings.push_back({"composite M=" + std::to_string(m), w.lap()});
    levels.push_back(static_cast<double>(m));
    r.spectra.push_back(
        {"M=" + std::to_string(m), "moment_sweep.csv",
         static_cast<int>(l), s});
    spectra.push_back(std::move(s));
  }
  out.add("moment_sweep.csv", sweep_csv(levels, spectra));
  r.studies.push_back(
      {"moment-count", convergence_study(levels, spectra, {1, 10, 20})});
}

inline void compute_fig7(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  std::vector<double> levels;
  std::vector<Spectrum> spectra;
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    StopWatch w;
    const int K = static_cast<int>(cfg.levels[l]);
    Spectrum s = full_svd(build_BM(cfg.kappa, make_grid(K)));
    r.timings.push_back({"multiplication K=" + std::to_string(K), w.lap()});
    levels.push_back(static_cast<double>(K));
    r.spectra.push_back(
        {"K=" + std::to_string(K), "multiplication_sweep.csv",
         static_cast<int>(l), s});
    spectra.push_back(std::move(s));
  }
  out.add("multiplication_sweep.csv", sweep_csv(levels, spectra));
  std::vector<int> tracked = {1};
  const int ten = static_cast<int>(std::min<long long>(10, cfg.levels.front()));
  if (ten > 1) tracked.push_back(ten);
  r.studies.push_back(
      {"multiplication-grid", convergence_study(levels, spectra, tracked)});
}

inline void compute_custom(ExperimentResult& r, EmitBuffer& out) {
  const auto& cfg = r.config;
  StopWatch w;
  DiscreteOperator op = [&] {
    if (cfg.op == "hilbert") return hilbert_matrix(cfg.N).to_operator();
    if (cfg.op == "cholesky") return hilbert_cholesky(cfg.N).to_operator();
    const Grid g = make_grid(cfg.N);
    if (cfg.op == "J") return build_J(g, cfg.weighting);
    if (cfg.op == "BH") return build_BH(cfg.num_moments, g, cfg.weighting);
    if (cfg.op == "BM") return build_BM(cfg.kappa, g);
    if (cfg.op == "A") return build_composite_A(cfg.M, g, cfg.weighting);
    const long long jmax =
        cfg.j_max_list.empty() ? cfg.M : cfg.j_max_list.front();
    return build_AstarA(g, jmax, cfg.weighting);
  }();
  r.timings.push_back({"assemble", w.lap()});
  Spectrum s = engine_spectrum(op, cfg);
  r.timings.push_back({"spectrum", w.lap()});
  out.add("spectrum.csv", spectrum_csv(s));
  r.spectra.push_back({cfg.op, "spectrum.csv", -1, std::move(s)});
}

}  // namespace detail

// Self-contained gnuplot script matching each figure's axis conventions.
inline std::string plot_script_text(const ExperimentResult& r) {
  const auto& cfg = r.config;
  std::string s;
  s += "# gnuplot script for the '" + cfg.id + "' study\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 960,640\n";
  s += "set output '" + cfg.id + ".png'\n";
  s += "set key top right\n";
  auto series = [](const std::string& file, const std::string& with,
                   const std::string& title) {
    return "'" + file + "' skip 1 using 1:2 with " + with + " title '" +
           title + "'";
  };
  auto sweep_series = [](const std::string& file, long long level,
                         const std::string& title) {
    return "'" + file + "' skip 1 using 2:($1==" + std::to_string(level) +
           "?$3:1/0) with linespoints title '" + title + "'";
  };
  if (cfg.id == "fig1") {
    s += "set logscale y\nset xlabel 'index i'\nset ylabel 'sigma_i'\n";
    s += "plot " + series("J.csv", "linespoints", "integration") + ", \\\n  " +
         series("BH.csv", "linespoints", "moments") + ", \\\n  " +
         series("A.csv", "linespoints", "composite") + ", \\\n  " +
         series("ref_exp.csv", "lines dashtype 2", "exp(-i)") + ", \\\n  " +
         series("ref_inv.csv", "lines dashtype 3", "1/i") + "\n";
  } else if (cfg.id == "fig2") {
    s += "set logscale xy\nset xlabel 'index i'\nset ylabel 'sigma_i'\n";
    s += "plot " + series("J.csv", "linespoints", "integration") + ", \\\n  " +
         series("BM.csv", "linespoints", "multiplication") + ", \\\n  " +
         series("composite.csv", "linespoints", "composite") + ", \\\n  " +
         series("ref_inv.csv", "lines dashtype 2", "1/i") + "\n";
  } else if (cfg.id == "fig3") {
    s += "set logscale y\nset xlabel 'index i'\nset ylabel 'lambda_i'\n";
    s += "plot ";
    for (auto j : cfg.j_max_list) {
      s += sweep_series("gram_sweep.csv", j,
                        "j_max=" + std::to_string(j)) +
           ", \\\n  ";
    }
    s += series("A_squared.csv", "points pointtype 6", "sigma_i^2") +
         ", \\\n  " + series("ref_inv3.csv", "lines dashtype 2", "i^-3") +
         "\n";
  } else if (cfg.id == "fig4") {
    s += "set logscale x\nset xlabel 'n'\nset ylabel 'rho(n)'\n";
    s += "plot " + series("rho.csv", "linespoints", "rho(n)") + "\n";
  } else if (cfg.id == "fig5") {
    s += "set logscale y\nset xlabel 'index i'\nset ylabel 'sigma_i(H_n)'\n";
    s += "plot ";
    bool first = true;
    for (auto n : cfg.levels) {
      if (!first) s += ", \\\n  ";
      s += sweep_series("hilbert_sweep.csv", n, "n=" + std::to_string(n));
      first = false;
    }
    s += "\n";
  } else if (cfg.id == "fig6") {
    s += "set logscale x\nset logscale y\nset xlabel 'moment count M'\n";
    s += "set ylabel 'sigma_i'\n";
    s += "plot ";
    bool first = true;
    for (int i : {1, 10, 20}) {
      if (!first) s += ", \\\n  ";
      s += "'moment_sweep.csv' skip 1 using 1:($2==" + std::to_string(i) +
           "?$3:1/0) with linespoints title 'sigma_" + std::to_string(i) +
           "'";
      first = false;
    }
    s += "\n";
  } else if (cfg.id == "fig7") {
    s += "set logscale x\nset xlabel 'index i'\nset ylabel 'sigma_i(M_K)'\n";
    s += "set yrange [0:1.05]\n";
    s += "plot ";
    bool first = true;
    for (auto K : cfg.levels) {
      if (!first) s += ", \\\n  ";
      s += sweep_series("multiplication_sweep.csv", K,
                        "K=" + std::to_string(K));
      first = false;
    }
    s += "\n";
  } else {
    s += "set logscale y\nset xlabel 'index i'\nset ylabel 'sigma_i'\n";
    s += "plot " + series("spectrum.csv", "linespoints", cfg.op) + "\n";
  }
  return s;
}

inline void emit_plot_script(const ExperimentResult& r,
                             const std::filesystem::path& path) {
  if (r.spectra.empty() && r.rho_curve.empty()) {
    throw std::invalid_argument(
        "emit_plot_script: result holds no data series");
  }
  write_text_file(path, plot_script_text(r));
}

// Runs one named study: validates guards, acquires the run-directory lock,
// reuses hash-verified cached output when enabled, and otherwise computes,
// emits CSV + JSON + plot script, and records the file manifest.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  detail::validate_config(cfg);
  ExperimentResult r;
  r.config = cfg;
  r.cache_key = cache_key(cfg);
  const std::filesystem::path run_dir =
      std::filesystem::path(cfg.out_dir) / (cfg.id + "-" + r.cache_key);
  std::filesystem::create_directories(run_dir);
  r.run_dir = run_dir;
  LockFile lock(run_dir);

  const auto result_path = run_dir / "result.json";
  if (cfg.cache_enabled && std::filesystem::exists(result_path)) {
    detail::StopWatch w;
    try {
      const auto j = detail::json::parse(read_text_file(result_path));
      if (j.at("cache_key").get<std::string>() == r.cache_key) {
        // Verify file hashes before trusting any cached CSV bytes.
        Manifest stored;
        for (const auto& je : j.at("manifest")) {
          stored.entries.push_back({je.at("file").get<std::string>(),
                                    je.at("hash").get<std::string>()});
        }
        const auto bad = manifest_mismatch(stored, run_dir);
        if (bad.empty()) {
          ExperimentResult cached = detail::result_from_json(j, run_dir);
          cached.cache_hit = true;
          cached.run_dir = run_dir;
          cached.config.out_dir = cfg.out_dir;
          cached.config.cache_enabled = cfg.cache_enabled;
          cached.timings.push_back({"cache-load", w.lap()});
          return cached;
        }
        r.warnings.push_back("cached output failed hash verification at '" +
                             bad + "'; recomputing");
      } else {
        r.warnings.push_back(
            "cached result belongs to a different configuration; "
            "recomputing");
      }
    } catch (const std::exception& e) {
      r.warnings.push_back(std::string("unreadable cached result (") +
                           e.what() + "); recomputing");
    }
  }

  detail::EmitBuffer out;
  detail::StopWatch total;
  if (cfg.id == "fig1") {
    detail::compute_fig1(r, out);
  } else if (cfg.id == "fig2") {
    detail::compute_fig2(r, out);
  } else if (cfg.id == "fig3") {
    detail::compute_fig3(r, out);
  } else if (cfg.id == "fig4") {
    detail::compute_fig4(r, out);
  } else if (cfg.id == "fig5") {
    detail::compute_fig5(r, out);
  } else if (cfg.id == "fig6") {
    detail::compute_fig6(r, out);
  } else if (cfg.id == "fig7") {
    detail::compute_fig7(r, out);
  } else {
    detail::compute_custom(r, out);
  }
  out.add("plot.gp", plot_script_text(r));
  r.timings.push_back({"total-compute", total.lap()});

  for (const auto& [name, content] : out.files) {
    write_text_file(run_dir / name, content);
    r.manifest.entries.push_back({name, hash_bytes(content)});
  }
  write_text_file(result_path, detail::result_to_json(r).dump(2) + "\n");
  return r;
}

// Removes completed run directories (<id>-<key> with a result.json) under
// the output root; leaves anything else alone.
inline int clean_cache(const std::filesystem::path& out_dir) {
  if (!std::filesystem::exists(out_dir)) return 0;
  int removed = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    const auto dash = name.find_last_of('-');
    if (dash == std::string::npos || name.size() - dash - 1 != 16) continue;
    const auto id = name.substr(0, dash);
    if (!is_figure_id(id) && id != "custom") continue;
    const auto key = name.substr(dash + 1);
    if (key.find_first_not_of("0123456789abcdef") != std::string::npos) {
      continue;
    }
    if (!std::filesystem::exists(entry.path() / "result.json")) continue;
    std::filesystem::remove_all(entry.path());
    ++removed;
  }
  return removed;
}

}  // namespace specdecay
