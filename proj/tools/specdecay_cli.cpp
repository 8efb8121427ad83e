// Command-line laboratory: figure studies, ad-hoc spectra, bound checks.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "specdecay/analysis.hpp"
#include "specdecay/experiment.hpp"
#include "specdecay/hilbert.hpp"
#include "specdecay/io.hpp"
#include "specdecay/operators.hpp"
#include "specdecay/spectra.hpp"

namespace {

void emit_error(const std::string& type, const std::string& message) {
  nlohmann::json j{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

std::string fit_line(const specdecay::NamedFit& nf) {
  const auto& f = nf.fit;
  const auto& best = f.preferred == specdecay::PreferredModel::Polynomial
                         ? f.polynomial
                         : f.exponential;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "  fit %-12s %s preferred, rate %.4f, r^2 %.4f",
                nf.name.c_str(), specdecay::to_string(f.preferred), best.rate,
                best.r_squared);
  return buf;
}

int run_and_report(const specdecay::ExperimentConfig& cfg) {
  try {
    const auto res = specdecay::run_experiment(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "study " << cfg.id << " ("
              << (res.cache_hit ? "cache hit" : "computed") << ") -> "
              << res.run_dir.string() << "\n";
    for (const auto& ns : res.spectra) {
      std::cout << "  spectrum " << ns.name << ": " << ns.spectrum.length()
                << " values, rank " << ns.spectrum.numerical_rank << "\n";
    }
    for (const auto& nf : res.fits) std::cout << fit_line(nf) << "\n";
    for (const auto& st : res.studies) {
      bool mono = true;
      for (bool m : st.study.monotone) mono = mono && m;
      std::cout << "  study " << st.name << ": "
                << (mono ? "monotone" : "NOT monotone")
                << ", last step of sigma_1 "
                << specdecay::fmt_g17(st.study.relative_last_step.front())
                << "\n";
    }
    if (!res.rho_curve.empty()) {
      std::cout << "  rho curve: " << res.rho_curve.size()
                << " points, endpoint "
                << specdecay::fmt_g17(res.rho_curve.back().second) << "\n";
    }
    double total = 0.0;
    for (const auto& t : res.timings) {
      if (t.label == "total-compute" || t.label == "cache-load") {
        total = t.seconds;
      }
    }
    std::cout << "  " << res.manifest.entries.size()
              << " files in manifest, " << total << " s\n";
    return 0;
  } catch (const specdecay::GuardViolation& e) {
    emit_error("guard", e.what());
    return 1;
  } catch (const specdecay::SizeLimitError& e) {
    emit_error("size-limit", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    emit_error("invalid-argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
}

int run_check(const std::string& bound, const std::vector<int>& orders,
              int trials, int dim, int pair_size, std::uint64_t seed,
              const std::string& out_dir) {
  using nlohmann::json;
  try {
    std::filesystem::create_directories(out_dir);
    specdecay::LockFile lock(out_dir);
    json reports = json::array();
    bool violated = false;
    auto append = [&](const specdecay::BoundReport& rep,
                      const std::string& label) {
      violated = violated || !rep.overall_satisfied;
      json rec = json::array();
      for (const auto& x : rep.records) {
        rec.push_back(json{{"index", x.index},
                           {"lhs", x.lhs},
                           {"rhs", x.rhs},
                           {"satisfied", x.satisfied}});
      }
      reports.push_back(json{{"label", label},
                             {"bound_name", rep.bound_name},
                             {"overall_satisfied", rep.overall_satisfied},
                             {"parameters", rep.parameters},
                             {"records", rec}});
      std::cout << "  " << label << ": "
                << (rep.overall_satisfied ? "satisfied" : "VIOLATED") << " ("
                << rep.records.size() << " indices)\n";
    };

    if (bound == "beckermann") {
      std::cout << "bound check: hilbert exponential bound\n";
      for (int n : orders) {
        const auto s =
            specdecay::full_svd(specdecay::hilbert_matrix(n).to_operator());
        append(specdecay::check_beckermann(s, n), "n=" + std::to_string(n));
      }
    } else {
      std::cout << "bound check: product inequality\n";
      for (int t = 1; t <= trials; ++t) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(
            dim, dim, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
        Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(
            dim, dim, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
        const auto rep = specdecay::check_product_inequality(
            specdecay::full_svd(specdecay::make_dense(A, "A")),
            specdecay::full_svd(specdecay::make_dense(B, "B")),
            specdecay::full_svd(specdecay::make_dense(A * B, "AB")));
        if (!rep.overall_satisfied || t == trials) {
          append(rep, "random trial " + std::to_string(t));
        } else {
          violated = violated || !rep.overall_satisfied;
        }
      }
      // The moment/integration pair whose composite the studies revolve
      // around.
      const auto g = specdecay::make_grid(pair_size);
      const auto mode = specdecay::WeightingMode::PaperFaithful;
      specdecay::LanczosConfig lc;
      lc.seed = seed;
      lc.k = 20;
      const auto sBH =
          specdecay::lanczos_topk(specdecay::build_BH(pair_size, g, mode), lc);
      const auto sJ = specdecay::lanczos_topk(specdecay::build_J(g, mode), lc);
      lc.k = 40;
      const auto sAB = specdecay::lanczos_topk(
          specdecay::build_composite_A(pair_size, g, mode), lc);
      append(specdecay::check_product_inequality(sBH, sJ, sAB),
             "moment-integration pair N=" + std::to_string(pair_size));
    }

    const auto path =
        std::filesystem::path(out_dir) / ("check-" + bound + ".json");
    specdecay::write_text_file(
        path, json{{"bound", bound}, {"reports", reports}}.dump(2) + "\n");
    std::cout << "report -> " << path.string() << "\n";
    if (violated) {
      emit_error("bound-violation", "at least one bound record failed; see " +
                                        path.string());
      return 3;
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    emit_error("invalid-argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
}

struct FigOverrides {
  int N = 0;
  int M = 0;
  int k = 0;
  double kappa = 0.0;
  std::vector<long long> jmax;
  std::vector<long long> levels;
  std::string engine;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "specdecay: singular value decay laboratory for moment, integration, "
      "and multiplication operators"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "",
                 "flat key=value config file ([subcommand] sections hold "
                 "per-study overrides)");

  std::string out_dir = "out";
  std::uint64_t seed = 20260814ull;
  std::string weighting;
  bool full_scale = false;
  bool no_cache = false;
  app.add_option("--out", out_dir, "output directory root")
      ->envname("SPECDECAY_OUT");
  app.add_option("--seed", seed, "seed for iterative solvers and trials");
  app.add_option("--weighting", weighting, "quadrature weighting")
      ->check(CLI::IsMember({"paper", "l2"}));
  app.add_flag("--full-scale", full_scale,
               "allow source-scale parameters (long runtimes)");
  app.add_flag("--no-cache", no_cache, "recompute even when cached");

  static const std::map<std::string, std::string> fig_help = {
      {"fig1", "integration, moment, and composite spectra with decay fits"},
      {"fig2", "multiplication-composite spectra and polynomial fit"},
      {"fig3", "gram eigenvalues across moment truncations"},
      {"fig4", "hilbert bound base rho(n) down to its large-n limit"},
      {"fig5", "hilbert truncation spectra across orders"},
      {"fig6", "composite spectra across moment counts"},
      {"fig7", "multiplication spectra across grid sizes"}};
  std::map<std::string, FigOverrides> overrides;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [id, help] : fig_help) {
    auto& ov = overrides[id];
    auto* sub = app.add_subcommand(id, help);
    sub->add_option("--N", ov.N, "time grid size");
    sub->add_option("--M", ov.M, "moment count");
    sub->add_option("--k", ov.k, "leading spectrum size");
    sub->add_option("--kappa", ov.kappa, "multiplicator exponent");
    sub->add_option("--jmax", ov.jmax, "truncation index sweep")
        ->delimiter(',');
    sub->add_option("--levels", ov.levels, "sweep levels")->delimiter(',');
    sub->add_option("--engine", ov.engine, "spectrum engine")
        ->check(CLI::IsMember({"lanczos", "dense", "sym"}));
    subs[id] = sub;
  }

  auto* spectrum = app.add_subcommand(
      "spectrum", "ad-hoc spectrum of one discretized operator");
  FigOverrides sov;
  std::string op_name;
  int num_moments = 0;
  spectrum->add_option("--op", op_name, "operator")
      ->required()
      ->check(CLI::IsMember(
          {"J", "BH", "BM", "A", "gram", "hilbert", "cholesky"}));
  spectrum->add_option("--N", sov.N, "grid size / matrix order");
  spectrum->add_option("--M", sov.M, "moment count (A, gram)");
  spectrum->add_option("--num-moments", num_moments, "moment rows (BH)");
  spectrum->add_option("--kappa", sov.kappa, "multiplicator exponent");
  spectrum->add_option("--jmax", sov.jmax, "gram truncation index")
      ->delimiter(',');
  spectrum->add_option("--k", sov.k, "leading spectrum size");
  spectrum->add_option("--engine", sov.engine, "spectrum engine")
      ->check(CLI::IsMember({"lanczos", "dense", "sym"}));

  auto* check = app.add_subcommand("check", "verify singular value bounds");
  std::string bound;
  std::vector<int> orders = {8, 16, 32, 64, 128, 256};
  int trials = 100;
  int dim = 50;
  int pair_size = 1000;
  check->add_option("--bound", bound, "which bound to verify")
      ->required()
      ->check(CLI::IsMember({"beckermann", "product"}));
  check->add_option("--orders", orders, "truncation orders (beckermann)")
      ->delimiter(',');
  check->add_option("--trials", trials, "random trial count (product)");
  check->add_option("--dim", dim, "random trial dimension (product)");
  check->add_option("--pair-size", pair_size,
                    "grid size for the moment-integration pair (product)");

  auto* clean = app.add_subcommand("clean-cache", "remove cached run output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("parse", e.what());
    return 2;
  }

  if (clean->parsed()) {
    const int removed = specdecay::clean_cache(out_dir);
    std::cout << "removed " << removed << " cached runs under " << out_dir
              << "\n";
    return 0;
  }
  if (check->parsed()) {
    return run_check(bound, orders, trials, dim, pair_size, seed, out_dir);
  }

  specdecay::ExperimentConfig cfg;
  try {
    if (spectrum->parsed()) {
      cfg.id = "custom";
      cfg.op = op_name;
      if (spectrum->count("--N")) cfg.N = sov.N;
      if (spectrum->count("--M")) cfg.M = sov.M;
      if (spectrum->count("--num-moments")) cfg.num_moments = num_moments;
      if (spectrum->count("--kappa")) cfg.kappa = sov.kappa;
      if (spectrum->count("--jmax")) cfg.j_max_list = sov.jmax;
      if (spectrum->count("--k")) cfg.k = sov.k;
      if (spectrum->count("--engine")) cfg.engine = sov.engine;
    } else {
      for (const auto& [id, sub] : subs) {
        if (!sub->parsed()) continue;
        cfg = specdecay::default_config(id);
        if (full_scale) specdecay::apply_full_scale(cfg);
        const auto& ov = overrides[id];
        if (sub->count("--N")) cfg.N = ov.N;
        if (sub->count("--M")) cfg.M = ov.M;
        if (sub->count("--k")) cfg.k = ov.k;
        if (sub->count("--kappa")) cfg.kappa = ov.kappa;
        if (sub->count("--jmax")) cfg.j_max_list = ov.jmax;
        if (sub->count("--levels")) cfg.levels = ov.levels;
        if (sub->count("--engine")) cfg.engine = ov.engine;
        break;
      }
    }
    if (app.count("--weighting")) {
      cfg.weighting = specdecay::weighting_from_string(weighting);
    }
    cfg.out_dir = out_dir;
    cfg.seed = seed;
    cfg.full_scale = full_scale;
    cfg.cache_enabled = !no_cache;
  } catch (const std::invalid_argument& e) {
    emit_error("invalid-argument", e.what());
    return 1;
  }
  return run_and_report(cfg);
}
