#include "specdecay/spectra.hpp"

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "specdecay/operators.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using specdecay::build_AstarA;
using specdecay::build_composite_A;
using specdecay::build_J;
using specdecay::DiscreteOperator;
using specdecay::full_svd;
using specdecay::Grid;
using specdecay::LanczosConfig;
using specdecay::lanczos_topk;
using specdecay::make_dense;
using specdecay::make_diagonal;
using specdecay::make_grid;
using specdecay::numerical_rank;
using specdecay::Spectrum;
using specdecay::sym_eigs;
using specdecay::WeightingMode;

namespace {

Eigen::MatrixXd hilbert3() {
  Eigen::MatrixXd h(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h(i, j) = 1.0 / (i + j + 1);
  }
  return h;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(
      rows, cols, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
}

void check_spectrum_invariants(const Spectrum& s) {
  REQUIRE(s.length() ==
          std::min<int>(s.requested_k,
                        static_cast<int>(std::min(s.rows, s.cols))));
  for (int i = 0; i < s.length(); ++i) {
    REQUIRE(s.values[i] >= 0.0);
    if (i > 0) REQUIRE(s.values[i] <= s.values[i - 1]);
  }
  REQUIRE(s.numerical_rank <= s.length());
}

}  // namespace

TEST_CASE("full_svd on elementary matrices") {
  SECTION("identity") {
    Spectrum s = full_svd(make_dense(Eigen::MatrixXd::Identity(5, 5)));
    check_spectrum_invariants(s);
    REQUIRE(s.length() == 5);
    for (double v : s.values) REQUIRE(v == 1.0);
    REQUIRE(s.numerical_rank == 5);
  }

  SECTION("diagonal rearrangement") {
    Eigen::VectorXd d(3);
    d << 3.0, 1.0, 2.0;
    Spectrum s = full_svd(make_diagonal(d));
    check_spectrum_invariants(s);
    REQUIRE(s.values[0] == 3.0);
    REQUIRE(s.values[1] == 2.0);
    REQUIRE(s.values[2] == 1.0);
    REQUIRE(s.metadata.at("engine") == "diagonal-rearrangement");
  }

  SECTION("negative diagonal entries enter by magnitude") {
    Eigen::VectorXd d(3);
    d << -5.0, 0.5, 4.0;
    Spectrum s = full_svd(make_diagonal(d));
    REQUIRE(s.values[0] == 5.0);
    REQUIRE(s.values[1] == 4.0);
    REQUIRE(s.values[2] == 0.5);
  }

  SECTION("3x3 Hilbert matrix against the characteristic polynomial") {
    // Oracle: eigenvalues of H_3 are the roots of
    //   x^3 - (23/15) x^2 + (127/720) x - 1/2160,
    // solved trigonometrically on the test side. H_3 is symmetric positive
    // definite, so they are also the singular values.
    const auto roots =
        oracles::cubic_roots_real(-23.0 / 15.0, 127.0 / 720.0, -1.0 / 2160.0);
    Spectrum s = full_svd(make_dense(hilbert3()));
    check_spectrum_invariants(s);
    for (int i = 0; i < 3; ++i) {
      REQUIRE_THAT(s.values[i], WithinRel(roots[i], 1e-12));
    }
    REQUIRE_THAT(s.values[0], WithinRel(1.4083189271236539575, 1e-14));
    REQUIRE_THAT(s.values[1], WithinRel(0.12232706585390584656, 1e-14));
    REQUIRE_THAT(s.values[2], WithinRel(0.002687340355773529231, 1e-13));
  }
}

TEST_CASE("sym_eigs matches full_svd on symmetric positive matrices") {
  SECTION("Hilbert 3x3") {
    Spectrum sv = full_svd(make_dense(hilbert3()));
    Spectrum ev = sym_eigs(make_dense(hilbert3()));
    check_spectrum_invariants(ev);
    REQUIRE(ev.method == specdecay::SpectrumMethod::SymmetricEig);
    for (int i = 0; i < 3; ++i) {
      REQUIRE_THAT(ev.values[i], WithinRel(sv.values[i], 1e-13));
    }
  }

  SECTION("zero matrix") {
    Spectrum s = sym_eigs(make_dense(Eigen::MatrixXd::Zero(4, 4)));
    for (double v : s.values) REQUIRE(v == 0.0);
    REQUIRE(s.numerical_rank == 0);
  }

  SECTION("asymmetric input is rejected with the asymmetry size") {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 2.0, 3.0, 1.0;
    REQUIRE_THROWS_WITH(sym_eigs(make_dense(a)),
                        ContainsSubstring("asymmetry"));
  }

  SECTION("non-square input is rejected") {
    REQUIRE_THROWS_AS(sym_eigs(make_dense(Eigen::MatrixXd::Zero(2, 3))),
                      std::invalid_argument);
  }

  SECTION("tiny negative roundoff eigenvalues clamp to zero") {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 1.0, 1.0, 1.0;  // rank one, eigenvalues {2, 0}
    Spectrum s = sym_eigs(make_dense(a));
    REQUIRE(s.values[1] >= 0.0);
    REQUIRE_THAT(s.values[0], WithinRel(2.0, 1e-14));
  }
}

TEST_CASE("gram eigenvalues square the composite singular values") {
  // With square-root weighting the Gram discretization is exactly the
  // transpose-product of the composite discretization, truncated at the same
  // order, so eigenvalues must track squared singular values closely.
  const int n = 300;
  const Grid g = make_grid(n);
  DiscreteOperator gram = build_AstarA(g, n, WeightingMode::L2Consistent);
  DiscreteOperator a = build_composite_A(n, g, WeightingMode::L2Consistent);
  Spectrum lam = sym_eigs(gram);
  Spectrum sig = full_svd(a);
  check_spectrum_invariants(lam);
  for (int i = 0; i < 10; ++i) {
    REQUIRE_THAT(lam.values[i], WithinRel(sig.values[i] * sig.values[i], 0.05));
  }

  SECTION("weighting mode does not change the core spectrum") {
    Spectrum lam_paper =
        sym_eigs(build_AstarA(g, n, WeightingMode::PaperFaithful));
    for (int i = 0; i < 20; ++i) {
      REQUIRE(lam_paper.values[i] == lam.values[i]);
    }
  }

  SECTION("the standalone core operator yields the same eigenvalues") {
    Spectrum lam_core = sym_eigs(specdecay::symmetric_core_operator(gram));
    for (int i = 0; i < 20; ++i) {
      REQUIRE(lam_core.values[i] == lam.values[i]);
    }
  }
}

TEST_CASE("lanczos_topk computes leading singular values") {
  SECTION("small diagonal, exhaustion path") {
    Eigen::VectorXd d(5);
    d << 5.0, 4.0, 3.0, 2.0, 1.0;
    LanczosConfig cfg;
    cfg.k = 2;
    Spectrum s = lanczos_topk(make_diagonal(d), cfg);
    check_spectrum_invariants(s);
    REQUIRE(s.length() == 2);
    REQUIRE_THAT(s.values[0], WithinRel(5.0, 1e-10));
    REQUIRE_THAT(s.values[1], WithinRel(4.0, 1e-10));
    REQUIRE(s.metadata.at("converged") == "true");
  }

  SECTION("integration operator versus the dense oracle") {
    const Grid g = make_grid(500);
    DiscreteOperator j = build_J(g, WeightingMode::PaperFaithful);
    Spectrum dense = full_svd(j);
    LanczosConfig cfg;
    cfg.k = 10;
    Spectrum iter = lanczos_topk(j, cfg);
    for (int i = 0; i < 10; ++i) {
      REQUIRE_THAT(iter.values[i], WithinRel(dense.values[i], 1e-8));
    }
  }

  SECTION("determinism for a fixed seed") {
    const Grid g = make_grid(200);
    DiscreteOperator j = build_J(g, WeightingMode::PaperFaithful);
    LanczosConfig cfg;
    cfg.k = 6;
    cfg.seed = 99;
    Spectrum s1 = lanczos_topk(j, cfg);
    Spectrum s2 = lanczos_topk(j, cfg);
    for (int i = 0; i < 6; ++i) {
      REQUIRE(s1.values[i] == s2.values[i]);
    }
  }

  SECTION("composite operator decays exponentially fast") {
    const Grid g = make_grid(2000);
    DiscreteOperator a =
        build_composite_A(2000, g, WeightingMode::PaperFaithful);
    LanczosConfig cfg;
    cfg.k = 20;
    Spectrum s = lanczos_topk(a, cfg);
    check_spectrum_invariants(s);
    for (int i = 0; i + 1 < 13; ++i) {
      REQUIRE(s.values[i + 1] <= 0.75 * s.values[i]);
    }
    REQUIRE(s.values[0] / s.values[14] >= 1e4);
  }

  SECTION("iteration cap yields a flagged partial result") {
    const Grid g = make_grid(500);
    DiscreteOperator j = build_J(g, WeightingMode::PaperFaithful);
    LanczosConfig cfg;
    cfg.k = 5;
    cfg.max_iterations = 5;
    Spectrum s = lanczos_topk(j, cfg);
    check_spectrum_invariants(s);
    REQUIRE(s.metadata.at("converged") == "false");
    REQUIRE(std::stod(s.metadata.at("max_residual")) > 0.0);
  }

  SECTION("rank-deficient operators pad exact zeros") {
    Eigen::VectorXd d(6);
    d << 2.0, 1.0, 0.0, 0.0, 0.0, 0.0;
    LanczosConfig cfg;
    cfg.k = 5;
    Spectrum s = lanczos_topk(make_diagonal(d), cfg);
    REQUIRE(s.length() == 5);
    REQUIRE_THAT(s.values[0], WithinRel(2.0, 1e-9));
    REQUIRE_THAT(s.values[1], WithinRel(1.0, 1e-9));
    REQUIRE(s.values[4] <= 1e-12);
  }

  SECTION("configuration validation") {
    Eigen::VectorXd d(3);
    d << 1.0, 2.0, 3.0;
    DiscreteOperator op = make_diagonal(d);
    LanczosConfig cfg;
    cfg.k = 4;
    REQUIRE_THROWS_AS(lanczos_topk(op, cfg), std::invalid_argument);
    cfg.k = 0;
    REQUIRE_THROWS_AS(lanczos_topk(op, cfg), std::invalid_argument);
    cfg.k = 2;
    cfg.tol = 0.0;
    REQUIRE_THROWS_AS(lanczos_topk(op, cfg), std::invalid_argument);
  }
}

TEST_CASE("spectral engines agree on random matrices") {
  Eigen::MatrixXd a = random_matrix(100, 80, 0xabcdef);
  Spectrum dense = full_svd(make_dense(a));
  check_spectrum_invariants(dense);

  SECTION("lanczos agreement on the top ten") {
    LanczosConfig cfg;
    cfg.k = 10;
    Spectrum iter = lanczos_topk(make_dense(a), cfg);
    for (int i = 0; i < 10; ++i) {
      REQUIRE_THAT(iter.values[i], WithinRel(dense.values[i], 1e-8));
    }
  }

  SECTION("symmetric eigenvalues of the normal matrix agree") {
    Eigen::MatrixXd ata = a.transpose() * a;
    ata = 0.5 * (ata + ata.transpose()).eval();
    Spectrum lam = sym_eigs(make_dense(ata));
    for (int i = 0; i < 10; ++i) {
      REQUIRE_THAT(std::sqrt(lam.values[i]), WithinRel(dense.values[i], 1e-8));
    }
  }
}

TEST_CASE("singular values scale equivariantly") {
  Eigen::MatrixXd a = random_matrix(40, 30, 17);
  Spectrum base = full_svd(make_dense(a));
  for (double c : {-4.0, 0.37}) {
    Spectrum scaled = full_svd(make_dense(c * a));
    for (int i = 0; i < base.length(); ++i) {
      REQUIRE_THAT(scaled.values[i],
                   WithinRel(std::abs(c) * base.values[i], 1e-13));
    }
  }
}

TEST_CASE("dense SVD is backward stable on small matrices") {
  Eigen::MatrixXd a = random_matrix(30, 20, 4242);

  // Oracle 1: reconstruction residual from a factored test-side SVD.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd recon = svd.matrixU() *
                          svd.singularValues().asDiagonal() *
                          svd.matrixV().transpose();
  const double sigma1 = svd.singularValues()[0];
  REQUIRE((a - recon).norm() <= 100.0 * 30.0 * specdecay::kEps * sigma1);

  // Oracle 2: an independent one-sided Jacobi pass through the normal matrix
  // in 50-digit arithmetic pins the true values.
  std::vector<std::vector<oracles::BigFloat>> ata(
      20, std::vector<oracles::BigFloat>(20));
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      oracles::BigFloat acc = 0;
      for (int r = 0; r < 30; ++r) {
        acc += oracles::BigFloat(a(r, i)) * oracles::BigFloat(a(r, j));
      }
      ata[i][j] = acc;
    }
  }
  const auto lam = oracles::jacobi_eigenvalues(ata);
  Spectrum s = full_svd(make_dense(a));
  for (int i = 0; i < 20; ++i) {
    const double truth =
        std::sqrt(static_cast<double>(lam[static_cast<std::size_t>(i)]));
    REQUIRE_THAT(s.values[i], WithinRel(truth, 1e-12));
  }
}

TEST_CASE("numerical_rank counts values above the relative floor") {
  SECTION("hard zero tail") {
    Eigen::VectorXd d(2);
    d << 1.0, 1e-20;
    Spectrum s = full_svd(make_diagonal(d));
    REQUIRE(s.numerical_rank == 1);
    REQUIRE(numerical_rank(s) == 1);
  }

  SECTION("full-rank identity") {
    Spectrum s = full_svd(make_dense(Eigen::MatrixXd::Identity(5, 5)));
    REQUIRE(numerical_rank(s) == 5);
  }

  SECTION("explicit tolerance override") {
    Eigen::VectorXd d(3);
    d << 1.0, 1e-3, 1e-9;
    Spectrum s = full_svd(make_diagonal(d));
    REQUIRE(numerical_rank(s, 1e-6) == 2);
    REQUIRE(numerical_rank(s, 1e-12) == 3);
  }

  SECTION("all-zero spectrum has rank zero") {
    Spectrum s = full_svd(make_diagonal(Eigen::VectorXd::Zero(4)));
    REQUIRE(s.numerical_rank == 0);
    REQUIRE(numerical_rank(s) == 0);
  }

  SECTION("empty spectrum is rejected") {
    Spectrum s;
    REQUIRE_THROWS_AS(numerical_rank(s), std::invalid_argument);
  }

  SECTION("topk keeps the prefix and re-derives the rank") {
    Eigen::VectorXd d(4);
    d << 8.0, 4.0, 2.0, 1.0;
    Spectrum s = full_svd(make_diagonal(d));
    Spectrum t = s.topk(2);
    REQUIRE(t.length() == 2);
    REQUIRE(t.values[1] == 4.0);
    REQUIRE(t.numerical_rank == 2);
    REQUIRE_THROWS_AS(s.topk(-1), std::invalid_argument);
  }
}

TEST_CASE("gram rank stabilizes in the teens at scale", "[.][paper-scale]") {
  const Grid g = make_grid(5000);
  DiscreteOperator gram = build_AstarA(g, 200000, WeightingMode::L2Consistent);
  REQUIRE(gram.describe().at("assembly") == "dilog-split");
  LanczosConfig cfg;
  cfg.k = 25;
  Spectrum s = lanczos_topk(specdecay::symmetric_core_operator(gram), cfg);
  const int rank = numerical_rank(s);
  REQUIRE(rank >= 13);
  REQUIRE(rank <= 20);
}
