#include "bflow/ensemble.hpp"

#include "bflow/errors.hpp"
#include "bflow/moments.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace bflow;
using Catch::Approx;

namespace {

ExperimentPlan base_plan() {
    ExperimentPlan p;
    p.medium = MediumCorrelation::gaussian(1e-4, 25.0);
    p.alpha = alpha_lambda(1.5);
    p.window_over_ell_c = 20.0;
    p.root_seed = 20240817;
    return p;
}

} // namespace

TEST_CASE("plane regime at z = 0 gives S = 0 and C = S exactly") {
    auto p = base_plan();
    p.regime = Regime::plane;
    p.n_medium = 4;
    p.z_out = {0.0};
    const auto res = run_experiment(p);
    CHECK(res.s_curve[0].S == 0.0);
    CHECK(res.corr[0].C[0] == res.s_curve[0].S);
    CHECK(res.fieldcorr[0].re[0] == 1.0);
}

TEST_CASE("speckle baselines at z = 0: contrast one for c, zero for corrected pc") {
    auto p = base_plan();
    p.source = SourceCoherence::gaussian_schell(10.0);
    p.z_out = {0.0};

    p.regime = Regime::c;
    p.n_medium = 200;
    // wide window: the window-mean normalization biases S by -2 Var(m)
    // ~ -2 rho_o sqrt(2 pi) / T, so T must be >> rho_o for a 3-sigma check
    p.window_over_ell_c = 80.0;
    const auto rc = run_experiment(p);
    CHECK(std::abs(rc.s_curve[0].S - 1.0) < 3.0 * rc.s_curve[0].se);
    CHECK(rc.s_curve[0].se < 0.1);
    // C(0) = S identically (same sums)
    CHECK(rc.corr[0].C[0] == rc.s_curve[0].S);
    // field correlation at y = rho_o is C_o(rho_o) = exp(-1/4)
    const std::size_t iy = static_cast<std::size_t>(10.0 / 0.5);
    CHECK(rc.fieldcorr[0].re[iy] == Approx(std::exp(-0.25)).epsilon(0.05));
    CHECK(std::abs(rc.fieldcorr[0].im[iy]) < 5.0 * rc.fieldcorr[0].se[iy]);

    p.regime = Regime::pc;
    p.m_source = 16;
    p.n_medium = 100;
    p.window_over_ell_c = 20.0;
    const auto rp = run_experiment(p);
    CHECK(std::abs(rp.s_curve[0].S) < 3.0 * rp.s_curve[0].se);
    CHECK(rp.corr[0].C[0] == rp.s_curve[0].S);
    // plug-in minus corrected = within-medium contrast / M > 0
    const double gap = rp.s_curve[0].S_plugin - rp.s_curve[0].S;
    CHECK(gap > 0.0);
    CHECK(gap == Approx(1.0 / 16.0).epsilon(0.25));
}

TEST_CASE("plug-in bias shrinks as 1/M") {
    auto p = base_plan();
    p.source = SourceCoherence::gaussian_schell(10.0);
    p.regime = Regime::pc;
    p.z_out = {0.0};
    p.n_medium = 60;
    p.m_source = 8;
    const auto r8 = run_experiment(p);
    p.m_source = 16;
    const auto r16 = run_experiment(p);
    const double gap8 = r8.s_curve[0].S_plugin - r8.s_curve[0].S;
    const double gap16 = r16.s_curve[0].S_plugin - r16.s_curve[0].S;
    CHECK(gap8 / gap16 == Approx(2.0).epsilon(0.35));
}

TEST_CASE("results are bit-identical for any worker count") {
    auto p = base_plan();
    p.regime = Regime::plane;
    p.n_medium = 8;
    p.z_out = {0.0, 400.0, 800.0};
    p.full_lag_curves = true;
    p.workers = 1;
    const auto r1 = run_experiment(p);
    p.workers = 3;
    const auto r3 = run_experiment(p);
    REQUIRE(r1.s_curve.size() == r3.s_curve.size());
    for (std::size_t i = 0; i < r1.s_curve.size(); ++i) {
        CHECK(r1.s_curve[i].S == r3.s_curve[i].S);
        CHECK(r1.s_curve[i].se == r3.s_curve[i].se);
        CHECK(r1.corr[i].C == r3.corr[i].C);
        CHECK(r1.fieldcorr[i].re == r3.fieldcorr[i].re);
        CHECK(r1.fieldcorr[i].im == r3.fieldcorr[i].im);
    }
}

TEST_CASE("accumulator merge has an identity and is chunking-invariant") {
    auto p = base_plan();
    p.regime = Regime::plane;
    p.n_medium = 6;
    p.z_out = {0.0, 200.0};
    p.keep_per_realization = true;
    const auto res = run_experiment(p);
    REQUIRE(res.per_realization.size() == 6);

    auto fold = [&](std::vector<std::size_t> split) {
        Accumulator acc;
        std::size_t start = 0;
        for (std::size_t len : split) {
            Accumulator chunk;
            for (std::size_t i = start; i < start + len; ++i)
                chunk.merge(Accumulator::from_realization(res.per_realization[i]));
            acc.merge(chunk);
            start += len;
        }
        return acc;
    };
    // Chunked folds agree to rounding; bit-identical results come from the
    // engine's fixed sequential fold (worker-count test above).
    const auto whole = fold({6});
    const auto parts = fold({2, 3, 1});
    REQUIRE(whole.count == parts.count);
    for (std::size_t i = 0; i < whole.sum_a.size(); ++i)
        CHECK(whole.sum_a[i] == Approx(parts.sum_a[i]).epsilon(1e-13));
    for (std::size_t i = 0; i < whole.sum_cc.size(); ++i)
        CHECK(whole.sum_cc[i] == Approx(parts.sum_cc[i]).epsilon(1e-13));

    // merge with an empty accumulator is the identity
    auto a = fold({6});
    const auto before = a.sum_a;
    a.merge(Accumulator{});
    CHECK(a.sum_a == before);
}

TEST_CASE("conservation: the full-window correlation integrates to zero (plane)") {
    auto p = base_plan();
    p.regime = Regime::plane;
    p.n_medium = 12;
    p.z_out = {800.0};
    p.full_lag_curves = true;
    const auto res = run_experiment(p);
    const auto& lc = res.corr[0];
    REQUIRE(lc.full);
    double max_c = 0.0;
    for (double c : lc.C) max_c = std::max(max_c, std::abs(c));
    CHECK(std::abs(lc.discrete_integral) < 1e-3 * 25.0 * max_c);
}

TEST_CASE("pc run: single-speckle subsample obeys S_c + 1 = 2 (S_pc + 1)") {
    auto p = base_plan();
    p.source = SourceCoherence::gaussian_schell(10.0);
    p.regime = Regime::pc;
    p.n_medium = 24;
    p.m_source = 8;
    const double z_c = 25.0 * 76.296407005185630;
    p.z_out = {0.25 * z_c};
    p.keep_per_realization = true;
    const auto res = run_experiment(p);

    // Estimate S_c from the first speckle of each medium.
    double sa = 0, saa = 0, sm2 = 0, sm4 = 0;
    const auto n = static_cast<double>(res.per_realization.size());
    for (const auto& r : res.per_realization) {
        sa += r.a_s0[0];
        saa += r.a_s0[0] * r.a_s0[0];
        const double m2 = r.m_s0[0] * r.m_s0[0];
        sm2 += m2;
        sm4 += m2 * m2;
    }
    const double A = sa / n, M2 = sm2 / n;
    const double s_c = A / M2 - 1.0;
    const double va = (saa - n * A * A) / (n - 1.0);
    const double se_c = std::sqrt(va / (M2 * M2) / n); // numerator scatter dominates

    const double s_pc = res.s_curve[0].S;
    const double se_pc = res.s_curve[0].se;
    const double lhs = s_c + 1.0, rhs = 2.0 * (s_pc + 1.0);
    CHECK(std::abs(lhs - rhs) < 3.0 * std::hypot(se_c, 2.0 * se_pc));
}

TEST_CASE("standard errors shrink like 1/sqrt(N)") {
    auto p = base_plan();
    p.source = SourceCoherence::gaussian_schell(10.0);
    p.regime = Regime::c;
    p.n_medium = 64;
    p.z_out = {0.0};
    p.keep_per_realization = true;
    const auto res = run_experiment(p);

    auto se_of = [&](std::size_t count) {
        Accumulator acc;
        for (std::size_t i = 0; i < count; ++i)
            acc.merge(Accumulator::from_realization(res.per_realization[i]));
        const auto n = static_cast<double>(acc.count);
        const double A = acc.sum_a[0] / n;
        const double va = (acc.sum_aa[0] - n * A * A) / (n - 1.0);
        return std::sqrt(va / n);
    };
    CHECK(se_of(16) / se_of(64) == Approx(2.0).epsilon(0.4));
}

TEST_CASE("simulated plane-wave scintillation matches the moment equation") {
    auto p = base_plan();
    p.regime = Regime::plane;
    p.n_medium = 40;
    const double z_c = 25.0 * 76.296407005185630;
    p.z_out = {0.5 * z_c, 1.0 * z_c, 1.5 * z_c};
    const auto res = run_experiment(p);

    const auto scales = derived_scales(p.medium, p.source, p.alpha);
    MomentGrid grid{256, 256, 16.0, 16.0};
    MomentSolveOptions opts;
    for (const auto& pt : res.s_curve) opts.snapshot_z.push_back(pt.z_over_zc);
    const auto sol =
        solve_coherent_D(p.medium, scales.X_c, grid, opts.snapshot_z.back(), StepControl{}, opts);
    for (const auto& pt : res.s_curve) {
        double s_theory = -1.0;
        for (std::size_t i = 0; i < sol.z_dense.size(); ++i)
            if (std::abs(sol.z_dense[i] - pt.z_over_zc) < 1e-9)
                s_theory = sol.center_dense[i] - 1.0;
        REQUIRE(s_theory >= 0.0);
        CHECK(std::abs(pt.S - s_theory) < 3.0 * pt.se);
    }
}

TEST_CASE("plan validation") {
    auto p = base_plan();
    p.z_out = {};
    CHECK_THROWS_AS(run_experiment(p), ConfigError);
    p = base_plan();
    p.regime = Regime::pc;
    p.source = SourceCoherence::gaussian_schell(10.0);
    p.m_source = 1;
    p.z_out = {0.0};
    CHECK_THROWS_AS(run_experiment(p), ConfigError);
    p = base_plan();
    p.regime = Regime::c;
    p.source = SourceCoherence::plane_wave();
    p.z_out = {0.0};
    CHECK_THROWS_AS(run_experiment(p), ConfigError);
    p = base_plan();
    p.regime = Regime::plane;
    p.z_out = {100.0};
    p.dz = 25.0; // coarser than ell_c / 8
    CHECK_THROWS_AS(run_experiment(p), ConfigError);
}
