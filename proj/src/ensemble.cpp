#include "bflow/ensemble.hpp"

#include "bflow/errors.hpp"
#include "bflow/fft.hpp"
#include "bflow/version.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace bflow {

std::string to_string(Regime r) {
    switch (r) {
    case Regime::plane: return "plane";
    case Regime::c: return "c";
    case Regime::pc: return "pc";
    }
    return "?";
}

Regime regime_from_string(const std::string& s) {
    if (s == "plane") return Regime::plane;
    if (s == "c") return Regime::c;
    if (s == "pc") return Regime::pc;
    throw ConfigError("unknown regime '" + s + "' (expected plane | c | pc)");
}

namespace {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Next integer with no prime factor beyond 5 (keeps the big synthesis FFT fast).
std::size_t next_5smooth(std::size_t n) {
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t f : {2, 3, 5})
            while (r % f == 0) r /= f;
        if (r == 1) return m;
    }
}

/// Resolved geometry shared by all realizations of a run.
struct RunGeometry {
    TransverseGrid grid;
    double dz = 0.0;
    std::vector<double> z_out;    ///< snapped, sorted, unique
    std::size_t steps = 0;        ///< to the last output
    GridSpec2D pot_grid;          ///< midpoint-aligned synthesis grid
    std::size_t n_lag = 0;
    std::size_t n_y = 0;
};

RunGeometry resolve_geometry(const ExperimentPlan& plan) {
    if (plan.z_out.empty()) throw ConfigError("run_experiment: empty output schedule");
    if (plan.n_medium < 2) throw ConfigError("run_experiment: need n_medium >= 2");
    if (plan.regime == Regime::pc && plan.m_source < 2)
        throw ConfigError("run_experiment: pc regime needs m_source >= 2 (bias correction "
                          "requires within-medium variance)");
    if (plan.regime != Regime::pc && plan.m_source != 1)
        throw ConfigError("run_experiment: plane/c regimes use m_source = 1");
    if (plan.regime != Regime::plane && !plan.source.is_speckle())
        throw ConfigError("run_experiment: c/pc regimes need a speckle source");

    RunGeometry g;
    const double lc = plan.medium.ell_c();
    g.grid.dx = plan.dx;
    g.grid.n = next_pow2(static_cast<std::size_t>(
        std::ceil(plan.window_over_ell_c * lc / plan.dx)));
    g.grid.validate();
    g.dz = plan.dz > 0.0 ? plan.dz : std::min(lc / 8.0, 2.0);
    if (g.dz > lc / 8.0 + 1e-12)
        throw ConfigError("run_experiment: dz must not exceed ell_c / 8");

    for (double z : plan.z_out) {
        if (z < 0.0) throw ConfigError("run_experiment: negative z in schedule");
        g.z_out.push_back(std::round(z / g.dz) * g.dz);
    }
    std::sort(g.z_out.begin(), g.z_out.end());
    g.z_out.erase(std::unique(g.z_out.begin(), g.z_out.end(),
                              [&](double a, double b) { return std::abs(a - b) < g.dz / 2.0; }),
                  g.z_out.end());
    g.steps = static_cast<std::size_t>(std::lround(g.z_out.back() / g.dz));

    if (g.steps > 0) {
        g.pot_grid.nx = g.grid.n;
        g.pot_grid.dx = g.grid.dx;
        g.pot_grid.dz = g.dz;
        g.pot_grid.z0 = g.dz / 2.0;
        g.pot_grid.nz = next_5smooth(std::max<std::size_t>(
            g.steps, static_cast<std::size_t>(std::ceil(8.0 * lc / g.dz))));
    }

    const double x_max = plan.corr_x_max > 0.0 ? plan.corr_x_max : 3.0 * lc;
    g.n_lag = plan.full_lag_curves
                  ? g.grid.n
                  : std::min(g.grid.n / 2,
                             static_cast<std::size_t>(std::floor(x_max / plan.dx)) + 1);
    const double y_max = plan.fieldcorr_y_max > 0.0 ? plan.fieldcorr_y_max : 2.0 * lc;
    g.n_y = std::min(g.grid.n / 2,
                     static_cast<std::size_t>(std::floor(y_max / plan.dx)) + 1);
    return g;
}

/// Scratch FFT used for circular lag products and field correlations.
class LagEngine {
public:
    explicit LagEngine(std::size_t n) : fft_(n), n_(n) {}

    /// c(l) = (1/N) sum_x v(x) v(x+l) for real v, all lags.
    void real_lag_products(const std::vector<double>& v, std::vector<double>& out,
                           std::size_t n_lag) {
        for (std::size_t i = 0; i < n_; ++i) fft_.data()[i] = {v[i], 0.0};
        autocorr(out, n_lag);
    }

    /// f(y) = (1/N) sum_x psi(x+y) conj(psi(x)), complex field version.
    void field_products(const std::vector<std::complex<double>>& psi,
                        std::vector<std::complex<double>>& out, std::size_t n_y) {
        std::copy(psi.begin(), psi.end(), fft_.data());
        fft_.forward();
        for (std::size_t i = 0; i < n_; ++i) fft_.data()[i] = std::norm(fft_.data()[i]);
        fft_.backward();
        const double scale = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
        out.resize(n_y);
        for (std::size_t i = 0; i < n_y; ++i) out[i] = fft_.data()[i] * scale;
    }

private:
    void autocorr(std::vector<double>& out, std::size_t n_lag) {
        fft_.forward();
        for (std::size_t i = 0; i < n_; ++i) fft_.data()[i] = std::norm(fft_.data()[i]);
        fft_.backward();
        const double scale = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
        out.resize(n_lag);
        for (std::size_t i = 0; i < n_lag; ++i) out[i] = fft_.data()[i].real() * scale;
    }

    fft::Complex1d fft_;
    std::size_t n_;
};

double window_mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

RealizationStats run_realization(const ExperimentPlan& plan, const RunGeometry& geo,
                                 std::uint32_t r) {
    const std::size_t nz = geo.z_out.size(), n = geo.grid.n;
    const std::size_t m_src = plan.regime == Regime::pc ? plan.m_source : 1;
    RealizationStats st;
    st.m.assign(nz, 0.0);
    st.a.assign(nz, 0.0);
    st.a_plug.assign(nz, 0.0);
    st.lag.assign(nz, {});
    st.fcorr.assign(nz, std::vector<std::complex<double>>(geo.n_y, {0.0, 0.0}));
    if (plan.regime == Regime::pc) {
        st.m_s0.assign(nz, 0.0);
        st.a_s0.assign(nz, 0.0);
    }

    try {
        std::optional<PotentialField> pot;
        if (geo.steps > 0)
            pot = synthesize_potential(geo.pot_grid, plan.medium, RngStream(plan.root_seed, r, 0));

        LagEngine lags(n);
        // pc inner accumulators: sum of I, of I^2, and of per-speckle lag curves
        std::vector<std::vector<double>> ibar, isq;
        std::vector<std::vector<double>> lag_inner;
        if (plan.regime == Regime::pc) {
            ibar.assign(nz, std::vector<double>(n, 0.0));
            isq.assign(nz, std::vector<double>(n, 0.0));
            lag_inner.assign(nz, std::vector<double>(geo.n_lag, 0.0));
        }

        std::vector<double> scratch_lag;
        for (std::size_t s = 0; s < m_src; ++s) {
            WaveState state;
            state.grid = geo.grid;
            state.z = 0.0;
            if (plan.regime == Regime::plane) {
                state.psi.assign(n, {1.0, 0.0});
            } else {
                state.psi = synthesize_speckle(n, geo.grid.dx, plan.source,
                                               RngStream(plan.root_seed, r,
                                                         1 + static_cast<std::uint32_t>(s)))
                                .psi;
            }

            auto on_output = [&](const WaveState& w) {
                std::size_t iz = nz;
                for (std::size_t i = 0; i < nz; ++i)
                    if (std::abs(geo.z_out[i] - w.z) < geo.dz / 2.0) iz = i;
                if (iz == nz) return;
                const auto inten = intensity(w);
                st.fcorr[iz].resize(geo.n_y);
                std::vector<std::complex<double>> f;
                lags.field_products(w.psi, f, geo.n_y);
                for (std::size_t i = 0; i < geo.n_y; ++i)
                    st.fcorr[iz][i] += f[i] / static_cast<double>(m_src);

                if (plan.regime == Regime::pc) {
                    auto& ib = ibar[iz];
                    auto& iq = isq[iz];
                    for (std::size_t i = 0; i < n; ++i) {
                        ib[i] += inten[i];
                        iq[i] += inten[i] * inten[i];
                    }
                    lags.real_lag_products(inten, scratch_lag, geo.n_lag);
                    for (std::size_t i = 0; i < geo.n_lag; ++i)
                        lag_inner[iz][i] += scratch_lag[i];
                    if (s == 0) {
                        st.m_s0[iz] = window_mean(inten);
                        st.a_s0[iz] = scratch_lag[0];
                    }
                } else {
                    st.m[iz] = window_mean(inten);
                    lags.real_lag_products(inten, st.lag[iz], geo.n_lag);
                    st.a[iz] = st.lag[iz][0];
                    st.a_plug[iz] = st.a[iz];
                }
            };

            if (geo.steps == 0) {
                on_output(state);
            } else {
                StepPlan sp;
                sp.dz = geo.dz;
                sp.z_out = geo.z_out;
                propagate(state, *pot, sp, plan.alpha, on_output);
            }
        }

        if (plan.regime == Regime::pc) {
            const auto m_d = static_cast<double>(m_src);
            for (std::size_t iz = 0; iz < nz; ++iz) {
                auto& ib = ibar[iz];
                for (auto& v : ib) v /= m_d;
                st.m[iz] = window_mean(ib);
                lags.real_lag_products(ib, st.lag[iz], geo.n_lag);
                st.a_plug[iz] = st.lag[iz][0];
                // within-medium covariance of the speckle intensities removes
                // the finite-M bias of products of means:
                //   E[Ibar(x) Ibar(x+l)] = E[<I(x)><I(x+l)>] + Cov_within / M
                for (std::size_t il = 0; il < geo.n_lag; ++il) {
                    const double mean_inner = lag_inner[iz][il] / m_d;
                    const double within =
                        m_d / (m_d - 1.0) * (mean_inner - st.lag[iz][il]);
                    st.lag[iz][il] -= within / m_d;
                }
                st.a[iz] = st.lag[iz][0];
            }
        }
    } catch (const NumericalError& e) {
        st.ok = false;
        st.message = e.what();
    }
    return st;
}

} // namespace

// ============================================================================
// Accumulator
// ============================================================================

Accumulator Accumulator::shaped(std::size_t nz, std::size_t nlag, std::size_t ny) {
    Accumulator a;
    a.nz = nz;
    a.nlag = nlag;
    a.ny = ny;
    a.sum_a.assign(nz, 0.0);
    a.sum_aa.assign(nz, 0.0);
    a.sum_ap.assign(nz, 0.0);
    a.sum_app.assign(nz, 0.0);
    a.sum_m.assign(nz, 0.0);
    a.sum_m2.assign(nz, 0.0);
    a.sum_m4.assign(nz, 0.0);
    a.sum_am2.assign(nz, 0.0);
    a.sum_apm2.assign(nz, 0.0);
    a.sum_c.assign(nz * nlag, 0.0);
    a.sum_cc.assign(nz * nlag, 0.0);
    a.sum_cm2.assign(nz * nlag, 0.0);
    a.sum_fre.assign(nz * ny, 0.0);
    a.sum_fim.assign(nz * ny, 0.0);
    a.sum_frere.assign(nz * ny, 0.0);
    a.sum_imim.assign(nz * ny, 0.0);
    a.sum_reim.assign(nz * ny, 0.0);
    a.sum_ms0.assign(nz, 0.0);
    a.sum_as0.assign(nz, 0.0);
    a.sum_as0as0.assign(nz, 0.0);
    a.sum_ms0sq.assign(nz, 0.0);
    return a;
}

Accumulator Accumulator::from_realization(const RealizationStats& r) {
    const std::size_t nz = r.m.size();
    const std::size_t nlag = nz ? r.lag[0].size() : 0;
    const std::size_t ny = nz ? r.fcorr[0].size() : 0;
    Accumulator a = shaped(nz, nlag, ny);
    if (!r.ok) return a;
    a.count = 1;
    for (std::size_t iz = 0; iz < nz; ++iz) {
        const double m2 = r.m[iz] * r.m[iz];
        a.sum_a[iz] = r.a[iz];
        a.sum_aa[iz] = r.a[iz] * r.a[iz];
        a.sum_ap[iz] = r.a_plug[iz];
        a.sum_app[iz] = r.a_plug[iz] * r.a_plug[iz];
        a.sum_m[iz] = r.m[iz];
        a.sum_m2[iz] = m2;
        a.sum_m4[iz] = m2 * m2;
        a.sum_am2[iz] = r.a[iz] * m2;
        a.sum_apm2[iz] = r.a_plug[iz] * m2;
        for (std::size_t il = 0; il < nlag; ++il) {
            const double c = r.lag[iz][il];
            a.sum_c[iz * nlag + il] = c;
            a.sum_cc[iz * nlag + il] = c * c;
            a.sum_cm2[iz * nlag + il] = c * m2;
        }
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const auto f = r.fcorr[iz][iy];
            a.sum_fre[iz * ny + iy] = f.real();
            a.sum_fim[iz * ny + iy] = f.imag();
            a.sum_frere[iz * ny + iy] = f.real() * f.real();
            a.sum_imim[iz * ny + iy] = f.imag() * f.imag();
            a.sum_reim[iz * ny + iy] = f.real() * f.imag();
        }
        if (!r.m_s0.empty()) {
            a.sum_ms0[iz] = r.m_s0[iz];
            a.sum_ms0sq[iz] = r.m_s0[iz] * r.m_s0[iz];
            a.sum_as0[iz] = r.a_s0[iz];
            a.sum_as0as0[iz] = r.a_s0[iz] * r.a_s0[iz];
        }
    }
    return a;
}

void Accumulator::merge(const Accumulator& other) {
    if (other.count == 0) return;
    if (count == 0 && nz == 0) *this = shaped(other.nz, other.nlag, other.ny);
    if (nz != other.nz || nlag != other.nlag || ny != other.ny)
        throw ConfigError("Accumulator::merge: shape mismatch");
    count += other.count;
    auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    add(sum_a, other.sum_a);
    add(sum_aa, other.sum_aa);
    add(sum_ap, other.sum_ap);
    add(sum_app, other.sum_app);
    add(sum_m, other.sum_m);
    add(sum_m2, other.sum_m2);
    add(sum_m4, other.sum_m4);
    add(sum_am2, other.sum_am2);
    add(sum_apm2, other.sum_apm2);
    add(sum_c, other.sum_c);
    add(sum_cc, other.sum_cc);
    add(sum_cm2, other.sum_cm2);
    add(sum_fre, other.sum_fre);
    add(sum_fim, other.sum_fim);
    add(sum_frere, other.sum_frere);
    add(sum_imim, other.sum_imim);
    add(sum_reim, other.sum_reim);
    add(sum_ms0, other.sum_ms0);
    add(sum_as0, other.sum_as0);
    add(sum_as0as0, other.sum_as0as0);
    add(sum_ms0sq, other.sum_ms0sq);
}

// ============================================================================
// run_experiment
// ============================================================================

namespace {

/// Ratio estimator helpers. S = A / M2 - 1 with A = E[a], M2 = E[m^2];
/// the delta-method variance uses between-realization scatter only.
struct RatioStat {
    double value = 0.0;
    double se = 0.0;
};

RatioStat ratio_minus_one(double sa, double saa, double sm2, double sm4, double sam2,
                          std::size_t count) {
    RatioStat out;
    const auto n = static_cast<double>(count);
    const double A = sa / n, M2 = sm2 / n;
    out.value = A / M2 - 1.0;
    if (count < 2) return out;
    const double va = (saa - n * A * A) / (n - 1.0);
    const double vm = (sm4 - n * M2 * M2) / (n - 1.0);
    const double cam = (sam2 - n * A * M2) / (n - 1.0);
    const double var = (va / (M2 * M2) + A * A * vm / (M2 * M2 * M2 * M2) -
                        2.0 * A * cam / (M2 * M2 * M2)) /
                       n;
    out.se = std::sqrt(std::max(0.0, var));
    return out;
}

} // namespace

ResolvedSchedule resolve_schedule(const ExperimentPlan& plan) {
    const RunGeometry geo = resolve_geometry(plan);
    return {geo.dz, geo.z_out};
}

EnsembleResult run_experiment(const ExperimentPlan& plan) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunGeometry geo = resolve_geometry(plan);

    EnsembleResult res;
    res.plan = plan;
    res.scales = derived_scales(plan.medium, plan.source, plan.alpha);
    res.grid = geo.grid;
    res.dz = geo.dz;
    res.version = std::string(kVersion);

    // Workers compute independent realizations; results land in their slot.
    std::vector<RealizationStats> stats(plan.n_medium);
    {
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        const auto n_workers = static_cast<unsigned>(
            plan.workers > 0 ? static_cast<unsigned>(plan.workers) : hw);
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= plan.n_medium) return;
                stats[r] = run_realization(plan, geo, static_cast<std::uint32_t>(r));
            }
        };
        if (n_workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
    }

    // Ordered fold: bit-identical regardless of worker count.
    Accumulator acc = Accumulator::shaped(geo.z_out.size(), geo.n_lag, geo.n_y);
    for (std::size_t r = 0; r < plan.n_medium; ++r) {
        if (!stats[r].ok) {
            ++res.dropped;
            res.drop_log.push_back("realization " + std::to_string(r) + ": " + stats[r].message);
            continue;
        }
        acc.merge(Accumulator::from_realization(stats[r]));
    }
    if (res.dropped > plan.max_drop_fraction * static_cast<double>(plan.n_medium))
        throw NumericalError("run_experiment: " + std::to_string(res.dropped) +
                             " realizations dropped (limit " +
                             std::to_string(plan.max_drop_fraction) + " of " +
                             std::to_string(plan.n_medium) + ")");
    if (acc.count < 2) throw NumericalError("run_experiment: fewer than 2 usable realizations");

    const std::size_t nz = geo.z_out.size();
    const auto n = static_cast<double>(acc.count);
    for (std::size_t iz = 0; iz < nz; ++iz) {
        SCurvePoint p;
        p.z = geo.z_out[iz];
        p.z_over_zc = p.z / res.scales.z_c;
        p.n = acc.count;
        const auto s = ratio_minus_one(acc.sum_a[iz], acc.sum_aa[iz], acc.sum_m2[iz],
                                       acc.sum_m4[iz], acc.sum_am2[iz], acc.count);
        p.S = s.value;
        p.se = s.se;
        p.S_plugin = ratio_minus_one(acc.sum_ap[iz], acc.sum_app[iz], acc.sum_m2[iz],
                                     acc.sum_m4[iz], acc.sum_apm2[iz], acc.count)
                         .value;
        res.s_curve.push_back(p);

        LagCurve lc;
        lc.z = p.z;
        lc.z_over_zc = p.z_over_zc;
        lc.n = acc.count;
        lc.full = plan.full_lag_curves;
        const double M2 = acc.sum_m2[iz] / n;
        for (std::size_t il = 0; il < geo.n_lag; ++il) {
            const auto st = ratio_minus_one(acc.sum_c[iz * geo.n_lag + il],
                                            acc.sum_cc[iz * geo.n_lag + il], acc.sum_m2[iz],
                                            acc.sum_m4[iz], acc.sum_cm2[iz * geo.n_lag + il],
                                            acc.count);
            // store only up to the configured x_max when full curves are kept
            lc.x.push_back(geo.grid.dx * static_cast<double>(il));
            lc.C.push_back(st.value);
            lc.se.push_back(st.se);
        }
        if (plan.full_lag_curves) {
            double integral = 0.0;
            for (std::size_t il = 0; il < geo.n_lag; ++il)
                integral += acc.sum_c[iz * geo.n_lag + il] / n / M2 - 1.0;
            lc.discrete_integral = integral * geo.grid.dx;
        }
        res.corr.push_back(std::move(lc));

        FieldCorrCurve fc;
        fc.z = p.z;
        fc.z_over_zc = p.z_over_zc;
        fc.n = acc.count;
        for (std::size_t iy = 0; iy < geo.n_y; ++iy) {
            const std::size_t k = iz * geo.n_y + iy;
            const double re = acc.sum_fre[k] / n, im = acc.sum_fim[k] / n;
            const double vre = (acc.sum_frere[k] - n * re * re) / (n - 1.0) / n;
            const double vim = (acc.sum_imim[k] - n * im * im) / (n - 1.0) / n;
            const double cri = (acc.sum_reim[k] - n * re * im) / (n - 1.0) / n;
            const double mod = std::hypot(re, im);
            double se_abs;
            if (mod > 1e-30) {
                se_abs = std::sqrt(std::max(
                    0.0, (re * re * vre + im * im * vim + 2.0 * re * im * cri) / (mod * mod)));
            } else {
                se_abs = std::sqrt(std::max(0.0, 0.5 * (vre + vim)));
            }
            fc.y.push_back(geo.grid.dx * static_cast<double>(iy));
            fc.re.push_back(re);
            fc.im.push_back(im);
            fc.abs.push_back(mod);
            fc.se.push_back(se_abs);
            fc.se_re.push_back(std::sqrt(std::max(0.0, vre)));
            fc.se_im.push_back(std::sqrt(std::max(0.0, vim)));
        }
        res.fieldcorr.push_back(std::move(fc));
    }

    if (plan.keep_per_realization) res.per_realization = std::move(stats);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<std::vector<double>> intensity_map(const ExperimentPlan& plan, std::uint32_t stream) {
    const RunGeometry geo = resolve_geometry(plan);
    std::vector<std::vector<double>> map;
    WaveState state;
    state.grid = geo.grid;
    state.z = 0.0;
    if (plan.regime == Regime::plane)
        state.psi.assign(geo.grid.n, {1.0, 0.0});
    else
        state.psi =
            synthesize_speckle(geo.grid.n, geo.grid.dx, plan.source,
                               RngStream(plan.root_seed, stream, 1))
                .psi;
    if (geo.steps == 0) {
        map.push_back(intensity(state));
        return map;
    }
    const auto pot =
        synthesize_potential(geo.pot_grid, plan.medium, RngStream(plan.root_seed, stream, 0));
    StepPlan sp;
    sp.dz = geo.dz;
    sp.z_out = geo.z_out;
    propagate(state, pot, sp, plan.alpha, [&](const WaveState& w) { map.push_back(intensity(w)); });
    return map;
}

} // namespace bflow
