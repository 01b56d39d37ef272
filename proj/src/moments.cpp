#include "bflow/moments.hpp"

#include "bflow/errors.hpp"
#include "bflow/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace bflow {

double MomentGrid::x(std::size_t i) const { return dx() * static_cast<double>(fft::freq_index(i, nx)); }
double MomentGrid::y(std::size_t j) const { return dy() * static_cast<double>(fft::freq_index(j, ny)); }
double MomentGrid::kx(std::size_t i) const { return fft::wavenumber(i, nx, dx()); }
double MomentGrid::ky(std::size_t j) const { return fft::wavenumber(j, ny, dy()); }

void MomentGrid::validate() const {
    if (nx < 8 || ny < 8 || nx % 2 || ny % 2)
        throw ConfigError("MomentGrid: nx, ny must be even and >= 8");
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw ConfigError("MomentGrid: extents must be positive");
}

ScintillationCurve MomentSolution::scintillation(ScintRegime r) const {
    if (regime == MomentRegime::coherent_D && r != ScintRegime::plane)
        throw ConfigError("scintillation: coherent_D solution only provides the plane curve");
    if (regime == MomentRegime::incoherent_Pi && r == ScintRegime::plane)
        throw ConfigError("scintillation: incoherent_Pi solution provides c/pc curves");
    ScintillationCurve curve;
    curve.regime = r;
    curve.z_tilde = z_dense;
    curve.S.resize(center_dense.size());
    for (std::size_t i = 0; i < center_dense.size(); ++i)
        curve.S[i] = r == ScintRegime::c ? 2.0 * center_dense[i] - 1.0 : center_dense[i] - 1.0;
    return curve;
}

std::size_t MomentSolution::snapshot_at(double z_tilde) const {
    for (std::size_t i = 0; i < snapshots.size(); ++i)
        if (std::abs(snapshots[i].z_tilde - z_tilde) <= 1e-9 * std::max(1.0, std::abs(z_tilde)))
            return i;
    throw ConfigError("snapshot_at: no snapshot stored at requested z_tilde");
}

namespace {

class MomentStepper {
public:
    MomentStepper(const MomentGrid& grid, double kinetic_coeff, std::vector<double> damping,
                  std::vector<std::complex<double>> initial, const StepControl& ctl)
        : grid_(grid), kinetic_coeff_(kinetic_coeff), damping_(std::move(damping)), ctl_(ctl),
          fft_(grid.nx, grid.ny), col_fft_(grid.ny) {
        std::copy(initial.begin(), initial.end(), fft_.data());

        double max_pos = 0.0, max_abs = 0.0;
        for (double u : damping_) {
            max_pos = std::max(max_pos, u);
            max_abs = std::max(max_abs, std::abs(u));
        }
        if (max_pos * ctl.dz_max > 0.5)
            throw ConfigError("moment solver: growth per step exceeds 0.5; the damping "
                              "coefficient must be non-positive or dz reduced");
        dz_cap_ = ctl.dz_max;
        if (max_abs > 0.0) dz_cap_ = std::min(dz_cap_, ctl.stability_margin / max_abs);
        dz_cap_ = std::max(dz_cap_, ctl.dz_min);
    }

    void run(double z_max, const MomentSolveOptions& opts, MomentSolution& out) {
        std::vector<double> events = opts.snapshot_z;
        events.push_back(z_max);
        std::sort(events.begin(), events.end());
        events.erase(std::unique(events.begin(), events.end(),
                                 [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                     events.end());
        for (double e : events)
            if (e < -1e-12 || e > z_max + 1e-12)
                throw ConfigError("moment solver: snapshot z outside [0, z_max]");

        double z = 0.0;
        out.z_dense.push_back(0.0);
        out.center_dense.push_back(record_center());
        std::size_t next_event = 0;
        while (next_event < events.size() && events[next_event] <= 1e-12) {
            snapshot(0.0, opts, out);
            ++next_event;
        }

        std::size_t step_index = 0;
        while (z < z_max - 1e-12) {
            const double ramp = ctl_.dz_min * std::pow(ctl_.growth, static_cast<double>(step_index));
            double dz = std::min(ramp, dz_cap_);
            const double to_event = events[next_event] - z;
            bool at_event = false;
            if (dz >= to_event - 1e-12) {
                dz = to_event;
                at_event = true;
            }
            step(dz);
            z = at_event ? events[next_event] : z + dz;
            ++step_index;
            out.z_dense.push_back(z);
            out.center_dense.push_back(record_center());
            if (at_event) {
                snapshot(z, opts, out);
                ++next_event;
            }
        }
        check_boundary(z_max, opts, out);
        if (opts.keep_final_field)
            out.final_field.assign(fft_.data(), fft_.data() + grid_.nx * grid_.ny);
    }

    const std::complex<double>* field() const { return fft_.data(); }

    double max_center_imag = 0.0;

private:
    void build_tables(double dz) {
        if (dz == table_dz_) return;
        table_dz_ = dz;
        pot_half_.resize(damping_.size());
        for (std::size_t i = 0; i < damping_.size(); ++i)
            pot_half_[i] = std::exp(damping_[i] * dz / 2.0);
        kin_.resize(damping_.size());
        const double scale = 1.0 / static_cast<double>(grid_.nx * grid_.ny);
        for (std::size_t i = 0; i < grid_.nx; ++i) {
            // The Nyquist mode represents +-k_nyq simultaneously; an odd
            // (first-derivative-like) multiplier must treat it as zero to
            // keep the reflection symmetries exact on the grid.
            const double kx = i == grid_.nx / 2 ? 0.0 : grid_.kx(i);
            for (std::size_t j = 0; j < grid_.ny; ++j) {
                const double ky = j == grid_.ny / 2 ? 0.0 : grid_.ky(j);
                kin_[i * grid_.ny + j] = std::polar(scale, -kinetic_coeff_ * kx * ky * dz);
            }
        }
    }

    void step(double dz) {
        build_tables(dz);
        auto* f = fft_.data();
        const std::size_t n = grid_.nx * grid_.ny;
        for (std::size_t i = 0; i < n; ++i) f[i] *= pot_half_[i];
        fft_.forward();
        for (std::size_t i = 0; i < n; ++i) f[i] *= kin_[i];
        fft_.backward();
        for (std::size_t i = 0; i < n; ++i) f[i] *= pot_half_[i];
    }

    double record_center() {
        const auto c = fft_.data()[0];
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw NumericalError("moment solver: non-finite center value");
        max_center_imag = std::max(max_center_imag, std::abs(c.imag()));
        return c.real();
    }

    void snapshot(double z, const MomentSolveOptions& opts, MomentSolution& out) {
        SliceSnapshot snap;
        snap.z_tilde = z;
        const auto* f = fft_.data();
        snap.row_y0.resize(grid_.nx);
        for (std::size_t i = 0; i < grid_.nx; ++i) snap.row_y0[i] = f[i * grid_.ny].real();
        snap.col_x0.assign(f, f + grid_.ny);
        if (opts.diag_slope != 0.0) interpolate_diag(opts.diag_slope, snap);
        out.snapshots.push_back(std::move(snap));
    }

    /// Band-limited interpolation of the field along y at y* = slope * x for
    /// every grid x (one column FFT per x, then direct series evaluation).
    void interpolate_diag(double slope, SliceSnapshot& snap) {
        const auto* f = fft_.data();
        snap.diag.resize(grid_.nx);
        const std::size_t ny = grid_.ny;
        for (std::size_t i = 0; i < grid_.nx; ++i) {
            const double ystar = slope * grid_.x(i);
            if (std::abs(ystar) > grid_.Ly / 2.0) {
                snap.diag[i] = {0.0, 0.0}; // damped tail beyond the stored box
                snap.diag_truncated = true;
                continue;
            }
            for (std::size_t j = 0; j < ny; ++j) col_fft_.data()[j] = f[i * ny + j];
            col_fft_.forward();
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t m = 0; m < ny; ++m) {
                const double km = grid_.ky(m);
                if (m == ny / 2) {
                    acc += col_fft_.data()[m] * std::cos(km * ystar);
                } else {
                    acc += col_fft_.data()[m] * std::polar(1.0, km * ystar);
                }
            }
            snap.diag[i] = acc / static_cast<double>(ny);
        }
    }

    void check_boundary(double z_max, const MomentSolveOptions& opts, MomentSolution& out) {
        (void)z_max;
        const auto* f = fft_.data();
        const std::size_t ie = grid_.nx / 2, je = grid_.ny / 2;
        const double row_dev = std::abs(f[ie * grid_.ny] - row_edge_plateau_);
        const double col_dev = std::abs(f[je] - col_edge_plateau_);
        out.boundary_residual = std::max(row_dev, col_dev);
        out.boundary_ok = out.boundary_residual < opts.boundary_tol;
        if (!out.boundary_ok) {
            std::ostringstream msg;
            msg << "boundary residual " << out.boundary_residual << " exceeds tolerance "
                << opts.boundary_tol << "; increase Lx/Ly";
            out.boundary_note = msg.str();
        }
    }

public:
    // far-field limits of the (.,0) row and (0,.) column at the box edge
    double row_edge_plateau_ = 1.0;
    double col_edge_plateau_ = 1.0;

private:
    MomentGrid grid_;
    double kinetic_coeff_;
    std::vector<double> damping_;
    StepControl ctl_;
    fft::Complex2d fft_;
    fft::Complex1d col_fft_;
    std::vector<double> pot_half_;
    std::vector<std::complex<double>> kin_;
    double table_dz_ = -1.0;
    double dz_cap_ = 0.0;
};

void require_profile_support(const MediumCorrelation& medium, const MomentGrid& grid) {
    if (medium.kind() != MediumKind::tabulated) return;
    // U couples x and y arguments, so the profile must cover the box diagonal.
    const double need = (grid.Lx + grid.Ly) / 2.0;
    try {
        (void)medium.gamma_tilde(need);
    } catch (const std::out_of_range&) {
        throw ConfigError("moment solver: tabulated profile support must reach (Lx + Ly)/2");
    }
}

} // namespace

MomentSolution solve_coherent_D(const MediumCorrelation& medium, double X_c,
                                const MomentGrid& grid, double z_max, const StepControl& ctl,
                                const MomentSolveOptions& opts) {
    grid.validate();
    if (!(X_c > 0.0)) throw ConfigError("solve_coherent_D: X_c must be positive");
    if (!(z_max > 0.0)) throw ConfigError("solve_coherent_D: z_max must be positive");
    require_profile_support(medium, grid);

    const std::size_t n = grid.nx * grid.ny;
    std::vector<double> damping(n);
    for (std::size_t i = 0; i < grid.nx; ++i)
        for (std::size_t j = 0; j < grid.ny; ++j)
            damping[i * grid.ny + j] = 0.5 * X_c * X_c * medium.U_tilde(grid.x(i), grid.y(j));

    MomentSolution out;
    out.regime = MomentRegime::coherent_D;
    out.X_param = X_c;
    out.grid = grid;

    MomentStepper stepper(grid, 1.0 / X_c, std::move(damping),
                          std::vector<std::complex<double>>(n, {1.0, 0.0}), ctl);
    stepper.run(z_max, opts, out);
    out.max_center_imag = stepper.max_center_imag;
    return out;
}

MomentSolution solve_incoherent_Pi(const MediumCorrelation& medium, const SourceCoherence& source,
                                   double X_o, const MomentGrid& grid, double z_max,
                                   const StepControl& ctl, const MomentSolveOptions& opts) {
    grid.validate();
    if (!(X_o > 0.0)) throw ConfigError("solve_incoherent_Pi: X_o must be positive");
    if (!(z_max > 0.0)) throw ConfigError("solve_incoherent_Pi: z_max must be positive");
    if (!source.is_speckle())
        throw ConfigError("solve_incoherent_Pi: source must be a speckle model");
    if (grid.Ly < 8.0 * X_o)
        throw ConfigError("solve_incoherent_Pi: Ly must cover at least 8 X_o");
    require_profile_support(medium, grid);

    const std::size_t n = grid.nx * grid.ny;
    const double G0 = medium.Gamma_tilde(0.0);
    std::vector<double> damping(n);
    std::vector<std::complex<double>> initial(n);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const double gx = medium.Gamma_tilde(grid.x(i));
        for (std::size_t j = 0; j < grid.ny; ++j) {
            const double y = grid.y(j);
            damping[i * grid.ny + j] = -0.5 * (G0 - gx) * y * y;
            initial[i * grid.ny + j] = {source.pi_tilde_o(y / X_o), 0.0};
        }
    }

    MomentSolution out;
    out.regime = MomentRegime::incoherent_Pi;
    out.X_param = X_o;
    out.grid = grid;

    MomentStepper stepper(grid, 1.0, std::move(damping), std::move(initial), ctl);
    stepper.col_edge_plateau_ = source.pi_tilde_o(grid.Ly / 2.0 / X_o);
    stepper.run(z_max, opts, out);
    out.max_center_imag = stepper.max_center_imag;
    return out;
}

double small_z_scintillation(double z_tilde, ScintRegime regime, double gamma4_tilde) {
    if (z_tilde < 0.0) throw ConfigError("small_z_scintillation: z_tilde must be >= 0");
    if (z_tilde > 0.5)
        std::fprintf(stderr,
                     "small_z_scintillation: z_tilde = %g is outside the validity domain "
                     "(z <= 0.5 z_c)\n",
                     z_tilde);
    const double cubic = gamma4_tilde / 6.0 * z_tilde * z_tilde * z_tilde;
    return regime == ScintRegime::c ? 1.0 + 2.0 * cubic : cubic;
}

CorrelationCurve intensity_correlation(const MomentSolution& solution, std::size_t snapshot_index,
                                       const DerivedScales& scales, ScintRegime regime,
                                       double x_max) {
    if (snapshot_index >= solution.snapshots.size())
        throw ConfigError("intensity_correlation: snapshot index out of range");
    const auto& snap = solution.snapshots[snapshot_index];
    const auto& grid = solution.grid;
    if (regime == ScintRegime::plane && solution.regime != MomentRegime::coherent_D)
        throw ConfigError("intensity_correlation: plane regime needs a coherent_D solution");
    if (regime != ScintRegime::plane && solution.regime != MomentRegime::incoherent_Pi)
        throw ConfigError("intensity_correlation: c/pc regimes need an incoherent_Pi solution");
    if (regime == ScintRegime::c && snap.diag.empty())
        throw ConfigError("intensity_correlation: snapshot lacks the diagonal slice needed for "
                          "the c regime");
    if (!(scales.ell_c > 0.0))
        throw ConfigError("intensity_correlation: scales.ell_c must be positive");

    const double ell_c = scales.ell_c;
    CorrelationCurve out;
    out.z = snap.z_tilde * scales.z_c;
    const double half = grid.Lx / 2.0 * ell_c;
    if (x_max > half) {
        out.truncated = true;
        x_max = half;
    }
    auto value_at = [&](std::size_t i) {
        double c = snap.row_y0[i] - 1.0;
        if (regime == ScintRegime::c) c += snap.diag[i].real();
        return c;
    };
    for (std::size_t i = 0; i < grid.nx / 2; ++i) {
        const double x = grid.x(i) * ell_c;
        if (x > x_max + 1e-12) break;
        out.x.push_back(x);
        out.C.push_back(value_at(i));
    }
    double integral = 0.0;
    for (std::size_t i = 0; i < grid.nx; ++i) integral += value_at(i);
    out.discrete_integral = integral * grid.dx() * ell_c;
    return out;
}

ThresholdResult threshold_scan(const MediumCorrelation& medium, double xc_lo, double xc_hi,
                               double width, double eps_th, const MomentGrid& grid, double z_max,
                               const StepControl& ctl) {
    if (!(xc_lo > 0.0) || !(xc_hi > xc_lo)) throw ConfigError("threshold_scan: bad bracket");
    auto overshoots = [&](double xc) {
        const auto sol = solve_coherent_D(medium, xc, grid, z_max, ctl);
        const double mx = *std::max_element(sol.center_dense.begin(), sol.center_dense.end());
        return mx - 1.0 > 1.0 + eps_th;
    };
    ThresholdResult res;
    bool lo = overshoots(xc_lo), hi = overshoots(xc_hi);
    res.solves = 2;
    if (lo == hi)
        throw ConfigError("threshold_scan: predicate does not change over the range (no bracket)");
    double a = xc_lo, b = xc_hi;
    while (b - a > width) {
        const double mid = 0.5 * (a + b);
        if (overshoots(mid) == hi)
            b = mid;
        else
            a = mid;
        ++res.solves;
    }
    res.lower = a;
    res.upper = b;
    return res;
}

std::vector<std::size_t> local_maxima(std::span<const double> values, double prominence_fraction) {
    std::vector<std::size_t> maxima;
    if (values.size() < 3) return maxima;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double prom = prominence_fraction * (*mx - *mn);
    // strict local maxima, then prominence filtering against the lowest
    // saddle separating the candidate from a higher point
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        if (!(values[i] > values[i - 1] && values[i] >= values[i + 1])) continue;
        double left_min = values[i];
        for (std::size_t j = i; j-- > 0;) {
            left_min = std::min(left_min, values[j]);
            if (values[j] > values[i]) break;
        }
        double right_min = values[i];
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            right_min = std::min(right_min, values[j]);
            if (values[j] > values[i]) break;
        }
        const double saddle = std::max(left_min, right_min);
        if (values[i] - saddle >= prom) maxima.push_back(i);
    }
    return maxima;
}

} // namespace bflow
