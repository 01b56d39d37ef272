#pragma once

#include "bflow/correlation.hpp"

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace bflow {

/// Periodic (x_tilde, y_tilde) grid for the scaled moment equations.
struct MomentGrid {
    std::size_t nx = 256;
    std::size_t ny = 256;
    double Lx = 16.0;
    double Ly = 16.0;

    double dx() const { return Lx / static_cast<double>(nx); }
    double dy() const { return Ly / static_cast<double>(ny); }
    double x(std::size_t i) const;
    double y(std::size_t j) const;
    double kx(std::size_t i) const;
    double ky(std::size_t j) const;

    void validate() const;
};

enum class MomentRegime { coherent_D, incoherent_Pi };
enum class ScintRegime { plane, c, pc };

/// Step-size policy: geometric ramp from dz_min to dz_max, additionally capped
/// by stability_margin / max|damping coefficient| so that large X_c stays in
/// the convergent regime.
struct StepControl {
    double dz_min = 1e-3;
    double dz_max = 1e-2;
    double growth = 1.05;
    double stability_margin = 0.25;
};

/// Field slices kept at a requested z_tilde: the (., 0) row, the (0, .)
/// column, and the sloped slice (x, slope * x) used by the two-scale
/// correlation formula.
struct SliceSnapshot {
    double z_tilde = 0.0;
    std::vector<double> row_y0;
    std::vector<std::complex<double>> col_x0;
    std::vector<std::complex<double>> diag;
    bool diag_truncated = false;
};

struct ScintillationCurve {
    std::vector<double> z_tilde;
    std::vector<double> S;
    ScintRegime regime = ScintRegime::plane;
};

/// Result of one moment-equation solve. center_dense holds the (0,0) value of
/// the field after every step; the scintillation curves derive from it.
struct MomentSolution {
    MomentRegime regime = MomentRegime::coherent_D;
    double X_param = 0.0;                 ///< X_c (coherent) or X_o (incoherent)
    MomentGrid grid;
    std::vector<double> z_dense;
    std::vector<double> center_dense;
    std::vector<SliceSnapshot> snapshots;
    double max_center_imag = 0.0;         ///< symmetry diagnostic
    bool boundary_ok = true;
    double boundary_residual = 0.0;
    std::string boundary_note;
    std::vector<std::complex<double>> final_field; ///< only if requested

    ScintillationCurve scintillation(ScintRegime r) const;
    std::size_t snapshot_at(double z_tilde) const; ///< index lookup (throws if absent)
};

struct MomentSolveOptions {
    std::vector<double> snapshot_z;  ///< z_tilde values at which slices are kept
    double diag_slope = 0.0;         ///< slope of the diagonal slice (0 = skip)
    double boundary_tol = 1e-3;
    bool keep_final_field = false;   ///< store the full field at z_max
};

/// Solves d_z D = i X_c^{-1} d2/(dx dy) D + (1/2) X_c^2 U(x, y) D from D = 1
/// by Strang splitting; the plane-wave scintillation is D(0,0) - 1.
MomentSolution solve_coherent_D(const MediumCorrelation& medium, double X_c,
                                const MomentGrid& grid, double z_max, const StepControl& ctl,
                                const MomentSolveOptions& opts = {});

/// Solves d_z Pi = i d2/(dx dy) Pi - (1/2) (G(0) - G(x)) y^2 Pi starting from
/// Pi = pi_o(y / X_o); S_pc = Pi(0,0) - 1 and S_c = 2 Pi(0,0) - 1.
MomentSolution solve_incoherent_Pi(const MediumCorrelation& medium, const SourceCoherence& source,
                                   double X_o, const MomentGrid& grid, double z_max,
                                   const StepControl& ctl, const MomentSolveOptions& opts = {});

/// Closed-form small-z law: S = (gamma4/6) z^3 for plane and pc, and
/// S = 1 + (gamma4/3) z^3 for c. Valid for z_tilde <~ 0.5 (warns beyond).
double small_z_scintillation(double z_tilde, ScintRegime regime, double gamma4_tilde);

/// Intensity-correlation slice of a stored snapshot, on the physical x grid.
struct CorrelationCurve {
    std::vector<double> x;   ///< physical transverse separation (lambda units)
    std::vector<double> C;
    double z = 0.0;          ///< physical z (lambda units)
    bool truncated = false;  ///< requested x_max exceeded Lx * ell_c / 2
    double discrete_integral = 0.0; ///< sum of C over the full periodic window * dx
};

CorrelationCurve intensity_correlation(const MomentSolution& solution, std::size_t snapshot_index,
                                       const DerivedScales& scales, ScintRegime regime,
                                       double x_max);

/// Bisection for the threshold X_c above which max_z S exceeds 1 + eps_th.
struct ThresholdResult {
    double lower = 0.0;
    double upper = 0.0;
    int solves = 0;
};

ThresholdResult threshold_scan(const MediumCorrelation& medium, double xc_lo, double xc_hi,
                               double width, double eps_th, const MomentGrid& grid, double z_max,
                               const StepControl& ctl);

/// Indices of local maxima of a sampled curve with the given prominence
/// (fraction of the curve's range).
std::vector<std::size_t> local_maxima(std::span<const double> values, double prominence_fraction);

} // namespace bflow
