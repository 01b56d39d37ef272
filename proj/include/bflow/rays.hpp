#pragma once

#include "bflow/correlation.hpp"
#include "bflow/random_fields.hpp"

#include <functional>
#include <span>
#include <vector>

namespace bflow {

/// One characteristic ray: unwrapped position X, transverse wavenumber K, and
/// the immutable launch labels (x0, k0).
struct RayState {
    double X = 0.0;
    double K = 0.0;
    double x0 = 0.0;
    double k0 = 0.0;
};

struct RayBundle {
    std::vector<RayState> rays;
    double z = 0.0;
};

/// Rays on a uniform (x, k) label grid: n_x positions across [0, window),
/// n_k wavenumbers across [-k_span, k_span].
RayBundle uniform_label_bundle(std::size_t n_x, std::size_t n_k, double window, double k_span);

/// Integrates dX/dz = 2 alpha K, dK/dz = -dV/dx(z, X) by leapfrog
/// (drift-kick-drift, kick at the half-step z). The x-derivative of the
/// potential is precomputed spectrally per plane and interpolated to ray
/// positions with periodic Catmull-Rom in both axes.
class RayTracer {
public:
    RayTracer(const PotentialField& potential, double alpha);

    /// Advances the bundle to z_target in steps of dz (sign of dz must match
    /// the direction of z_target).
    void advance(RayBundle& bundle, double z_target, double dz) const;

    double gradient(double z, double x) const;
    double potential(double z, double x) const;
    double alpha() const { return alpha_; }
    double window() const { return window_; }

private:
    double interpolate(const float* planes, double z, double x) const;

    std::vector<float> grad_;
    const PotentialField& pot_;
    double alpha_;
    double window_;
};

struct RaySnapshot {
    double z = 0.0;
    std::vector<RayState> rays;
};

/// Traces a bundle through the potential, returning snapshots at the
/// requested z values (which must be multiples of dz). Refuses dz > ell_c/10
/// (the gradient would be under-resolved along z).
std::vector<RaySnapshot> trace_rays(const RayBundle& initial, const PotentialField& potential,
                                    const MediumCorrelation& medium, double alpha, double z_max,
                                    double dz, std::span<const double> snapshot_z);

/// Ensemble moments of the diffusion variables dK = K - k0 and
/// dX = X - x0 - 2 alpha k0 z, with the closed-form diffusion-limit values.
/// The quoted standard errors assume independent rays; rays sharing one
/// medium are correlated, so ensemble-level comparisons should use
/// between-realization scatter instead.
struct DiffusionMoments {
    double z = 0.0;
    std::size_t n = 0;
    double mean_dK = 0.0, var_K = 0.0, se_var_K = 0.0;
    double mean_dX = 0.0, var_X = 0.0, se_var_X = 0.0;
    double cov_XK = 0.0, corr_XK = 0.0, se_corr = 0.0;
    double var_K_theory = 0.0; ///< Gamma(0) z
    double var_X_theory = 0.0; ///< (4/3) alpha^2 Gamma(0) z^3
    double corr_theory = 0.0;  ///< sqrt(3)/2
};

DiffusionMoments diffusion_moments(const RayBundle& bundle, const MediumCorrelation& medium,
                                   double alpha);

/// Finite-difference Jacobian determinant of the label-to-phase-space map
/// using a 2x2 central stencil around (x, k).
double det_jacobian_fd(const RayTracer& tracer, double x, double k, double h_x, double h_k,
                       double z_max, double dz);

/// Weighted (X, K) histogram estimating the Wigner density: each ray carries
/// W_o(k0) dx dk / bin_area. X is wrapped into the periodic window.
struct PhaseSpaceHistogram {
    std::size_t nx = 0, nk = 0;
    double x_lo = 0.0, x_hi = 0.0, k_lo = 0.0, k_hi = 0.0;
    std::vector<double> density;      ///< row-major [ix][ik]
    double total_weight = 0.0;        ///< integral of the histogram
    double out_of_range_weight = 0.0; ///< K fell outside [k_lo, k_hi)
    bool coverage_warning = false;    ///< label grid missed > 1% of W_o mass

    double at(std::size_t ix, std::size_t ik) const { return density[ix * nk + ik]; }
    double bin_dx() const { return (x_hi - x_lo) / static_cast<double>(nx); }
    double bin_dk() const { return (k_hi - k_lo) / static_cast<double>(nk); }
};

PhaseSpaceHistogram wigner_histogram(const RayBundle& bundle, const SourceCoherence& source,
                                     std::size_t nx_bins, std::size_t nk_bins, double window,
                                     double k_lo, double k_hi, double label_dx, double label_dk);

} // namespace bflow
