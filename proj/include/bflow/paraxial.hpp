#pragma once

#include "bflow/random_fields.hpp"

#include <complex>
#include <functional>
#include <vector>

namespace bflow {

/// Periodic transverse grid in lambda units. The spectral cutoff pi/dx must
/// reach the free-space wavenumber 2*pi, i.e. dx <= 1/2, and n is kept a
/// power of two for transform efficiency.
struct TransverseGrid {
    std::size_t n = 0;
    double dx = 0.5;

    double window() const { return dx * static_cast<double>(n); }
    /// Signed coordinate of grid point i (FFT wrap ordering).
    double x(std::size_t i) const;
    /// Angular wavenumber of mode i.
    double k(std::size_t i) const;

    void validate() const;
};

/// Complex transverse field at propagation distance z.
struct WaveState {
    TransverseGrid grid;
    std::vector<std::complex<double>> psi;
    double z = 0.0;

    /// Discrete norm  sum |psi|^2 dx; conserved along propagation.
    double norm() const;
};

enum class SplitOrder { lie, strang };

/// Stepping and output schedule. Every output z must lie on the step lattice
/// z0 + m * dz; the potential is sampled at step midpoints, so its planes
/// must sit at z0 + (m + 1/2) * dz.
struct StepPlan {
    double dz = 0.0;
    SplitOrder order = SplitOrder::strang;
    std::vector<double> z_out;
    /// Optional raised-cosine absorbing strip on each edge, as a fraction of
    /// the window (0 disables; used for beam-like inputs only).
    double absorber_fraction = 0.0;
};

/// Pointwise |psi|^2.
std::vector<double> intensity(const WaveState& state);

/// Split-step spectral integration of
///   i d_z psi = -alpha d_x^2 psi + V(z, x) psi
/// with Strang (default) or Lie splitting; V is taken from the plane at each
/// step midpoint. The sink is called at every scheduled z (including z0 when
/// scheduled). Throws NumericalError on NaN or norm drift.
void propagate(const WaveState& initial, const PotentialField& potential, const StepPlan& plan,
               double alpha, const std::function<void(const WaveState&)>& sink);

/// Convenience overload collecting the scheduled states.
std::vector<WaveState> propagate(const WaveState& initial, const PotentialField& potential,
                                 const StepPlan& plan, double alpha);

/// A zero potential with planes aligned to the midpoints of the given plan,
/// for free-space runs and tests.
PotentialField zero_potential(const TransverseGrid& grid, double dz, double z_extent);

} // namespace bflow
