#pragma once

#include "bflow/correlation.hpp"
#include "bflow/rng.hpp"

#include <complex>
#include <cstdint>
#include <vector>

namespace bflow {

/// Identifies the stream a field was drawn from; enough to regenerate it.
struct SeedRecord {
    std::uint64_t root_seed = 0;
    std::uint32_t stream = 0;
    std::uint32_t substream = 0;
};

/// Uniform periodic (z, x) grid. z0 is the coordinate of plane 0 (the wave
/// solver aligns planes with split-step midpoints by setting z0 = dz/2).
struct GridSpec2D {
    std::size_t nz = 0;
    std::size_t nx = 0;
    double dz = 0.0;
    double dx = 0.0;
    double z0 = 0.0;
};

/// Real random potential V'(z', x') on a periodic grid, lambda-normalized.
/// Values are stored in single precision; the synthesis accuracy and all
/// downstream statistics are far above the float quantization floor.
class PotentialField {
public:
    PotentialField(GridSpec2D grid, std::vector<float> values, SeedRecord seed);

    std::size_t nz() const { return grid_.nz; }
    std::size_t nx() const { return grid_.nx; }
    double dz() const { return grid_.dz; }
    double dx() const { return grid_.dx; }
    double z0() const { return grid_.z0; }
    double z_extent() const { return grid_.dz * static_cast<double>(grid_.nz); }
    double window() const { return grid_.dx * static_cast<double>(grid_.nx); }
    const GridSpec2D& grid() const { return grid_; }
    const SeedRecord& seed() const { return seed_; }

    float value(std::size_t iz, std::size_t ix) const { return values_[iz * grid_.nx + ix]; }
    const float* row(std::size_t iz) const { return values_.data() + iz * grid_.nx; }
    const std::vector<float>& values() const { return values_; }

private:
    GridSpec2D grid_;
    std::vector<float> values_;
    SeedRecord seed_;
};

/// Complex 1D speckle realization of the initial field.
struct SpeckleField {
    std::vector<std::complex<double>> psi;
    double dx = 0.0;
    SeedRecord seed;
};

/// Draws one realization of the Gaussian random potential by filtering
/// spectral white noise with the square root of the power spectrum
/// pi sigma^2 ell_c^2 exp(-(kx^2+kz^2) ell_c^2 / 4), periodic in both axes.
///
/// Preconditions: extents >= 8 ell_c on both axes (otherwise the periodic
/// images alias the covariance) and steps <= ell_c / 4.
PotentialField synthesize_potential(const GridSpec2D& grid, const MediumCorrelation& medium,
                                    const RngStream& stream);

/// Streaming variant for long z-extents: the field is generated in blocks of
/// block_nz planes with an overlap_nz crossfade between independently drawn
/// blocks. Inside a block the covariance is exact; across a seam it is
/// attenuated by cos(pi dz_lag / (2 overlap)), so keep overlap >= 4 ell_c.
PotentialField synthesize_potential_blocked(const GridSpec2D& grid,
                                            const MediumCorrelation& medium,
                                            const RngStream& stream, std::size_t block_nz,
                                            std::size_t overlap_nz);

/// Draws one circular complex Gaussian speckle with correlation C_o(y),
/// filtered from the spectrum W_o(k) and normalized to unit mean intensity
/// in expectation. A plane-wave source returns the constant field 1
/// (degenerate but valid).
SpeckleField synthesize_speckle(std::size_t n, double dx, const SourceCoherence& source,
                                const RngStream& stream);

/// Lag covariance of an ensemble of independent periodic real series,
/// averaged over positions; standard errors from between-realization scatter.
/// The series are assumed zero-mean by construction (no mean subtraction).
struct CovarianceCurve {
    std::vector<double> lag;
    std::vector<double> cov;
    std::vector<double> se;
    std::size_t n_realizations = 0;
};

CovarianceCurve estimate_covariance(const std::vector<std::vector<double>>& realizations,
                                    std::size_t max_lag, double dx);

/// Complex two-point correlation <psi(x + lag) conj(psi(x))> for speckle
/// ensembles, same conventions as estimate_covariance.
struct ComplexCorrelationCurve {
    std::vector<double> lag;
    std::vector<std::complex<double>> corr;
    std::vector<double> se_re;
    std::vector<double> se_im;
    std::size_t n_realizations = 0;
};

ComplexCorrelationCurve
estimate_field_correlation(const std::vector<std::vector<std::complex<double>>>& realizations,
                           std::size_t max_lag, double dx);

} // namespace bflow
