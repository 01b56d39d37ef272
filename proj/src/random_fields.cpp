#include "bflow/random_fields.hpp"

#include "bflow/errors.hpp"
#include "bflow/fft.hpp"

#include <cmath>
#include <cstring>
#include <utility>

namespace bflow {

namespace {

SeedRecord record_of(const RngStream& s) { return {s.root_seed(), s.stream(), s.substream()}; }

void check_potential_grid(const GridSpec2D& grid, const MediumCorrelation& medium) {
    const double lc = medium.ell_c();
    if (grid.nz < 2 || grid.nx < 2) throw ConfigError("synthesize_potential: grid too small");
    if (grid.dz * static_cast<double>(grid.nz) < 8.0 * lc ||
        grid.dx * static_cast<double>(grid.nx) < 8.0 * lc)
        throw ConfigError("synthesize_potential: extents must be >= 8 ell_c (periodic images "
                          "would alias the covariance)");
    if (grid.dz > lc / 4.0 || grid.dx > lc / 4.0)
        throw ConfigError("synthesize_potential: steps must be <= ell_c / 4");
    if (medium.kind() != MediumKind::gaussian)
        throw ConfigError("synthesize_potential: only the Gaussian covariance family has a "
                          "synthesis spectrum");
}

/// Fills the half spectrum of a real 2D Gaussian field with unit white noise
/// filtered by sqrt(spectrum/area), honoring the Hermitian constraints of the
/// c2r layout. Draw order is row-major and independent of everything else.
void fill_half_spectrum(fft::HalfSpectrumToReal2f& fft2, const GridSpec2D& grid,
                        const MediumCorrelation& medium, RngStream& rng) {
    const std::size_t nz = grid.nz, nx = grid.nx, nxh = nx / 2 + 1;
    const double area = grid.dz * static_cast<double>(nz) * grid.dx * static_cast<double>(nx);
    const double sig2 = medium.sigma2();
    const double lc2 = medium.ell_c() * medium.ell_c();
    auto* spec = fft2.spectrum();

    for (std::size_t iz = 0; iz < nz; ++iz) {
        const double kz = fft::wavenumber(iz, nz, grid.dz);
        for (std::size_t ix = 0; ix < nxh; ++ix) {
            const double kx = fft::wavenumber(ix, nx, grid.dx);
            const double spectrum = M_PI * sig2 * lc2 * std::exp(-(kx * kx + kz * kz) * lc2 / 4.0);
            const double sd = std::sqrt(spectrum / area);
            auto& cell = spec[iz * nxh + ix];

            const bool col_self = (ix == 0) || (nx % 2 == 0 && ix == nx / 2);
            if (!col_self) {
                cell = std::complex<float>(static_cast<float>(sd * M_SQRT1_2 * rng.next_normal()),
                                           static_cast<float>(sd * M_SQRT1_2 * rng.next_normal()));
                continue;
            }
            const bool row_self = (iz == 0) || (nz % 2 == 0 && iz == nz / 2);
            if (row_self) {
                cell = std::complex<float>(static_cast<float>(sd * rng.next_normal()), 0.0f);
            } else if (iz < nz - iz) {
                cell = std::complex<float>(static_cast<float>(sd * M_SQRT1_2 * rng.next_normal()),
                                           static_cast<float>(sd * M_SQRT1_2 * rng.next_normal()));
            } else {
                cell = std::conj(spec[(nz - iz) * nxh + ix]); // Hermitian mirror, no draw
            }
        }
    }
}

} // namespace

PotentialField::PotentialField(GridSpec2D grid, std::vector<float> values, SeedRecord seed)
    : grid_(grid), values_(std::move(values)), seed_(seed) {
    if (values_.size() != grid_.nz * grid_.nx)
        throw ConfigError("PotentialField: value count does not match grid");
}

PotentialField synthesize_potential(const GridSpec2D& grid, const MediumCorrelation& medium,
                                    const RngStream& stream) {
    check_potential_grid(grid, medium);
    RngStream rng = stream;
    fft::HalfSpectrumToReal2f fft2(grid.nz, grid.nx);
    fill_half_spectrum(fft2, grid, medium, rng);
    fft2.execute();
    std::vector<float> values(grid.nz * grid.nx);
    std::memcpy(values.data(), fft2.real_out(), sizeof(float) * values.size());
    return PotentialField(grid, std::move(values), record_of(stream));
}

PotentialField synthesize_potential_blocked(const GridSpec2D& grid,
                                            const MediumCorrelation& medium,
                                            const RngStream& stream, std::size_t block_nz,
                                            std::size_t overlap_nz) {
    check_potential_grid(grid, medium);
    if (overlap_nz == 0 || overlap_nz >= block_nz)
        throw ConfigError("synthesize_potential_blocked: need 0 < overlap < block");
    if (grid.dz * static_cast<double>(block_nz) < 8.0 * medium.ell_c())
        throw ConfigError("synthesize_potential_blocked: block extent must be >= 8 ell_c");
    if (grid.nz <= block_nz) return synthesize_potential(grid, medium, stream);

    const std::size_t stride = block_nz - overlap_nz;
    std::vector<float> values(grid.nz * grid.nx, 0.0f);

    std::size_t start = 0;
    std::uint32_t block_index = 0;
    bool last = false;
    while (!last) {
        if (start + block_nz >= grid.nz) {
            start = grid.nz - block_nz; // align the final block with the end
            last = true;
        }
        GridSpec2D bg = grid;
        bg.nz = block_nz;
        bg.z0 = grid.z0 + static_cast<double>(start) * grid.dz;
        RngStream block_rng(stream.root_seed(), stream.stream(),
                            stream.substream() + 1000u + block_index);
        fft::HalfSpectrumToReal2f fft2(bg.nz, bg.nx);
        fill_half_spectrum(fft2, bg, medium, block_rng);
        fft2.execute();
        const float* block_values = fft2.real_out();

        for (std::size_t j = 0; j < block_nz; ++j) {
            float* dst = values.data() + (start + j) * grid.nx;
            const float* src = block_values + j * grid.nx;
            if (start > 0 && j < overlap_nz) {
                // sqrt-crossfade against the previous block; w_old^2 + w_new^2 = 1
                // keeps the pointwise variance exact. Across the seam the lag
                // covariance is attenuated by cos(pi lag / (2 overlap)).
                const double theta = 0.5 * M_PI * (static_cast<double>(j) + 0.5) /
                                     static_cast<double>(overlap_nz);
                const float wn = static_cast<float>(std::sin(theta));
                const float wo = static_cast<float>(std::cos(theta));
                for (std::size_t ix = 0; ix < grid.nx; ++ix)
                    dst[ix] = wo * dst[ix] + wn * src[ix];
            } else {
                for (std::size_t ix = 0; ix < grid.nx; ++ix) dst[ix] = src[ix];
            }
        }
        start += stride;
        ++block_index;
    }
    return PotentialField(grid, std::move(values), record_of(stream));
}

SpeckleField synthesize_speckle(std::size_t n, double dx, const SourceCoherence& source,
                                const RngStream& stream) {
    if (n < 2 || !(dx > 0.0)) throw ConfigError("synthesize_speckle: bad grid");
    SpeckleField field;
    field.dx = dx;
    field.seed = record_of(stream);
    if (source.kind() == SourceKind::plane_wave) {
        field.psi.assign(n, {1.0, 0.0});
        return field;
    }
    const double rho = source.rho_o();
    if (dx > rho / 4.0) throw ConfigError("synthesize_speckle: dx must be <= rho_o / 4");
    if (dx * static_cast<double>(n) < 8.0 * rho)
        throw ConfigError("synthesize_speckle: window must be >= 8 rho_o");

    // Filter complex white noise with sqrt(W_o); the discrete mode powers are
    // renormalized so that E|psi|^2 = 1 exactly on this grid.
    std::vector<double> amplitude(n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double k = fft::wavenumber(j, n, dx);
        amplitude[j] = source.wigner_weight(k);
        total += amplitude[j];
    }
    RngStream rng = stream;
    fft::Complex1d fft1(n);
    for (std::size_t j = 0; j < n; ++j)
        fft1.data()[j] = std::sqrt(amplitude[j] / total) * rng.next_complex_normal();
    fft1.backward();
    field.psi.assign(fft1.data(), fft1.data() + n);
    return field;
}

CovarianceCurve estimate_covariance(const std::vector<std::vector<double>>& realizations,
                                    std::size_t max_lag, double dx) {
    if (realizations.size() < 2)
        throw ConfigError("estimate_covariance: need at least 2 realizations");
    const std::size_t p = realizations.front().size();
    for (const auto& r : realizations)
        if (r.size() != p) throw ConfigError("estimate_covariance: length mismatch");
    if (max_lag > p / 2)
        throw ConfigError("estimate_covariance: lag beyond half-window is ambiguous on a "
                          "periodic grid");

    const std::size_t nr = realizations.size();
    CovarianceCurve out;
    out.n_realizations = nr;
    out.lag.resize(max_lag + 1);
    out.cov.resize(max_lag + 1);
    out.se.resize(max_lag + 1);
    std::vector<double> per_real(nr);
    for (std::size_t l = 0; l <= max_lag; ++l) {
        double mean = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            const auto& v = realizations[r];
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i) acc += v[i] * v[(i + l) % p];
            per_real[r] = acc / static_cast<double>(p);
            mean += per_real[r];
        }
        mean /= static_cast<double>(nr);
        double var = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            const double d = per_real[r] - mean;
            var += d * d;
        }
        var /= static_cast<double>(nr - 1);
        out.lag[l] = dx * static_cast<double>(l);
        out.cov[l] = mean;
        out.se[l] = std::sqrt(var / static_cast<double>(nr));
    }
    return out;
}

ComplexCorrelationCurve
estimate_field_correlation(const std::vector<std::vector<std::complex<double>>>& realizations,
                           std::size_t max_lag, double dx) {
    if (realizations.size() < 2)
        throw ConfigError("estimate_field_correlation: need at least 2 realizations");
    const std::size_t p = realizations.front().size();
    for (const auto& r : realizations)
        if (r.size() != p) throw ConfigError("estimate_field_correlation: length mismatch");
    if (max_lag > p / 2)
        throw ConfigError("estimate_field_correlation: lag beyond half-window is ambiguous");

    const std::size_t nr = realizations.size();
    ComplexCorrelationCurve out;
    out.n_realizations = nr;
    out.lag.resize(max_lag + 1);
    out.corr.resize(max_lag + 1);
    out.se_re.resize(max_lag + 1);
    out.se_im.resize(max_lag + 1);
    std::vector<std::complex<double>> per_real(nr);
    for (std::size_t l = 0; l <= max_lag; ++l) {
        std::complex<double> mean{0, 0};
        for (std::size_t r = 0; r < nr; ++r) {
            const auto& v = realizations[r];
            std::complex<double> acc{0, 0};
            for (std::size_t i = 0; i < p; ++i) acc += v[(i + l) % p] * std::conj(v[i]);
            per_real[r] = acc / static_cast<double>(p);
            mean += per_real[r];
        }
        mean /= static_cast<double>(nr);
        double var_re = 0.0, var_im = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            var_re += (per_real[r].real() - mean.real()) * (per_real[r].real() - mean.real());
            var_im += (per_real[r].imag() - mean.imag()) * (per_real[r].imag() - mean.imag());
        }
        out.lag[l] = dx * static_cast<double>(l);
        out.corr[l] = mean;
        out.se_re[l] = std::sqrt(var_re / static_cast<double>(nr - 1) / static_cast<double>(nr));
        out.se_im[l] = std::sqrt(var_im / static_cast<double>(nr - 1) / static_cast<double>(nr));
    }
    return out;
}

} // namespace bflow
