#include "bflow/rays.hpp"

#include "bflow/errors.hpp"
#include "bflow/fft.hpp"

#include <algorithm>
#include <cmath>

namespace bflow {

namespace {

double wrap_position(double x, double window) {
    const double w = x - window * std::floor(x / window);
    return w == window ? 0.0 : w;
}

/// Catmull-Rom cubic through p[-1], p[0], p[1], p[2] at t in [0, 1].
inline double catmull_rom(double pm1, double p0, double p1, double p2, double t) {
    return 0.5 * (2.0 * p0 + t * ((p1 - pm1) +
                                  t * ((2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2) +
                                       t * (3.0 * (p0 - p1) + p2 - pm1))));
}

} // namespace

RayBundle uniform_label_bundle(std::size_t n_x, std::size_t n_k, double window, double k_span) {
    if (n_x == 0 || n_k == 0) throw ConfigError("uniform_label_bundle: empty label grid");
    RayBundle b;
    b.rays.reserve(n_x * n_k);
    const double dx = window / static_cast<double>(n_x);
    for (std::size_t i = 0; i < n_x; ++i) {
        const double x = dx * static_cast<double>(i);
        for (std::size_t j = 0; j < n_k; ++j) {
            const double k =
                n_k == 1 ? 0.0
                         : -k_span + 2.0 * k_span * static_cast<double>(j) /
                                         static_cast<double>(n_k - 1);
            b.rays.push_back({x, k, x, k});
        }
    }
    return b;
}

RayTracer::RayTracer(const PotentialField& potential, double alpha)
    : pot_(potential), alpha_(alpha), window_(potential.window()) {
    if (!(alpha > 0.0)) throw ConfigError("RayTracer: alpha must be positive");
    // Spectral x-derivative of every plane, once per realization.
    const std::size_t nz = potential.nz(), nx = potential.nx();
    grad_.resize(nz * nx);
    fft::Real1d fft1(nx);
    const double two_pi_over_w = 2.0 * M_PI / window_;
    for (std::size_t iz = 0; iz < nz; ++iz) {
        const float* row = potential.row(iz);
        for (std::size_t ix = 0; ix < nx; ++ix) fft1.real_data()[ix] = row[ix];
        fft1.forward();
        auto* spec = fft1.spectrum();
        const std::size_t nh = nx / 2 + 1;
        for (std::size_t m = 0; m < nh; ++m) {
            // d/dx -> i k; the Nyquist mode of an odd derivative is zeroed
            const double k = (m == nx / 2) ? 0.0 : two_pi_over_w * static_cast<double>(m);
            spec[m] *= std::complex<double>(0.0, k / static_cast<double>(nx));
        }
        fft1.backward();
        for (std::size_t ix = 0; ix < nx; ++ix)
            grad_[iz * nx + ix] = static_cast<float>(fft1.real_data()[ix]);
    }
}

double RayTracer::interpolate(const float* planes, double z, double x) const {
    const std::size_t nz = pot_.nz(), nx = pot_.nx();
    const double sz = (z - pot_.z0()) / pot_.dz();
    const double sx = wrap_position(x, window_) / pot_.dx();
    const long iz = static_cast<long>(std::floor(sz));
    const long ix = static_cast<long>(std::floor(sx));
    const double tz = sz - static_cast<double>(iz);
    const double tx = sx - static_cast<double>(ix);

    double col[4];
    for (int a = -1; a <= 2; ++a) {
        const std::size_t jz =
            static_cast<std::size_t>(((iz + a) % static_cast<long>(nz) + static_cast<long>(nz)) %
                                     static_cast<long>(nz));
        const float* row = planes + jz * nx;
        double p[4];
        for (int b = -1; b <= 2; ++b) {
            const std::size_t jx = static_cast<std::size_t>(
                ((ix + b) % static_cast<long>(nx) + static_cast<long>(nx)) %
                static_cast<long>(nx));
            p[b + 1] = row[jx];
        }
        col[a + 1] = catmull_rom(p[0], p[1], p[2], p[3], tx);
    }
    return catmull_rom(col[0], col[1], col[2], col[3], tz);
}

double RayTracer::gradient(double z, double x) const { return interpolate(grad_.data(), z, x); }

double RayTracer::potential(double z, double x) const {
    return interpolate(pot_.values().data(), z, x);
}

void RayTracer::advance(RayBundle& bundle, double z_target, double dz) const {
    if (dz == 0.0) throw ConfigError("RayTracer::advance: dz must be nonzero");
    if ((z_target - bundle.z) * dz < 0.0)
        throw ConfigError("RayTracer::advance: dz sign does not reach z_target");
    const double a2 = 2.0 * alpha_;
    const long steps = std::lround((z_target - bundle.z) / dz);
    if (std::abs(bundle.z + static_cast<double>(steps) * dz - z_target) >
        1e-9 * std::max(1.0, std::abs(z_target)))
        throw ConfigError("RayTracer::advance: z_target is not a multiple of dz");
    double z = bundle.z;
    for (long s = 0; s < steps; ++s) {
        const double z_mid = z + dz / 2.0;
        for (auto& r : bundle.rays) {
            const double x_half = r.X + a2 * r.K * (dz / 2.0);
            const double k_new = r.K - gradient(z_mid, x_half) * dz;
            r.X = x_half + a2 * k_new * (dz / 2.0);
            r.K = k_new;
        }
        z += dz;
    }
    bundle.z = z_target;
}

std::vector<RaySnapshot> trace_rays(const RayBundle& initial, const PotentialField& potential,
                                    const MediumCorrelation& medium, double alpha, double z_max,
                                    double dz, std::span<const double> snapshot_z) {
    if (initial.rays.empty()) throw ConfigError("trace_rays: empty bundle");
    if (!(dz > 0.0) || dz > medium.ell_c() / 10.0)
        throw ConfigError("trace_rays: need 0 < dz <= ell_c / 10 (gradient resolution)");
    if (z_max > potential.z_extent() + 1e-9)
        throw ConfigError("trace_rays: potential does not cover [0, z_max]");
    std::vector<double> events(snapshot_z.begin(), snapshot_z.end());
    std::sort(events.begin(), events.end());
    for (double e : events) {
        if (e < 0.0 || e > z_max + 1e-9) throw ConfigError("trace_rays: snapshot z out of range");
        const double m = e / dz;
        if (std::abs(m - std::round(m)) > 1e-9)
            throw ConfigError("trace_rays: snapshot z must be a multiple of dz");
    }

    RayTracer tracer(potential, alpha);
    RayBundle bundle = initial;
    std::vector<RaySnapshot> out;
    for (double e : events) {
        tracer.advance(bundle, e, dz);
        out.push_back({e, bundle.rays});
    }
    return out;
}

DiffusionMoments diffusion_moments(const RayBundle& bundle, const MediumCorrelation& medium,
                                   double alpha) {
    const std::size_t n = bundle.rays.size();
    if (n < 1000) throw ConfigError("diffusion_moments: need at least 1000 rays");
    DiffusionMoments m;
    m.z = bundle.z;
    m.n = n;
    double sk = 0.0, sx = 0.0;
    for (const auto& r : bundle.rays) {
        sk += r.K - r.k0;
        sx += r.X - r.x0 - 2.0 * alpha * r.k0 * bundle.z;
    }
    m.mean_dK = sk / static_cast<double>(n);
    m.mean_dX = sx / static_cast<double>(n);
    double vk = 0.0, vx = 0.0, cxk = 0.0;
    for (const auto& r : bundle.rays) {
        const double dk = r.K - r.k0 - m.mean_dK;
        const double dx = r.X - r.x0 - 2.0 * alpha * r.k0 * bundle.z - m.mean_dX;
        vk += dk * dk;
        vx += dx * dx;
        cxk += dx * dk;
    }
    const double dof = static_cast<double>(n - 1);
    m.var_K = vk / dof;
    m.var_X = vx / dof;
    m.cov_XK = cxk / dof;
    m.corr_XK = m.cov_XK / std::sqrt(m.var_K * m.var_X);
    m.se_var_K = m.var_K * std::sqrt(2.0 / dof);
    m.se_var_X = m.var_X * std::sqrt(2.0 / dof);
    m.se_corr = (1.0 - m.corr_XK * m.corr_XK) / std::sqrt(static_cast<double>(n) - 3.0);
    const double gamma0 = medium.Gamma(0.0);
    m.var_K_theory = gamma0 * bundle.z;
    m.var_X_theory = 4.0 / 3.0 * alpha * alpha * gamma0 * std::pow(bundle.z, 3);
    m.corr_theory = std::sqrt(3.0) / 2.0;
    return m;
}

double det_jacobian_fd(const RayTracer& tracer, double x, double k, double h_x, double h_k,
                       double z_max, double dz) {
    RayBundle b;
    b.rays = {{x + h_x, k, x + h_x, k},
              {x - h_x, k, x - h_x, k},
              {x, k + h_k, x, k + h_k},
              {x, k - h_k, x, k - h_k}};
    tracer.advance(b, z_max, dz);
    const auto& r = b.rays;
    const double dX_dx = (r[0].X - r[1].X) / (2.0 * h_x);
    const double dK_dx = (r[0].K - r[1].K) / (2.0 * h_x);
    const double dX_dk = (r[2].X - r[3].X) / (2.0 * h_k);
    const double dK_dk = (r[2].K - r[3].K) / (2.0 * h_k);
    return dX_dx * dK_dk - dX_dk * dK_dx;
}

PhaseSpaceHistogram wigner_histogram(const RayBundle& bundle, const SourceCoherence& source,
                                     std::size_t nx_bins, std::size_t nk_bins, double window,
                                     double k_lo, double k_hi, double label_dx, double label_dk) {
    if (nx_bins == 0 || nk_bins == 0) throw ConfigError("wigner_histogram: empty bins");
    if (!(k_hi > k_lo)) throw ConfigError("wigner_histogram: bad k range");
    PhaseSpaceHistogram h;
    h.nx = nx_bins;
    h.nk = nk_bins;
    h.x_lo = 0.0;
    h.x_hi = window;
    h.k_lo = k_lo;
    h.k_hi = k_hi;
    h.density.assign(nx_bins * nk_bins, 0.0);
    const double bin_area = h.bin_dx() * h.bin_dk();
    double k_label_min = 1e300, k_label_max = -1e300;
    for (const auto& r : bundle.rays) {
        k_label_min = std::min(k_label_min, r.k0);
        k_label_max = std::max(k_label_max, r.k0);
        const double w = source.wigner_weight(r.k0) * label_dx * label_dk / bin_area;
        const double xw = wrap_position(r.X, window);
        const auto ix = static_cast<std::size_t>(xw / h.bin_dx());
        if (r.K < k_lo || r.K >= k_hi) {
            h.out_of_range_weight += w * bin_area;
            continue;
        }
        const auto ik = static_cast<std::size_t>((r.K - k_lo) / h.bin_dk());
        h.density[std::min(ix, nx_bins - 1) * nk_bins + std::min(ik, nk_bins - 1)] += w;
        h.total_weight += w * bin_area;
    }
    // Mass of W_o outside the label coverage, for the Gaussian Schell model:
    // fraction erfc(k_span rho_o) per tail.
    const double rho = source.rho_o();
    const double tail = 0.5 * (std::erfc(k_label_max * rho) + std::erfc(-k_label_min * rho));
    h.coverage_warning = tail > 0.01;
    return h;
}

} // namespace bflow
