#include "bflow/correlation.hpp"

#include "bflow/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace bflow {

namespace {
const double kSqrtPi = std::sqrt(M_PI);
}

// ============================================================================
// TabulatedProfile
// ============================================================================

void TabulatedProfile::validate() const {
    if (value.size() < 4) throw ConfigError("tabulated profile needs at least 4 samples");
    if (d1.size() != value.size() || d2.size() != value.size())
        throw ConfigError("tabulated profile: value/d1/d2 size mismatch");
    if (!(dx > 0.0)) throw ConfigError("tabulated profile: dx must be positive");
}

double TabulatedProfile::eval(double x) const {
    x = std::abs(x);
    const double s = x / dx;
    const auto i = static_cast<std::size_t>(s);
    if (i + 1 >= value.size())
        throw std::out_of_range("tabulated profile queried outside its support");
    const double t = s - static_cast<double>(i);
    // Cubic Hermite on [x_i, x_{i+1}] using the supplied derivatives.
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    const double h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t);
    const double h11 = t * t * (t - 1);
    return h00 * value[i] + h10 * dx * d1[i] + h01 * value[i + 1] + h11 * dx * d1[i + 1];
}

double TabulatedProfile::eval_d2(double x) const {
    x = std::abs(x);
    const double s = x / dx;
    const auto i = static_cast<std::size_t>(s);
    if (i + 1 >= d2.size())
        throw std::out_of_range("tabulated profile queried outside its support");
    const double t = s - static_cast<double>(i);
    return (1 - t) * d2[i] + t * d2[i + 1];
}

// ============================================================================
// MediumCorrelation
// ============================================================================

MediumCorrelation MediumCorrelation::gaussian(double sigma2, double ell_c) {
    if (!(sigma2 > 0.0)) throw ConfigError("medium: sigma2 must be positive");
    if (!(ell_c > 0.0)) throw ConfigError("medium: ell_c must be positive");
    MediumCorrelation m;
    m.sigma2_ = sigma2;
    m.ell_c_ = ell_c;
    m.kind_ = MediumKind::gaussian;
    return m;
}

MediumCorrelation MediumCorrelation::tabulated(double sigma2, double ell_c,
                                               TabulatedProfile profile) {
    profile.validate();
    MediumCorrelation m = gaussian(sigma2, ell_c);
    m.kind_ = MediumKind::tabulated;
    m.profile_ = std::move(profile);
    return m;
}

MediumCorrelation MediumCorrelation::gaussian_si(double sigma2_si, double ell_c_si,
                                                 double lambda_si) {
    if (!(lambda_si > 0.0)) throw ConfigError("medium: lambda must be positive");
    return gaussian(sigma2_si * lambda_si * lambda_si, ell_c_si / lambda_si);
}

double MediumCorrelation::gamma_tilde(double x_tilde) const {
    if (kind_ == MediumKind::gaussian) return kSqrtPi * std::exp(-x_tilde * x_tilde);
    return profile_->eval(x_tilde);
}

double MediumCorrelation::Gamma_tilde(double x_tilde) const {
    if (kind_ == MediumKind::gaussian) {
        const double x2 = x_tilde * x_tilde;
        return 2.0 * kSqrtPi * (1.0 - 2.0 * x2) * std::exp(-x2);
    }
    return -profile_->eval_d2(x_tilde);
}

double MediumCorrelation::U_tilde(double x_tilde, double y_tilde) const {
    if (x_tilde == 0.0 || y_tilde == 0.0) return 0.0; // exact cancellation on the axes
    return 2.0 * gamma_tilde(x_tilde) + 2.0 * gamma_tilde(y_tilde) -
           gamma_tilde(x_tilde + y_tilde) - gamma_tilde(x_tilde - y_tilde) -
           2.0 * gamma_tilde(0.0);
}

double MediumCorrelation::gamma4_tilde() const {
    if (kind_ == MediumKind::gaussian) return 12.0 * kSqrtPi;
    return profile_->fourth_deriv_at_zero;
}

double MediumCorrelation::covariance(double z, double x) const {
    if (kind_ != MediumKind::gaussian)
        throw ConfigError("covariance: only the Gaussian medium has a closed-form covariance");
    return sigma2_ * std::exp(-(x * x + z * z) / (ell_c_ * ell_c_));
}

// ============================================================================
// SourceCoherence
// ============================================================================

SourceCoherence SourceCoherence::plane_wave() {
    SourceCoherence s;
    s.kind_ = SourceKind::plane_wave;
    return s;
}

SourceCoherence SourceCoherence::gaussian_schell(double rho_o) {
    if (!(rho_o > 0.0)) throw ConfigError("source: rho_o must be positive");
    SourceCoherence s;
    s.kind_ = SourceKind::gaussian_schell;
    s.rho_o_ = rho_o;
    return s;
}

SourceCoherence SourceCoherence::tabulated(double rho_o, TabulatedProfile c_tilde) {
    c_tilde.validate();
    if (std::abs(c_tilde.value[0] - 1.0) > 1e-12)
        throw ConfigError("source: tabulated C_tilde_o must be normalized to C(0) = 1");
    SourceCoherence s = gaussian_schell(rho_o);
    s.kind_ = SourceKind::tabulated;
    s.c_tilde_ = std::move(c_tilde);
    return s;
}

double SourceCoherence::rho_o() const {
    if (kind_ == SourceKind::plane_wave)
        throw ConfigError("source: plane wave has no coherence radius");
    return rho_o_;
}

double SourceCoherence::c_tilde_o(double y_tilde) const {
    switch (kind_) {
    case SourceKind::plane_wave:
        return 1.0;
    case SourceKind::gaussian_schell:
        return std::exp(-y_tilde * y_tilde / 4.0);
    case SourceKind::tabulated:
        return c_tilde_->eval(y_tilde);
    }
    return 1.0;
}

double SourceCoherence::pi_tilde_o(double y_tilde) const {
    if (kind_ == SourceKind::plane_wave)
        throw ConfigError("pi_tilde_o: plane-wave source has no coherence profile");
    const double c = c_tilde_o(y_tilde);
    return c * c; // C_tilde_o(0) = 1 by normalization
}

double SourceCoherence::wigner_weight(double k) const {
    if (kind_ == SourceKind::plane_wave)
        throw ConfigError("wigner_weight: plane-wave source has a singular Wigner weight");
    if (kind_ == SourceKind::tabulated)
        throw ConfigError("wigner_weight: tabulated sources are not supported here");
    const double kr = k * rho_o_;
    return 2.0 * kSqrtPi * rho_o_ * std::exp(-kr * kr);
}

// ============================================================================
// Derived scales
// ============================================================================

double alpha_lambda(double n_o) {
    if (!(n_o > 0.0)) throw ConfigError("alpha_lambda: n_o must be positive");
    return 1.0 / (4.0 * M_PI * n_o);
}

DerivedScales derived_scales(const MediumCorrelation& medium, const SourceCoherence& source,
                             double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("derived_scales: alpha must be positive");
    DerivedScales d;
    d.alpha = alpha;
    d.ell_c = medium.ell_c();
    d.rho_o = source.is_speckle() ? source.rho_o() : 0.0;
    const double sig23 = std::cbrt(medium.sigma2());
    const double a13 = std::cbrt(alpha);
    d.X_c = sig23 * medium.ell_c() / a13;
    // X_o computed through X_c so that X_c / X_o = ell_c / rho_o holds exactly.
    d.X_o = source.is_speckle() ? d.X_c * source.rho_o() / medium.ell_c() : 0.0;
    d.z_c = medium.ell_c() / (2.0 * sig23 * a13 * a13);
    d.gamma2 = medium.Gamma(0.0);
    d.gamma4_tilde = medium.gamma4_tilde();
    return d;
}

} // namespace bflow
