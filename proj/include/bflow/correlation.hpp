#pragma once

#include <optional>
#include <vector>

namespace bflow {

/// Dimensionless even profile sampled on a uniform grid [0, x_max], with
/// analytically supplied first and second derivatives. The second derivative
/// must stay smooth because it feeds the damping coefficient of the moment
/// equations; numerical differentiation of a table would ruin that.
struct TabulatedProfile {
    std::vector<double> value;   ///< f(i * dx), i = 0..n-1
    std::vector<double> d1;      ///< f'(i * dx)
    std::vector<double> d2;      ///< f''(i * dx)
    double dx = 0.0;
    double fourth_deriv_at_zero = 0.0;

    double x_max() const { return dx * static_cast<double>(value.size() - 1); }

    /// Cubic Hermite evaluation of f at |x|; throws std::out_of_range beyond x_max.
    double eval(double x) const;
    /// Piecewise-linear evaluation of f'' at |x|.
    double eval_d2(double x) const;

    void validate() const;
};

enum class MediumKind { gaussian, tabulated };

/// Statistical model of the random potential: variance sigma^2 (1/length^2),
/// correlation radius ell_c, and the integrated-correlation profile
/// gamma(x) = sigma^2 * ell_c * gamma_tilde(x / ell_c).
///
/// All lengths are lambda-normalized internally; from_si converts.
class MediumCorrelation {
public:
    static MediumCorrelation gaussian(double sigma2, double ell_c);
    static MediumCorrelation tabulated(double sigma2, double ell_c, TabulatedProfile profile);

    /// SI inputs: sigma2 in 1/m^2, lengths in meters, lambda in meters.
    static MediumCorrelation gaussian_si(double sigma2_si, double ell_c_si, double lambda_si);

    double sigma2() const { return sigma2_; }
    double ell_c() const { return ell_c_; }
    MediumKind kind() const { return kind_; }

    /// Dimensionless integrated correlation profile; sqrt(pi) exp(-x^2) for the
    /// Gaussian model.
    double gamma_tilde(double x_tilde) const;

    /// Gamma_tilde = -gamma_tilde''; 2 sqrt(pi) (1 - 2 x^2) exp(-x^2) for the
    /// Gaussian model.
    double Gamma_tilde(double x_tilde) const;

    /// Two-point coupling kernel of the plane-wave fourth-moment equation:
    /// 2 g(x) + 2 g(y) - g(x+y) - g(x-y) - 2 g(0), g = gamma_tilde.
    /// Exactly zero on both axes; symmetric in x <-> y and under sign flips.
    double U_tilde(double x_tilde, double y_tilde) const;

    /// Physical integrated correlation gamma(x) = sigma^2 ell_c gamma_tilde(x/ell_c).
    double gamma(double x) const { return sigma2_ * ell_c_ * gamma_tilde(x / ell_c_); }

    /// Gamma(x) = -gamma''(x) = (sigma^2/ell_c) Gamma_tilde(x/ell_c).
    double Gamma(double x) const { return sigma2_ / ell_c_ * Gamma_tilde(x / ell_c_); }

    /// Fourth derivative of gamma_tilde at zero (12 sqrt(pi) for Gaussian).
    double gamma4_tilde() const;

    /// Covariance of the potential at lag (z, x): sigma^2 exp(-(x^2+z^2)/ell_c^2)
    /// for the Gaussian model. Tabulated media only support the synthesis spectrum
    /// of the Gaussian family, so this is Gaussian-only; see synthesize_potential.
    double covariance(double z, double x) const;

private:
    MediumCorrelation() = default;

    double sigma2_ = 0.0;
    double ell_c_ = 0.0;
    MediumKind kind_ = MediumKind::gaussian;
    std::optional<TabulatedProfile> profile_;
};

enum class SourceKind { plane_wave, gaussian_schell, tabulated };

/// Coherence model of the initial field. For speckle kinds the complex field
/// correlation is C_o(y) = C_tilde_o(y / rho_o), normalized so C_tilde_o(0) = 1.
class SourceCoherence {
public:
    static SourceCoherence plane_wave();
    static SourceCoherence gaussian_schell(double rho_o);
    static SourceCoherence tabulated(double rho_o, TabulatedProfile c_tilde);

    SourceKind kind() const { return kind_; }
    bool is_speckle() const { return kind_ != SourceKind::plane_wave; }
    double rho_o() const;

    /// C_tilde_o(y_tilde); exp(-y^2/4) for the Gaussian Schell model.
    double c_tilde_o(double y_tilde) const;

    /// Intensity coherence profile |C_tilde_o|^2 / C_tilde_o(0)^2.
    /// Throws ConfigError for a plane-wave source (no coherence profile).
    double pi_tilde_o(double y_tilde) const;

    /// Wigner weight W_o(k) = FT[C_o](k); 2 sqrt(pi) rho_o exp(-k^2 rho_o^2)
    /// for the Gaussian Schell model (Gaussian-only, used by synthesis and rays).
    double wigner_weight(double k) const;

private:
    SourceCoherence() = default;

    SourceKind kind_ = SourceKind::plane_wave;
    double rho_o_ = 0.0;
    std::optional<TabulatedProfile> c_tilde_;
};

/// The dimensionless parameters and length scales controlling branched-flow
/// statistics.
struct DerivedScales {
    double alpha = 0.0;        ///< paraxial coefficient, 1/(2 k_o n_o) (length)
    double ell_c = 0.0;        ///< medium correlation radius (length)
    double rho_o = 0.0;        ///< source correlation radius; 0 for plane sources
    double X_c = 0.0;          ///< sigma^{2/3} ell_c / alpha^{1/3}
    double X_o = 0.0;          ///< sigma^{2/3} rho_o / alpha^{1/3}; 0 for plane sources
    double z_c = 0.0;          ///< ell_c / (2 sigma^{2/3} alpha^{2/3})
    double gamma2 = 0.0;       ///< -gamma''(0) = Gamma(0) (1/length^3)
    double gamma4_tilde = 0.0; ///< fourth derivative of gamma_tilde at 0
};

/// alpha in lambda units for a background index n_o: 1/(4 pi n_o).
double alpha_lambda(double n_o);

DerivedScales derived_scales(const MediumCorrelation& medium, const SourceCoherence& source,
                             double alpha);

} // namespace bflow
