#pragma once

#include "bflow/correlation.hpp"
#include "bflow/paraxial.hpp"
#include "bflow/random_fields.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bflow {

enum class Regime { plane, c, pc };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Full specification of one Monte Carlo experiment. All lengths in lambda
/// units. The output schedule is snapped to the step lattice internally.
struct ExperimentPlan {
    MediumCorrelation medium = MediumCorrelation::gaussian(1e-4, 25.0);
    SourceCoherence source = SourceCoherence::plane_wave();
    double alpha = 1.0 / (6.0 * M_PI); // alpha_lambda(1.5)
    Regime regime = Regime::plane;
    std::size_t n_medium = 100;
    std::size_t m_source = 1; ///< inner speckles per medium (pc only, >= 2)
    std::vector<double> z_out;
    double dx = 0.5;
    double window_over_ell_c = 40.0;
    double dz = 0.0;              ///< 0 = min(ell_c / 8, 2)
    double corr_x_max = 0.0;      ///< 0 = 3 ell_c
    double fieldcorr_y_max = 0.0; ///< 0 = 2 ell_c
    bool full_lag_curves = false; ///< keep every lag (conservation checks)
    bool keep_per_realization = false;
    std::uint64_t root_seed = 1;
    int workers = 0; ///< 0 = hardware concurrency
    double max_drop_fraction = 0.01;
};

/// Reduced per-realization statistics (window averages only). These are what
/// workers produce and what the ordered merge consumes.
struct RealizationStats {
    bool ok = true;
    std::string message;
    std::vector<double> m;      ///< [iz] window mean of the measured intensity
    std::vector<double> a;      ///< [iz] window mean of Ibar^2 (bias-corrected for pc)
    std::vector<double> a_plug; ///< [iz] plug-in variant (== a except pc)
    std::vector<std::vector<double>> lag;               ///< [iz][ilag]
    std::vector<std::vector<std::complex<double>>> fcorr; ///< [iz][iy]
    std::vector<double> m_s0, a_s0; ///< first-speckle subsample (pc identity checks)
};

/// Streaming sums over realizations; merging is associative and the engine
/// always folds in realization-index order, so results are independent of
/// how work was chunked across workers.
struct Accumulator {
    std::size_t count = 0;
    std::size_t nz = 0, nlag = 0, ny = 0;
    std::vector<double> sum_a, sum_aa, sum_ap, sum_app;
    std::vector<double> sum_m, sum_m2, sum_m4, sum_am2, sum_apm2;
    std::vector<double> sum_c, sum_cc, sum_cm2;       ///< [iz * nlag + il]
    std::vector<double> sum_fre, sum_fim, sum_frere, sum_imim, sum_reim; ///< [iz * ny + iy]
    std::vector<double> sum_ms0, sum_as0, sum_as0as0, sum_ms0sq;

    static Accumulator shaped(std::size_t nz, std::size_t nlag, std::size_t ny);
    static Accumulator from_realization(const RealizationStats& r);
    void merge(const Accumulator& other);
};

struct SCurvePoint {
    double z = 0.0;
    double z_over_zc = 0.0;
    double S = 0.0;
    double se = 0.0;
    double S_plugin = 0.0; ///< == S except pc
    std::size_t n = 0;
};

struct LagCurve {
    double z = 0.0;
    double z_over_zc = 0.0;
    std::vector<double> x; ///< lag in lambda units
    std::vector<double> C;
    std::vector<double> se;
    std::size_t n = 0;
    bool full = false;              ///< all window lags were kept
    double discrete_integral = 0.0; ///< sum C dx over the window (full only)
};

struct FieldCorrCurve {
    double z = 0.0;
    double z_over_zc = 0.0;
    std::vector<double> y;
    std::vector<double> re, im, abs, se; ///< se is the modulus standard error
    std::vector<double> se_re, se_im;    ///< per-component standard errors
    std::size_t n = 0;
};

struct EnsembleResult {
    ExperimentPlan plan;
    DerivedScales scales;
    TransverseGrid grid;
    double dz = 0.0;
    std::vector<SCurvePoint> s_curve;
    std::vector<LagCurve> corr;
    std::vector<FieldCorrCurve> fieldcorr;
    std::size_t dropped = 0;
    std::vector<std::string> drop_log;
    std::string version;
    double wall_seconds = 0.0;
    std::vector<RealizationStats> per_realization; ///< only if requested
};

/// The snapped output schedule and step a plan will actually use; theory
/// runs evaluate their curves at exactly these z values.
struct ResolvedSchedule {
    double dz = 0.0;
    std::vector<double> z;
};
ResolvedSchedule resolve_schedule(const ExperimentPlan& plan);

/// Runs the experiment: n_medium independent media (times m_source speckles
/// for pc), deterministic for a fixed (plan, seed) at any worker count.
EnsembleResult run_experiment(const ExperimentPlan& plan);

/// Intensity map of a single realization (realization id `stream`): rows are
/// the scheduled z, columns the transverse grid. For figure-style dumps.
std::vector<std::vector<double>> intensity_map(const ExperimentPlan& plan, std::uint32_t stream);

} // namespace bflow
