#pragma once

#include "bflow/ensemble.hpp"
#include "bflow/moments.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bflow {

/// Parsed and validated configuration. Sectioned key = value text format;
/// unknown sections or keys are rejected. All defaults follow the reference
/// simulation normalization (alpha' = 1/(4 pi n_o), dx' = 1/2, window 40 ell_c).
struct Config {
    // [medium]
    std::string medium_kind = "gaussian";
    double sigma2_lambda2 = 1e-4;
    double ell_c_over_lambda = 25.0;
    // [source]
    std::string source_kind = "plane"; ///< plane | speckle
    double rho_o_over_lambda = 10.0;
    // [run]
    Regime regime = Regime::plane;
    std::size_t n_medium = 200;
    std::size_t m_source = 1;
    double z_max_over_zc = 4.0;
    std::size_t n_outputs = 17;
    std::uint64_t seed = 1;
    int workers = 0;
    bool dump_intensity = false;
    bool full_lag_curves = false;
    double corr_x_max_over_lc = 3.0;
    double fieldcorr_y_max_over_lc = 2.0;
    // [grid]
    double dx = 0.5;
    double window_over_ell_c = 40.0;
    double dz = 0.0; ///< 0 = min(ell_c/8, 2)
    double n_o = 1.5;
    // [solver]
    std::size_t solver_nx = 256, solver_ny = 256;
    double solver_Lx = 16.0, solver_Ly = 16.0;
    double solver_dz_min = 1e-3, solver_dz_max = 1e-2;
    double boundary_tol = 1e-3;
    // [rays]
    std::size_t rays_n_media = 25;
    std::size_t rays_n_x = 100;
    std::size_t rays_n_k = 40;
    double rays_k_span = 0.45;
    double rays_dz_over_ell_c = 0.05;
    std::size_t rays_hist_nx = 64, rays_hist_nk = 64;
    double rays_hist_k_span = 0.6;

    double alpha() const;
    MediumCorrelation medium() const;
    SourceCoherence source() const;
    DerivedScales scales() const;
    ExperimentPlan plan() const;
    MomentGrid moment_grid() const;
    StepControl step_control() const;
};

Config parse_config_text(const std::string& text);
Config parse_config_file(const std::filesystem::path& path);

/// Canonical re-parsable text form (embedded in manifests).
std::string config_to_text(const Config& cfg);

/// Named presets reproducing the reference figure protocols; realization
/// counts are scaled by `scale` (1.0 = full scale). Some presets expand to
/// more than one run (returned as (suffix, config) pairs).
std::vector<std::pair<std::string, Config>> expand_preset(const std::string& name, double scale);
std::vector<std::string> preset_names();

/// Comparison of two scintillation CSVs on a shared z grid.
struct CompareReport {
    std::size_t n_points = 0;
    double max_sigma = 0.0;    ///< max |dS| in combined-sigma units
    double max_abs_diff = 0.0;
    double at_z = 0.0;         ///< z_over_zc of the worst point
    bool pass = false;
};

CompareReport compare_s_curves(const std::filesystem::path& a, const std::filesystem::path& b,
                               double sigma_multiple);

} // namespace bflow
