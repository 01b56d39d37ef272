#include "bflow/config.hpp"
#include "bflow/errors.hpp"
#include "bflow/io.hpp"
#include "bflow/rays.hpp"
#include "bflow/version.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace bflow;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = -1;
};

Config load_config(const CommonOpts& o) {
    Config cfg;
    if (!o.config_path.empty()) {
        // manifests embed their config text; accept them directly
        if (o.config_path.size() > 5 && o.config_path.substr(o.config_path.size() - 5) == ".json")
            cfg = parse_config_text(io::manifest_config_text(o.config_path));
        else
            cfg = parse_config_file(o.config_path);
    }
    if (o.seed_set) cfg.seed = o.seed;
    if (o.workers >= 0) cfg.workers = o.workers;
    return cfg;
}

int cmd_theory(const CommonOpts& o) {
    const Config cfg = load_config(o);
    const auto scales = cfg.scales();
    const auto plan = cfg.plan();
    const auto sched = resolve_schedule(plan);
    std::vector<double> z_tilde;
    for (double z : sched.z) z_tilde.push_back(z / scales.z_c);

    MomentSolveOptions opts;
    opts.snapshot_z = z_tilde;
    opts.boundary_tol = cfg.boundary_tol;
    const double z_max = z_tilde.back();

    if (cfg.regime == Regime::plane) {
        const auto sol = solve_coherent_D(cfg.medium(), scales.X_c, cfg.moment_grid(), z_max,
                                          cfg.step_control(), opts);
        if (!sol.boundary_ok)
            std::fprintf(stderr, "warning: %s\n", sol.boundary_note.c_str());
        io::persist_theory(sol, ScintRegime::plane, scales, z_tilde, plan.corr_x_max, o.out_dir,
                           config_to_text(cfg));
    } else {
        opts.diag_slope = scales.X_c; // sloped slice for the two-scale correlation
        const auto sol = solve_incoherent_Pi(cfg.medium(), cfg.source(), scales.X_o,
                                             cfg.moment_grid(), z_max, cfg.step_control(), opts);
        if (!sol.boundary_ok)
            std::fprintf(stderr, "warning: %s\n", sol.boundary_note.c_str());
        io::persist_theory(sol, cfg.regime == Regime::c ? ScintRegime::c : ScintRegime::pc,
                           scales, z_tilde, plan.corr_x_max, o.out_dir, config_to_text(cfg));
    }
    std::printf("theory curves written to %s\n", o.out_dir.c_str());
    return 0;
}

int cmd_simulate(const CommonOpts& o, double scale, bool dump_intensity) {
    Config cfg = load_config(o);
    if (scale != 1.0) {
        cfg.n_medium = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::lround(static_cast<double>(cfg.n_medium) * scale)));
        if (cfg.regime == Regime::pc)
            cfg.m_source = std::max<std::size_t>(
                2,
                static_cast<std::size_t>(std::lround(static_cast<double>(cfg.m_source) * scale)));
    }
    const auto res = run_experiment(cfg.plan());
    const auto manifest = io::persist(res, o.out_dir, config_to_text(cfg));
    if (cfg.dump_intensity || dump_intensity) {
        const auto map = intensity_map(cfg.plan(), 0);
        std::vector<double> flat;
        flat.reserve(map.size() * map[0].size());
        for (const auto& row : map) flat.insert(flat.end(), row.begin(), row.end());
        char extra[256];
        std::snprintf(extra, sizeof(extra), "{\"dx\": %.17g, \"z_values\": %zu, \"dz\": %.17g}",
                      res.grid.dx, map.size(), res.dz);
        io::dump_binary(fs::path(o.out_dir) / "intensity_map", flat, map.size(), map[0].size(),
                        extra);
    }
    std::printf("simulation outputs written to %s (manifest %s, %zu dropped)\n",
                o.out_dir.c_str(), manifest.string().c_str(), res.dropped);
    return 0;
}

int cmd_rays(const CommonOpts& o) {
    const Config cfg = load_config(o);
    const auto scales = cfg.scales();
    const auto medium = cfg.medium();
    const double lc = medium.ell_c();
    const double dz = cfg.rays_dz_over_ell_c * lc;
    const double window = cfg.window_over_ell_c * lc;

    // snap the schedule to the ray step lattice
    std::vector<double> z_out;
    for (std::size_t i = 1; i <= cfg.n_outputs; ++i) {
        const double z = cfg.z_max_over_zc * scales.z_c * static_cast<double>(i) /
                         static_cast<double>(cfg.n_outputs);
        z_out.push_back(std::round(z / dz) * dz);
    }
    z_out.erase(std::unique(z_out.begin(), z_out.end()), z_out.end());
    const double z_max = z_out.back();

    GridSpec2D pg;
    pg.dx = lc / 8.0;
    pg.nx = static_cast<std::size_t>(std::lround(window / pg.dx));
    pg.dz = lc / 8.0;
    pg.nz = static_cast<std::size_t>(std::ceil(z_max / pg.dz)) + 4;

    const std::size_t n_media = cfg.rays_n_media;
    std::vector<std::vector<DiffusionMoments>> mom(n_media);
    std::vector<double> dets(n_media);
    std::vector<PhaseSpaceHistogram> hist;
    for (std::size_t m = 0; m < n_media; ++m) {
        const auto pot =
            synthesize_potential(pg, medium, RngStream(cfg.seed, static_cast<std::uint32_t>(m), 0));
        auto bundle = uniform_label_bundle(cfg.rays_n_x, cfg.rays_n_k, window, cfg.rays_k_span);
        const auto snaps = trace_rays(bundle, pot, medium, cfg.alpha(), z_max, dz, z_out);
        for (std::size_t i = 0; i < snaps.size(); ++i) {
            RayBundle b{snaps[i].rays, snaps[i].z};
            const auto dm = diffusion_moments(b, medium, cfg.alpha());
            mom[m].push_back(dm);
            if (cfg.source_kind == "speckle") {
                const auto h = wigner_histogram(
                    b, cfg.source(), cfg.rays_hist_nx, cfg.rays_hist_nk, window,
                    -cfg.rays_hist_k_span, cfg.rays_hist_k_span,
                    window / static_cast<double>(cfg.rays_n_x),
                    2.0 * cfg.rays_k_span / static_cast<double>(cfg.rays_n_k - 1));
                if (m == 0)
                    hist.push_back(h);
                else
                    for (std::size_t q = 0; q < h.density.size(); ++q)
                        hist[i].density[q] += h.density[q];
            }
        }
        RayTracer tracer(pot, cfg.alpha());
        dets[m] = det_jacobian_fd(tracer, window / 2.0, 0.0, 1e-4, 1e-6, z_max, dz);
    }

    io::Csv csv;
    csv.header = {"z",          "z_over_zc",  "n_media",   "var_K",      "var_K_se",
                  "var_K_theory", "var_X",    "var_X_se",  "var_X_theory", "corr_XK",
                  "corr_se",    "corr_theory"};
    csv.columns.resize(csv.header.size());
    for (std::size_t i = 0; i < z_out.size(); ++i) {
        double vk = 0, vx = 0, cr = 0;
        for (std::size_t m = 0; m < n_media; ++m) {
            vk += mom[m][i].var_K;
            vx += mom[m][i].var_X;
            cr += mom[m][i].corr_XK;
        }
        const auto nm = static_cast<double>(n_media);
        vk /= nm;
        vx /= nm;
        cr /= nm;
        double svk = 0, svx = 0, scr = 0;
        for (std::size_t m = 0; m < n_media; ++m) {
            svk += (mom[m][i].var_K - vk) * (mom[m][i].var_K - vk);
            svx += (mom[m][i].var_X - vx) * (mom[m][i].var_X - vx);
            scr += (mom[m][i].corr_XK - cr) * (mom[m][i].corr_XK - cr);
        }
        const double den = nm * (nm - 1.0);
        csv.columns[0].push_back(z_out[i]);
        csv.columns[1].push_back(z_out[i] / scales.z_c);
        csv.columns[2].push_back(nm);
        csv.columns[3].push_back(vk);
        csv.columns[4].push_back(std::sqrt(svk / den));
        csv.columns[5].push_back(mom[0][i].var_K_theory);
        csv.columns[6].push_back(vx);
        csv.columns[7].push_back(std::sqrt(svx / den));
        csv.columns[8].push_back(mom[0][i].var_X_theory);
        csv.columns[9].push_back(cr);
        csv.columns[10].push_back(std::sqrt(scr / den));
        csv.columns[11].push_back(mom[0][i].corr_theory);
    }
    fs::create_directories(o.out_dir);
    io::write_csv(fs::path(o.out_dir) / "rays_moments.csv", csv);

    io::Csv dj;
    dj.header = {"medium", "det_jacobian"};
    dj.columns.resize(2);
    for (std::size_t m = 0; m < n_media; ++m) {
        dj.columns[0].push_back(static_cast<double>(m));
        dj.columns[1].push_back(dets[m]);
    }
    io::write_csv(fs::path(o.out_dir) / "rays_detj.csv", dj);

    for (std::size_t i = 0; i < hist.size(); ++i) {
        auto& h = hist[i];
        for (auto& v : h.density) v /= static_cast<double>(n_media);
        char extra[256];
        std::snprintf(extra, sizeof(extra),
                      "{\"z\": %.17g, \"x_lo\": %.17g, \"x_hi\": %.17g, \"k_lo\": %.17g, "
                      "\"k_hi\": %.17g}",
                      z_out[i], h.x_lo, h.x_hi, h.k_lo, h.k_hi);
        char name[64];
        std::snprintf(name, sizeof(name), "wigner_z%.4f", z_out[i] / scales.z_c);
        io::dump_binary(fs::path(o.out_dir) / name, h.density, h.nx, h.nk, extra);
    }
    std::printf("ray outputs written to %s\n", o.out_dir.c_str());
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, double sigma) {
    const auto rep = compare_s_curves(a, b, sigma);
    std::printf("compared %zu points: max |dS| = %.6g at z/z_c = %.4f (%.3f sigma) -> %s\n",
                rep.n_points, rep.max_abs_diff, rep.at_z, rep.max_sigma,
                rep.pass ? "PASS" : "FAIL");
    return rep.pass ? 0 : 3;
}

int cmd_preset(const std::string& name, double scale, const std::string& out_dir) {
    const auto configs = expand_preset(name, scale);
    if (out_dir.empty()) {
        for (const auto& [suffix, cfg] : configs) {
            if (!suffix.empty()) std::printf("# --- %s (%s) ---\n", name.c_str(), suffix.c_str());
            std::fputs(config_to_text(cfg).c_str(), stdout);
        }
        return 0;
    }
    fs::create_directories(out_dir);
    for (const auto& [suffix, cfg] : configs) {
        const std::string fname = name + (suffix.empty() ? "" : "_" + suffix) + ".ini";
        std::ofstream out(fs::path(out_dir) / fname);
        out << config_to_text(cfg);
        std::printf("wrote %s\n", (fs::path(out_dir) / fname).string().c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"branchflow: branched-flow wave statistics laboratory"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonOpts common;
    double scale = 1.0;
    double sigma = 3.0;
    bool dump_intensity = false;
    std::string cmp_a, cmp_b, preset_name, preset_out;
    double preset_scale = 0.2;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* copt = sub->add_option("--config", common.config_path,
                                     "configuration file (or a manifest.json)");
        if (needs_config) copt->required();
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--seed", common.seed, "override the root seed")
            ->each([&](const std::string&) { common.seed_set = true; });
        sub->add_option("--workers", common.workers, "worker thread count (0 = hardware)");
    };

    auto* theory = app.add_subcommand("theory", "solve the moment equations");
    add_common(theory, true);

    auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo experiment");
    add_common(simulate, true);
    simulate->add_option("--scale", scale, "scale realization counts");
    simulate->add_flag("--dump-intensity", dump_intensity, "dump one realization's intensity map");

    auto* rays = app.add_subcommand("rays", "trace ray ensembles and diffusion diagnostics");
    add_common(rays, true);

    auto* compare = app.add_subcommand("compare", "compare two scintillation CSVs");
    compare->add_option("curve_a", cmp_a)->required();
    compare->add_option("curve_b", cmp_b)->required();
    compare->add_option("--sigma", sigma, "pass threshold in combined-sigma units");

    auto* preset = app.add_subcommand("preset", "expand a named figure preset to a config");
    preset->add_option("name", preset_name)->required();
    preset->add_option("--scale", preset_scale, "realization-count scale (default 0.2)");
    preset->add_option("--out", preset_out, "directory to write .ini files (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*theory) return cmd_theory(common);
        if (*simulate) return cmd_simulate(common, scale, dump_intensity);
        if (*rays) return cmd_rays(common);
        if (*compare) return cmd_compare(cmp_a, cmp_b, sigma);
        if (*preset) return cmd_preset(preset_name, preset_scale, preset_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
