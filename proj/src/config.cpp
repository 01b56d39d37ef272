#include "bflow/config.hpp"

#include "bflow/errors.hpp"
#include "bflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace bflow {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

using KvMap = std::map<std::string, std::map<std::string, std::string>>;

KvMap parse_sections(const std::string& text) {
    KvMap out;
    std::string section; // "" = top level
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        if (!out[section].emplace(key, value).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
    }
    return out;
}

class SchemaReader {
public:
    explicit SchemaReader(KvMap kv) : kv_(std::move(kv)) {}

    template <typename T, typename Parse>
    void get(const std::string& section, const std::string& key, T& dst, Parse parse) {
        known_[section].insert(key);
        const auto sit = kv_.find(section);
        if (sit == kv_.end()) return;
        const auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return;
        try {
            dst = parse(kit->second);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config: bad value for " + section + "." + key + ": '" +
                              kit->second + "'");
        }
    }

    void get_double(const std::string& s, const std::string& k, double& d) {
        get(s, k, d, [](const std::string& v) { return std::stod(v); });
    }
    void get_size(const std::string& s, const std::string& k, std::size_t& d) {
        get(s, k, d, [](const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); });
    }
    void get_u64(const std::string& s, const std::string& k, std::uint64_t& d) {
        get(s, k, d, [](const std::string& v) { return std::stoull(v); });
    }
    void get_int(const std::string& s, const std::string& k, int& d) {
        get(s, k, d, [](const std::string& v) { return std::stoi(v); });
    }
    void get_bool(const std::string& s, const std::string& k, bool& d) {
        get(s, k, d, [](const std::string& v) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw ConfigError("expected a boolean");
        });
    }
    void get_string(const std::string& s, const std::string& k, std::string& d) {
        get(s, k, d, [](const std::string& v) { return v; });
    }

    /// After all gets: every present key must be known.
    void reject_unknown() const {
        for (const auto& [section, keys] : kv_) {
            const auto it = known_.find(section);
            if (it == known_.end())
                throw ConfigError("config: unknown section [" + section + "]");
            for (const auto& [key, value] : keys) {
                if (!it->second.count(key)) {
                    std::string allowed;
                    for (const auto& k : it->second) allowed += (allowed.empty() ? "" : ", ") + k;
                    throw ConfigError("config: unknown key '" + key + "' in [" + section +
                                      "] (allowed: " + allowed + ")");
                }
            }
        }
    }

private:
    KvMap kv_;
    std::map<std::string, std::set<std::string>> known_;
};

} // namespace

double Config::alpha() const { return alpha_lambda(n_o); }

MediumCorrelation Config::medium() const {
    if (medium_kind != "gaussian")
        throw ConfigError("config: only the gaussian medium kind is configurable from files");
    return MediumCorrelation::gaussian(sigma2_lambda2, ell_c_over_lambda);
}

SourceCoherence Config::source() const {
    if (source_kind == "plane") return SourceCoherence::plane_wave();
    if (source_kind == "speckle") return SourceCoherence::gaussian_schell(rho_o_over_lambda);
    throw ConfigError("config: source kind must be plane | speckle");
}

DerivedScales Config::scales() const { return derived_scales(medium(), source(), alpha()); }

ExperimentPlan Config::plan() const {
    ExperimentPlan p;
    p.medium = medium();
    p.source = source();
    p.alpha = alpha();
    p.regime = regime;
    p.n_medium = n_medium;
    p.m_source = regime == Regime::pc ? m_source : 1;
    const double z_c = scales().z_c;
    if (n_outputs < 1) throw ConfigError("config: run.n_outputs must be >= 1");
    for (std::size_t i = 0; i < n_outputs; ++i)
        p.z_out.push_back(z_max_over_zc * z_c * static_cast<double>(i) /
                          static_cast<double>(std::max<std::size_t>(1, n_outputs - 1)));
    if (n_outputs == 1) p.z_out = {z_max_over_zc * z_c};
    p.dx = dx;
    p.window_over_ell_c = window_over_ell_c;
    p.dz = dz;
    p.corr_x_max = corr_x_max_over_lc * ell_c_over_lambda;
    p.fieldcorr_y_max = fieldcorr_y_max_over_lc * ell_c_over_lambda;
    p.full_lag_curves = full_lag_curves;
    p.root_seed = seed;
    p.workers = workers;
    return p;
}

MomentGrid Config::moment_grid() const {
    return MomentGrid{solver_nx, solver_ny, solver_Lx, solver_Ly};
}

StepControl Config::step_control() const {
    StepControl ctl;
    ctl.dz_min = solver_dz_min;
    ctl.dz_max = solver_dz_max;
    return ctl;
}

Config parse_config_text(const std::string& text) {
    SchemaReader r(parse_sections(text));
    Config c;
    r.get_string("medium", "kind", c.medium_kind);
    r.get_double("medium", "sigma2_lambda2", c.sigma2_lambda2);
    r.get_double("medium", "ell_c_over_lambda", c.ell_c_over_lambda);
    r.get_string("source", "kind", c.source_kind);
    r.get_double("source", "rho_o_over_lambda", c.rho_o_over_lambda);

    std::string regime_s = to_string(c.regime);
    r.get_string("run", "regime", regime_s);
    c.regime = regime_from_string(regime_s);
    r.get_size("run", "n_medium", c.n_medium);
    r.get_size("run", "m_source", c.m_source);
    r.get_double("run", "z_max_over_zc", c.z_max_over_zc);
    r.get_size("run", "n_outputs", c.n_outputs);
    r.get_u64("run", "seed", c.seed);
    r.get_u64("", "seed", c.seed); // top-level shortcut
    r.get_int("run", "workers", c.workers);
    r.get_bool("run", "dump_intensity", c.dump_intensity);
    r.get_bool("run", "full_lag_curves", c.full_lag_curves);
    r.get_double("run", "corr_x_max_over_lc", c.corr_x_max_over_lc);
    r.get_double("run", "fieldcorr_y_max_over_lc", c.fieldcorr_y_max_over_lc);

    r.get_double("grid", "dx", c.dx);
    r.get_double("grid", "window_over_ell_c", c.window_over_ell_c);
    r.get_double("grid", "dz", c.dz);
    r.get_double("grid", "n_o", c.n_o);

    r.get_size("solver", "nx", c.solver_nx);
    r.get_size("solver", "ny", c.solver_ny);
    r.get_double("solver", "Lx", c.solver_Lx);
    r.get_double("solver", "Ly", c.solver_Ly);
    r.get_double("solver", "dz_min", c.solver_dz_min);
    r.get_double("solver", "dz_max", c.solver_dz_max);
    r.get_double("solver", "boundary_tol", c.boundary_tol);

    r.get_size("rays", "n_media", c.rays_n_media);
    r.get_size("rays", "n_x", c.rays_n_x);
    r.get_size("rays", "n_k", c.rays_n_k);
    r.get_double("rays", "k_span", c.rays_k_span);
    r.get_double("rays", "dz_over_ell_c", c.rays_dz_over_ell_c);
    r.get_size("rays", "hist_nx", c.rays_hist_nx);
    r.get_size("rays", "hist_nk", c.rays_hist_nk);
    r.get_double("rays", "hist_k_span", c.rays_hist_k_span);

    r.reject_unknown();

    // cross-field validation happens in the typed accessors; trigger it now
    (void)c.medium();
    (void)c.source();
    if (c.regime != Regime::plane && c.source_kind == "plane")
        throw ConfigError("config: c/pc regimes need source.kind = speckle");
    return c;
}

Config parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_text(const Config& c) {
    std::ostringstream o;
    o.precision(17);
    o << "[medium]\n";
    o << "kind = " << c.medium_kind << "\n";
    o << "sigma2_lambda2 = " << c.sigma2_lambda2 << "\n";
    o << "ell_c_over_lambda = " << c.ell_c_over_lambda << "\n";
    o << "\n[source]\n";
    o << "kind = " << c.source_kind << "\n";
    o << "rho_o_over_lambda = " << c.rho_o_over_lambda << "\n";
    o << "\n[run]\n";
    o << "regime = " << to_string(c.regime) << "\n";
    o << "n_medium = " << c.n_medium << "\n";
    o << "m_source = " << c.m_source << "\n";
    o << "z_max_over_zc = " << c.z_max_over_zc << "\n";
    o << "n_outputs = " << c.n_outputs << "\n";
    o << "seed = " << c.seed << "\n";
    o << "workers = " << c.workers << "\n";
    o << "dump_intensity = " << (c.dump_intensity ? "true" : "false") << "\n";
    o << "full_lag_curves = " << (c.full_lag_curves ? "true" : "false") << "\n";
    o << "corr_x_max_over_lc = " << c.corr_x_max_over_lc << "\n";
    o << "fieldcorr_y_max_over_lc = " << c.fieldcorr_y_max_over_lc << "\n";
    o << "\n[grid]\n";
    o << "dx = " << c.dx << "\n";
    o << "window_over_ell_c = " << c.window_over_ell_c << "\n";
    o << "dz = " << c.dz << "\n";
    o << "n_o = " << c.n_o << "\n";
    o << "\n[solver]\n";
    o << "nx = " << c.solver_nx << "\n";
    o << "ny = " << c.solver_ny << "\n";
    o << "Lx = " << c.solver_Lx << "\n";
    o << "Ly = " << c.solver_Ly << "\n";
    o << "dz_min = " << c.solver_dz_min << "\n";
    o << "dz_max = " << c.solver_dz_max << "\n";
    o << "boundary_tol = " << c.boundary_tol << "\n";
    o << "\n[rays]\n";
    o << "n_media = " << c.rays_n_media << "\n";
    o << "n_x = " << c.rays_n_x << "\n";
    o << "n_k = " << c.rays_n_k << "\n";
    o << "k_span = " << c.rays_k_span << "\n";
    o << "dz_over_ell_c = " << c.rays_dz_over_ell_c << "\n";
    o << "hist_nx = " << c.rays_hist_nx << "\n";
    o << "hist_nk = " << c.rays_hist_nk << "\n";
    o << "hist_k_span = " << c.rays_hist_k_span << "\n";
    return o.str();
}

std::vector<std::string> preset_names() {
    return {"fig1b", "fig2", "fig3b", "fig3c", "fig3d", "fig4"};
}

std::vector<std::pair<std::string, Config>> expand_preset(const std::string& name, double scale) {
    if (!(scale > 0.0)) throw ConfigError("preset: scale must be positive");
    auto scaled = [scale](std::size_t n) {
        return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(
                                            static_cast<double>(n) * scale)));
    };
    Config c;
    c.sigma2_lambda2 = 1e-4;

    if (name == "fig1b") {
        // plane-wave scintillation growth; the ell_c = 25 family member
        c.regime = Regime::plane;
        c.ell_c_over_lambda = 25.0;
        c.source_kind = "plane";
        c.n_medium = scaled(1000);
        c.z_max_over_zc = 4.0;
        c.n_outputs = 17;
        return {{"", c}};
    }
    if (name == "fig2") {
        // plane-wave intensity correlation at X_c ~ 12.4
        c.regime = Regime::plane;
        c.ell_c_over_lambda = 100.0;
        c.source_kind = "plane";
        c.n_medium = scaled(1000);
        c.z_max_over_zc = 3.0;
        c.n_outputs = 13;
        c.solver_nx = 512;
        c.solver_ny = 512;
        return {{"", c}};
    }
    if (name == "fig3b" || name == "fig3c" || name == "fig3d") {
        // coherent speckle scintillation, reference member of each family
        c.regime = Regime::c;
        c.ell_c_over_lambda = 100.0;
        c.source_kind = "speckle";
        c.rho_o_over_lambda = 10.0;
        c.n_medium = scaled(1000);
        c.z_max_over_zc = 2.5;
        c.n_outputs = 21;
        return {{"", c}};
    }
    if (name == "fig4") {
        // two-scale intensity correlation: both the c and the pc protocols
        c.ell_c_over_lambda = 100.0;
        c.source_kind = "speckle";
        c.rho_o_over_lambda = 10.0;
        c.z_max_over_zc = 2.0;
        c.n_outputs = 9;
        c.solver_Ly = 32.0;
        c.solver_ny = 512;
        Config cc = c;
        cc.regime = Regime::c;
        cc.n_medium = scaled(1000);
        Config cpc = c;
        cpc.regime = Regime::pc;
        cpc.n_medium = scaled(300);
        cpc.m_source = scaled(400);
        return {{"c", cc}, {"pc", cpc}};
    }
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (available: " + all + ")");
}

CompareReport compare_s_curves(const std::filesystem::path& a, const std::filesystem::path& b,
                               double sigma_multiple) {
    const auto ca = io::read_csv(a);
    const auto cb = io::read_csv(b);
    const auto& za = ca.column("z_over_zc");
    const auto& zb = cb.column("z_over_zc");
    const auto& sa = ca.column("S");
    const auto& sb = cb.column("S");
    const std::vector<double> zeros_a(za.size(), 0.0), zeros_b(zb.size(), 0.0);
    const auto& ea = ca.has_column("stderr") ? ca.column("stderr") : zeros_a;
    const auto& eb = cb.has_column("stderr") ? cb.column("stderr") : zeros_b;

    CompareReport rep;
    for (std::size_t i = 0; i < za.size(); ++i) {
        std::size_t j = zb.size();
        for (std::size_t q = 0; q < zb.size(); ++q)
            if (std::abs(zb[q] - za[i]) <= 1e-9 * std::max(1.0, std::abs(za[i]))) j = q;
        if (j == zb.size())
            throw ConfigError("compare: no matching z_over_zc for " + std::to_string(za[i]));
        const double diff = std::abs(sa[i] - sb[j]);
        const double sigma = std::hypot(ea[i], eb[j]);
        const double mult = diff == 0.0 ? 0.0 : (sigma > 0.0 ? diff / sigma : 1e300);
        ++rep.n_points;
        if (mult > rep.max_sigma) {
            rep.max_sigma = mult;
            rep.max_abs_diff = diff;
            rep.at_z = za[i];
        }
    }
    rep.pass = rep.max_sigma <= sigma_multiple;
    return rep;
}

} // namespace bflow
