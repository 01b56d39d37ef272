#include "bflow/io.hpp"

#include "bflow/errors.hpp"
#include "bflow/version.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bflow::io {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_ztag(double z_over_zc) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", z_over_zc);
    return buf;
}

json scales_json(const DerivedScales& s) {
    return {{"alpha", s.alpha},   {"ell_c", s.ell_c}, {"rho_o", s.rho_o},
            {"X_c", s.X_c},       {"X_o", s.X_o},     {"z_c", s.z_c},
            {"gamma2", s.gamma2}, {"gamma4_tilde", s.gamma4_tilde}};
}

} // namespace

const std::vector<double>& Csv::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return columns[i];
    throw ConfigError("csv: missing column '" + name + "'");
}

bool Csv::has_column(const std::string& name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

void write_csv(const std::filesystem::path& path, const Csv& csv) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < csv.header.size(); ++i)
        out << (i ? "," : "") << csv.header[i];
    out << "\n";
    for (std::size_t r = 0; r < csv.rows(); ++r) {
        for (std::size_t c = 0; c < csv.columns.size(); ++c)
            out << (c ? "," : "") << fmt_double(csv.columns[c][r]);
        out << "\n";
    }
}

Csv read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    Csv csv;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv: " + path.string());
    std::stringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) csv.header.push_back(tok);
    csv.columns.resize(csv.header.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t c = 0;
        while (std::getline(ls, tok, ',')) {
            if (c >= csv.columns.size()) throw ConfigError("ragged csv row in " + path.string());
            csv.columns[c++].push_back(std::stod(tok));
        }
        if (c != csv.columns.size()) throw ConfigError("short csv row in " + path.string());
    }
    return csv;
}

void dump_binary(const std::filesystem::path& base, const std::vector<double>& data,
                 std::size_t rows, std::size_t cols, const std::string& extra_json_fields) {
    if (data.size() != rows * cols) throw ConfigError("dump_binary: shape mismatch");
    auto bin = base;
    bin += ".bin";
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + bin.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(sizeof(double) * data.size()));

    json hdr = json::parse(extra_json_fields.empty() ? "{}" : extra_json_fields);
    hdr["dtype"] = "float64";
    hdr["order"] = "row-major";
    hdr["shape"] = {rows, cols};
    auto meta = base;
    meta += ".json";
    std::ofstream js(meta);
    js << hdr.dump(2) << "\n";
}

std::filesystem::path persist(const EnsembleResult& result, const std::filesystem::path& dir,
                              const std::string& config_echo) {
    std::filesystem::create_directories(dir);
    json files = json::array();

    {
        Csv s;
        s.header = {"z_over_zc", "S", "stderr", "n"};
        const bool pc = result.plan.regime == Regime::pc;
        if (pc) s.header.push_back("S_plugin");
        s.columns.resize(s.header.size());
        for (const auto& p : result.s_curve) {
            s.columns[0].push_back(p.z_over_zc);
            s.columns[1].push_back(p.S);
            s.columns[2].push_back(p.se);
            s.columns[3].push_back(static_cast<double>(p.n));
            if (pc) s.columns[4].push_back(p.S_plugin);
        }
        write_csv(dir / "s.csv", s);
        files.push_back("s.csv");
    }

    const double lc = result.scales.ell_c;
    for (const auto& curve : result.corr) {
        Csv c;
        c.header = {"x_over_lc", "C", "stderr", "n"};
        c.columns.resize(4);
        for (std::size_t i = 0; i < curve.x.size(); ++i) {
            c.columns[0].push_back(curve.x[i] / lc);
            c.columns[1].push_back(curve.C[i]);
            c.columns[2].push_back(curve.se[i]);
            c.columns[3].push_back(static_cast<double>(curve.n));
        }
        const std::string name = "corr_z" + fmt_ztag(curve.z_over_zc) + ".csv";
        write_csv(dir / name, c);
        files.push_back(name);
    }

    for (const auto& curve : result.fieldcorr) {
        Csv c;
        c.header = {"y_over_lc", "re_corr", "im_corr", "abs_corr", "stderr",
                    "stderr_re", "stderr_im", "n"};
        c.columns.resize(8);
        for (std::size_t i = 0; i < curve.y.size(); ++i) {
            c.columns[0].push_back(curve.y[i] / lc);
            c.columns[1].push_back(curve.re[i]);
            c.columns[2].push_back(curve.im[i]);
            c.columns[3].push_back(curve.abs[i]);
            c.columns[4].push_back(curve.se[i]);
            c.columns[5].push_back(curve.se_re[i]);
            c.columns[6].push_back(curve.se_im[i]);
            c.columns[7].push_back(static_cast<double>(curve.n));
        }
        const std::string name = "fieldcorr_z" + fmt_ztag(curve.z_over_zc) + ".csv";
        write_csv(dir / name, c);
        files.push_back(name);
    }

    json manifest;
    manifest["format"] = kManifestFormat;
    manifest["version"] = std::string(kVersion);
    manifest["kind"] = "simulate";
    manifest["regime"] = to_string(result.plan.regime);
    manifest["seed"] = result.plan.root_seed;
    manifest["n_medium"] = result.plan.n_medium;
    manifest["m_source"] = result.plan.m_source;
    manifest["grid"] = {{"n", result.grid.n}, {"dx", result.grid.dx}, {"dz", result.dz}};
    manifest["scales"] = scales_json(result.scales);
    manifest["dropped"] = result.dropped;
    manifest["drop_log"] = result.drop_log;
    manifest["wall_seconds"] = result.wall_seconds;
    manifest["files"] = files;
    manifest["config"] = config_echo;

    const auto mpath = dir / "manifest.json";
    std::ofstream out(mpath);
    out << manifest.dump(2) << "\n";
    return mpath;
}

std::string manifest_config_text(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open " + manifest_path.string());
    json m = json::parse(in);
    if (!m.contains("format") || m["format"].get<int>() != kManifestFormat)
        throw ConfigError("manifest format mismatch (expected " +
                          std::to_string(kManifestFormat) + ")");
    return m["config"].get<std::string>();
}

std::filesystem::path persist_theory(const MomentSolution& solution, ScintRegime regime,
                                     const DerivedScales& scales,
                                     const std::vector<double>& z_tilde_out, double corr_x_max,
                                     const std::filesystem::path& dir,
                                     const std::string& config_echo) {
    std::filesystem::create_directories(dir);
    json files = json::array();

    const auto curve = solution.scintillation(regime);
    Csv s;
    s.header = {"z_over_zc", "S"};
    s.columns.resize(2);
    for (double zt : z_tilde_out) {
        double value = 0.0;
        bool found = false;
        for (std::size_t i = 0; i < curve.z_tilde.size(); ++i) {
            if (std::abs(curve.z_tilde[i] - zt) <= 1e-9 * std::max(1.0, std::abs(zt))) {
                value = curve.S[i];
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("persist_theory: z_tilde not on the solved grid");
        s.columns[0].push_back(zt);
        s.columns[1].push_back(value);
    }
    const std::string sname = "s_theory_" + std::string(regime == ScintRegime::plane ? "plane"
                                                        : regime == ScintRegime::c  ? "c"
                                                                                    : "pc") +
                              ".csv";
    write_csv(dir / sname, s);
    files.push_back(sname);

    for (std::size_t i = 0; i < solution.snapshots.size(); ++i) {
        const auto cc = intensity_correlation(solution, i, scales, regime, corr_x_max);
        Csv c;
        c.header = {"x_over_lc", "C"};
        c.columns.resize(2);
        for (std::size_t j = 0; j < cc.x.size(); ++j) {
            c.columns[0].push_back(cc.x[j] / scales.ell_c);
            c.columns[1].push_back(cc.C[j]);
        }
        const std::string name =
            "corr_theory_z" + fmt_ztag(solution.snapshots[i].z_tilde) + ".csv";
        write_csv(dir / name, c);
        files.push_back(name);
    }

    json side;
    side["format"] = kManifestFormat;
    side["version"] = std::string(kVersion);
    side["kind"] = "theory";
    side["regime"] = regime == ScintRegime::plane ? "plane" : regime == ScintRegime::c ? "c" : "pc";
    side["X_param"] = solution.X_param;
    side["grid"] = {{"nx", solution.grid.nx},
                    {"ny", solution.grid.ny},
                    {"Lx", solution.grid.Lx},
                    {"Ly", solution.grid.Ly}};
    side["scales"] = scales_json(scales);
    side["boundary_ok"] = solution.boundary_ok;
    side["boundary_residual"] = solution.boundary_residual;
    side["boundary_note"] = solution.boundary_note;
    side["max_center_imag"] = solution.max_center_imag;
    side["files"] = files;
    side["config"] = config_echo;
    const auto mpath = dir / "theory.json";
    std::ofstream out(mpath);
    out << side.dump(2) << "\n";
    return mpath;
}

} // namespace bflow::io
