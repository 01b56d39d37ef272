#pragma once

#include "bflow/ensemble.hpp"
#include "bflow/moments.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bflow::io {

/// Numeric CSV with a header row; numbers are written with max precision so
/// re-reads round-trip bit-exactly.
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
    const std::vector<double>& column(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const Csv& csv);
Csv read_csv(const std::filesystem::path& path);

/// Flat binary array (row-major) with a JSON sidecar describing shape, dtype
/// and grid steps: <base>.bin + <base>.json.
void dump_binary(const std::filesystem::path& base, const std::vector<double>& data,
                 std::size_t rows, std::size_t cols, const std::string& extra_json_fields);

/// Writes the ensemble result as CSV curves plus a manifest.json that embeds
/// the exact configuration text needed to re-run the experiment
/// bit-identically. Returns the manifest path.
std::filesystem::path persist(const EnsembleResult& result, const std::filesystem::path& dir,
                              const std::string& config_echo);

/// Extracts the embedded configuration text from a manifest written by
/// persist(); refuses manifests from a different format version.
std::string manifest_config_text(const std::filesystem::path& manifest_path);

/// Theory curves: s_theory.csv (z_over_zc, S) and per-snapshot correlation
/// CSVs (x_over_lc, C), plus a JSON sidecar with parameters and flags.
std::filesystem::path persist_theory(const MomentSolution& solution, ScintRegime regime,
                                     const DerivedScales& scales,
                                     const std::vector<double>& z_tilde_out, double corr_x_max,
                                     const std::filesystem::path& dir,
                                     const std::string& config_echo);

} // namespace bflow::io
