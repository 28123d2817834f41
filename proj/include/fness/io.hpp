// io.hpp — run configuration, canonical hashing, CSV export/import and the on-disk
// solve cache.
//
// Config files are INI-style: sections [system], [truncation] and [run] with
// `key = value` lines; lists are comma separated. Level labels in config files and CSVs
// are one-based.

#pragma once

#include "fness/model.hpp"
#include "fness/rates.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fness {

struct RunConfig {
    SystemSpec spec = toy_model();
    Truncation trunc;
    std::vector<double> betas;           // explicit list, or generated from beta_geometric
    std::vector<double> lambdas;         // bound sweep
    double beta_fd{0.0};                 // <= 0 selects 0.005 / gap
    int extrapolation_order{2};
    std::vector<double> converge_e_cut;  // check --converge sweep axes
    std::vector<int> converge_nu_cut;
    std::vector<double> converge_betas;
    double dump_p{1.1};               // p = 1 from level 1 sits exactly on the level-2 threshold
    int dump_level{1};                   // one-based
    std::string output_dir{"out"};
    std::string cache_dir;               // empty: no persistent cache
};

// Defaults tuned for the toy model (see README).
RunConfig default_config();
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

// Canonical text: sorted sections and keys, floats in shortest round-trip form.
std::string canonical_config(const RunConfig& cfg);
std::string canonical_system(const SystemSpec& spec);
std::string canonical_truncation(const Truncation& trunc);
std::uint64_t fnv1a64(const std::string& text) noexcept;
std::string hex64(std::uint64_t v);

// Shortest decimal that parses back to the same double ("inf"/"-inf"/"nan" for non-finite).
std::string format_double(double v);
double parse_double(const std::string& s);

// CSV writer with `#` header comments carrying the config hash and canonical config.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& kind, const RunConfig& cfg,
              const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void close();

private:
    std::filesystem::path path_;
    std::string text_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> comments; // header lines without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

// Rate CSV: beta, j_from, j_to, nu, rate, e_cut, nu_cut, quad_points.
void write_rates_csv(const std::filesystem::path& path, const RunConfig& cfg, const std::vector<RateTable>& tables);
std::vector<RateTable> read_rates_csv(const std::filesystem::path& path, std::size_t num_levels);

// Content-addressed node-solve cache: one file per (system, truncation, incoming level),
// holding records keyed by the bit pattern of the momentum.
class DiskCache final : public SolveCache {
public:
    static constexpr std::uint8_t kVersion = 1;

    DiskCache(std::filesystem::path dir, const SystemSpec& spec, const Truncation& trunc);
    ~DiskCache() override;

    std::optional<Eigen::VectorXcd> lookup(int j_in, double p) override;
    void store(int j_in, double p, const Eigen::VectorXcd& t_row) override;
    void flush();

    std::filesystem::path file_for(int j_in) const;

private:
    void load(int j_in);

    std::filesystem::path dir_;
    std::string key_;
    std::map<int, std::map<std::uint64_t, Eigen::VectorXcd>> records_;
    std::map<int, bool> loaded_;
    std::map<int, bool> dirty_;
};

} // namespace fness
