#include "fness/io.hpp"

#include "fness/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fness {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

// ---- numbers ---------------------------------------------------------------------------

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& raw) {
    const auto first = raw.find_first_not_of(" \t");
    const auto last = raw.find_last_not_of(" \t\r");
    if (first == std::string::npos) throw ConfigError("expected a number, got an empty value");
    const std::string s = raw.substr(first, last - first + 1);
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
    const auto res = std::from_chars(begin, s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& item : split(s, ',')) out.push_back(parse_double(item));
    return out;
}

int parse_int(const std::string& raw) {
    const std::string s = trim(raw);
    int v = 0;
    const char* begin = s.data() + (!s.empty() && s.front() == '+' ? 1 : 0);
    const auto res = std::from_chars(begin, s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("not an integer: '" + s + "'");
    }
    return v;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    if (trim(s).empty()) return out;
    for (const auto& item : split(s, ',')) out.push_back(parse_int(item));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

// rows separated by ';', entries by ','
Eigen::MatrixXd parse_matrix(const std::string& s) {
    const auto rows = split(s, ';');
    std::vector<std::vector<double>> data;
    for (const auto& r : rows) {
        if (r.empty()) continue;
        data.push_back(parse_list(r));
    }
    if (data.empty()) throw ConfigError("empty matrix value");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data[0].size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].size() != data[0].size()) throw ConfigError("matrix rows have different lengths");
        for (std::size_t k = 0; k < data[i].size(); ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data[i][k];
        }
    }
    return m;
}

std::string format_matrix(const Eigen::MatrixXd& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += ";";
        for (Eigen::Index k = 0; k < m.cols(); ++k) out += (k ? "," : "") + format_double(m(i, k));
    }
    return out;
}

double level_gap(const SystemSpec& spec) {
    std::vector<double> e;
    for (std::size_t j = 0; j < spec.num_levels(); ++j) e.push_back(quasi_energy(spec, {static_cast<int>(j), 0}));
    std::sort(e.begin(), e.end());
    return e[1] - e[0];
}

const std::set<std::string> kSystemKeys{"levels", "omega", "lambda", "hbar", "mass", "density",
                                        "coupling_strengths", "drive_profile", "overlaps_re", "overlaps_im"};
const std::set<std::string> kTruncKeys{"nu_cut", "e_cut", "quad_points", "degeneracy_tol"};
const std::set<std::string> kRunKeys{"betas", "beta_geometric", "lambdas", "beta_fd", "extrapolation_order",
                                     "converge_e_cut", "converge_nu_cut", "converge_betas", "dump_p",
                                     "dump_level", "output_dir", "cache_dir"};

} // namespace

// ---- config ----------------------------------------------------------------------------

RunConfig default_config() {
    RunConfig cfg;
    cfg.trunc.nu_cut = 8;
    cfg.trunc.e_cut = 2000.0;
    cfg.trunc.quad_points = 16;
    cfg.betas = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0};
    cfg.lambdas = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    cfg.converge_e_cut = {5.0, 10.0, 20.0, 40.0};
    cfg.converge_nu_cut = {1, 2, 3, 4, 6};
    cfg.converge_betas = {0.1, 1.0, 10.0};
    return cfg;
}

RunConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg = default_config();
    bool overlaps_given = false;
    Eigen::MatrixXd re, im;
    bool geometric = false;
    bool explicit_betas = false;

    for (const auto& [section, body] : tree) {
        const std::set<std::string>* allowed = nullptr;
        if (section == "system") allowed = &kSystemKeys;
        else if (section == "truncation") allowed = &kTruncKeys;
        else if (section == "run") allowed = &kRunKeys;
        else throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            if (!allowed->contains(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            const std::string v = node.data();
            auto& s = cfg.spec;
            if (key == "levels") s.levels = parse_list(v);
            else if (key == "omega") s.omega = parse_double(v);
            else if (key == "lambda") s.lambda_drive = parse_double(v);
            else if (key == "hbar") s.hbar = parse_double(v);
            else if (key == "mass") s.mass = parse_double(v);
            else if (key == "density") s.density = parse_double(v);
            else if (key == "coupling_strengths") s.coupling_strengths = parse_list(v);
            else if (key == "drive_profile") s.drive_profile = parse_int_list(v);
            else if (key == "overlaps_re") { re = parse_matrix(v); overlaps_given = true; }
            else if (key == "overlaps_im") { im = parse_matrix(v); overlaps_given = true; }
            else if (key == "nu_cut") cfg.trunc.nu_cut = parse_int(v);
            else if (key == "e_cut") cfg.trunc.e_cut = parse_double(v);
            else if (key == "quad_points") cfg.trunc.quad_points = parse_int(v);
            else if (key == "degeneracy_tol") cfg.trunc.degeneracy_tol = parse_double(v);
            else if (key == "betas") { cfg.betas = parse_list(v); explicit_betas = true; }
            else if (key == "beta_geometric") {
                const auto g = parse_list(v);
                if (g.size() != 3 || g[2] != std::floor(g[2]) || g[2] < 1) {
                    throw ConfigError("config: beta_geometric expects start, ratio, count");
                }
                cfg.betas.clear();
                double b = g[0];
                for (int k = 0; k < static_cast<int>(g[2]); ++k, b *= g[1]) cfg.betas.push_back(b);
                geometric = true;
            }
            else if (key == "lambdas") cfg.lambdas = parse_list(v);
            else if (key == "beta_fd") cfg.beta_fd = parse_double(v);
            else if (key == "extrapolation_order") cfg.extrapolation_order = parse_int(v);
            else if (key == "converge_e_cut") cfg.converge_e_cut = parse_list(v);
            else if (key == "converge_nu_cut") cfg.converge_nu_cut = parse_int_list(v);
            else if (key == "converge_betas") cfg.converge_betas = parse_list(v);
            else if (key == "dump_p") cfg.dump_p = parse_double(v);
            else if (key == "dump_level") cfg.dump_level = parse_int(v);
            else if (key == "output_dir") cfg.output_dir = trim(v);
            else if (key == "cache_dir") cfg.cache_dir = trim(v);
        }
    }
    if (geometric && explicit_betas) throw ConfigError("config: give either betas or beta_geometric, not both");

    auto& s = cfg.spec;
    if (overlaps_given) {
        if (re.size() == 0) re = Eigen::MatrixXd::Zero(im.rows(), im.cols());
        if (im.size() == 0) im = Eigen::MatrixXd::Zero(re.rows(), re.cols());
        if (re.rows() != im.rows() || re.cols() != im.cols()) {
            throw ConfigError("config: overlaps_re and overlaps_im differ in shape");
        }
        s.overlaps = re.cast<cdouble>() + cdouble{0.0, 1.0} * im.cast<cdouble>();
    } else if (s.num_levels() != 3 || s.num_scatterers() != 3) {
        throw ConfigError("config: overlaps_re/overlaps_im required unless the system has 3 levels and 3 scatterers");
    }
    validate(s, cfg.trunc);
    for (double b : cfg.betas) {
        if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("config: every beta must be finite and > 0");
    }
    for (double l : cfg.lambdas) {
        if (!(l >= 0.0)) throw ConfigError("config: lambdas must be >= 0");
    }
    if (cfg.extrapolation_order < 1 || cfg.extrapolation_order > 4) {
        throw ConfigError("config: extrapolation_order must be in [1, 4]");
    }
    if (cfg.dump_level < 1 || static_cast<std::size_t>(cfg.dump_level) > s.num_levels()) {
        throw ConfigError("config: dump_level out of range");
    }
    if (!(cfg.dump_p > 0.0)) throw ConfigError("config: dump_p must be > 0");
    if (cfg.beta_fd <= 0.0) cfg.beta_fd = 0.005 / level_gap(s);
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    return parse_config(in);
}

std::string canonical_system(const SystemSpec& s) {
    std::string out = "[system]\n";
    out += "coupling_strengths=" + join(s.coupling_strengths) + "\n";
    out += "density=" + format_double(s.density) + "\n";
    out += "drive_profile=" + join(s.drive_profile) + "\n";
    out += "hbar=" + format_double(s.hbar) + "\n";
    out += "lambda=" + format_double(s.lambda_drive) + "\n";
    out += "levels=" + join(s.levels) + "\n";
    out += "mass=" + format_double(s.mass) + "\n";
    out += "omega=" + format_double(s.omega) + "\n";
    out += "overlaps_im=" + format_matrix(s.overlaps.imag()) + "\n";
    out += "overlaps_re=" + format_matrix(s.overlaps.real()) + "\n";
    return out;
}

std::string canonical_truncation(const Truncation& t) {
    std::string out = "[truncation]\n";
    out += "degeneracy_tol=" + format_double(t.degeneracy_tol) + "\n";
    out += "e_cut=" + format_double(t.e_cut) + "\n";
    out += "nu_cut=" + std::to_string(t.nu_cut) + "\n";
    out += "quad_points=" + std::to_string(t.quad_points) + "\n";
    return out;
}

std::string canonical_config(const RunConfig& c) {
    // output_dir and cache_dir do not affect results and stay out of the hash
    std::string out = "[run]\n";
    out += "beta_fd=" + format_double(c.beta_fd) + "\n";
    out += "betas=" + join(c.betas) + "\n";
    out += "converge_betas=" + join(c.converge_betas) + "\n";
    out += "converge_e_cut=" + join(c.converge_e_cut) + "\n";
    out += "converge_nu_cut=" + join(c.converge_nu_cut) + "\n";
    out += "dump_level=" + std::to_string(c.dump_level) + "\n";
    out += "dump_p=" + format_double(c.dump_p) + "\n";
    out += "extrapolation_order=" + std::to_string(c.extrapolation_order) + "\n";
    out += "lambdas=" + join(c.lambdas) + "\n";
    return canonical_system(c.spec) + canonical_truncation(c.trunc) + out;
}

std::uint64_t fnv1a64(const std::string& text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---- CSV -------------------------------------------------------------------------------

CsvWriter::CsvWriter(const fs::path& path, const std::string& kind, const RunConfig& cfg,
                     const std::vector<std::string>& columns)
    : path_(path), columns_(columns.size()) {
    const std::string canon = canonical_config(cfg);
    text_ += "# floquet-ness " + kind + "\n";
    text_ += "# config_hash=" + hex64(fnv1a64(canon)) + "\n";
    text_ += "# beta_scale=" + format_double(level_gap(cfg.spec)) + "\n";
    std::istringstream lines(canon);
    for (std::string line; std::getline(lines, line);) text_ += "# " + line + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
    text_ += "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw NumericalError("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
}

void CsvWriter::close() {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path_.string());
    out << text_;
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("CSV: missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    CsvTable t;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto text = line.find_first_not_of("# ");
            t.comments.push_back(text == std::string::npos ? std::string{} : line.substr(text));
            continue;
        }
        auto cells = split(line, ',');
        if (t.columns.empty()) {
            t.columns = std::move(cells);
        } else {
            if (cells.size() != t.columns.size()) throw ConfigError("CSV: ragged row in " + path.string());
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

void write_rates_csv(const fs::path& path, const RunConfig& cfg, const std::vector<RateTable>& tables) {
    CsvWriter w(path, "rates", cfg, {"beta", "j_from", "j_to", "nu", "rate", "e_cut", "nu_cut", "quad_points"});
    for (const auto& t : tables) {
        for (int from = 0; from < static_cast<int>(t.num_levels); ++from) {
            for (int to = 0; to < static_cast<int>(t.num_levels); ++to) {
                for (int nu = -t.nu_cut(); nu <= t.nu_cut(); ++nu) {
                    w.row({format_double(t.beta), std::to_string(from + 1), std::to_string(to + 1), std::to_string(nu),
                           format_double(t.rate(to, from, nu)), format_double(t.trunc.e_cut),
                           std::to_string(t.trunc.nu_cut), std::to_string(t.trunc.quad_points)});
                }
            }
        }
    }
    w.close();
}

std::vector<RateTable> read_rates_csv(const fs::path& path, std::size_t num_levels) {
    const CsvTable csv = read_csv(path);
    const auto cb = csv.column("beta"), cf = csv.column("j_from"), ct = csv.column("j_to"), cn = csv.column("nu"),
               cr = csv.column("rate"), ce = csv.column("e_cut"), cc = csv.column("nu_cut"),
               cq = csv.column("quad_points");
    std::vector<RateTable> out;
    for (const auto& r : csv.rows) {
        const double beta = parse_double(r[cb]);
        Truncation tr;
        tr.e_cut = parse_double(r[ce]);
        tr.nu_cut = parse_int(r[cc]);
        tr.quad_points = parse_int(r[cq]);
        const bool same = !out.empty() && std::memcmp(&out.back().beta, &beta, sizeof beta) == 0 &&
                          out.back().trunc.nu_cut == tr.nu_cut && out.back().trunc.e_cut == tr.e_cut &&
                          out.back().trunc.quad_points == tr.quad_points;
        if (!same) out.push_back(RateTable::zeros(num_levels, tr, beta));
        out.back().set_rate(parse_int(r[ct]) - 1, parse_int(r[cf]) - 1, parse_int(r[cn]), parse_double(r[cr]));
    }
    for (auto& t : out) t.refresh_totals();
    return out;
}

// ---- solve cache -----------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'F', 'N', 'S', 'C'};
}

DiskCache::DiskCache(fs::path dir, const SystemSpec& spec, const Truncation& trunc) : dir_(std::move(dir)) {
    key_ = hex64(fnv1a64(canonical_system(spec))) + "-" + hex64(fnv1a64(canonical_truncation(trunc)));
}

DiskCache::~DiskCache() {
    try {
        flush();
    } catch (...) {
        // a failed cache write only costs recomputation next time
    }
}

fs::path DiskCache::file_for(int j_in) const { return dir_ / (key_ + "-j" + std::to_string(j_in) + ".bin"); }

void DiskCache::load(int j_in) {
    if (loaded_[j_in]) return;
    loaded_[j_in] = true;
    std::ifstream in(file_for(j_in), std::ios::binary);
    if (!in) return;
    char magic[4];
    std::uint8_t version = 0;
    std::uint32_t n = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 1);
    in.read(reinterpret_cast<char*>(&n), 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) return; // stale schema: ignore
    auto& recs = records_[j_in];
    std::vector<double> buf(2 * static_cast<std::size_t>(n));
    for (;;) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), 8);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
        if (!in) break;
        Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
        for (std::uint32_t i = 0; i < n; ++i) v(i) = cdouble{buf[2 * i], buf[2 * i + 1]};
        recs[bits] = std::move(v);
    }
}

std::optional<Eigen::VectorXcd> DiskCache::lookup(int j_in, double p) {
    load(j_in);
    std::uint64_t bits = 0;
    std::memcpy(&bits, &p, sizeof p);
    const auto& recs = records_[j_in];
    const auto it = recs.find(bits);
    if (it == recs.end()) return std::nullopt;
    return it->second;
}

void DiskCache::store(int j_in, double p, const Eigen::VectorXcd& t_row) {
    load(j_in);
    std::uint64_t bits = 0;
    std::memcpy(&bits, &p, sizeof p);
    records_[j_in][bits] = t_row;
    dirty_[j_in] = true;
}

void DiskCache::flush() {
    for (auto& [j_in, dirty] : dirty_) {
        if (!dirty) continue;
        const auto& recs = records_[j_in];
        if (recs.empty()) continue;
        fs::create_directories(dir_);
        const fs::path tmp = file_for(j_in).string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            const auto n = static_cast<std::uint32_t>(recs.begin()->second.size());
            out.write(kMagic, 4);
            out.write(reinterpret_cast<const char*>(&kVersion), 1);
            out.write(reinterpret_cast<const char*>(&n), 4);
            for (const auto& [bits, v] : recs) {
                out.write(reinterpret_cast<const char*>(&bits), 8);
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    const double re = v(i).real(), im = v(i).imag();
                    out.write(reinterpret_cast<const char*>(&re), 8);
                    out.write(reinterpret_cast<const char*>(&im), 8);
                }
            }
            if (!out) throw NumericalError("cache: write failed for " + tmp.string());
        }
        fs::rename(tmp, file_for(j_in));
        dirty = false;
    }
}

} // namespace fness
