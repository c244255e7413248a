#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vkrom/continuation.hpp"
#include "vkrom/errors.hpp"

namespace vkrom {

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Everything a command needs. Keys are written `section.key` in flag
/// overrides and as `key` under a `[section]` header in files.
struct RunConfig {
    // [mesh]
    double length = 1.0;
    int nx = 0; ///< 0: round(L * ny)
    int ny = 20;
    int degree = 2;
    double mesh_size = 0.0; ///< > 0 overrides ny with the structured mesh of that max edge length

    // [eigs]
    double eig_psi = 0.0;
    int eig_count = 4;
    double eig_tol = 1e-8;
    int eig_max_iter = 500;
    double spectrum_start = 30.0;
    double spectrum_end = 40.0;
    double spectrum_step = 0.5;
    int spectrum_count = 4;
    std::vector<double> order_mesh_sizes{0.1, 0.05, 0.025};
    int order_m = 1;
    int order_n = 1;

    // [continuation]
    double lambda_start = 35.0;
    double lambda_end = 65.0;
    double d_lambda = 0.5;
    double psi = 0.0;
    std::vector<BranchSeed> seeds{{1, 1, 1.0, 1}, {1, 1, 1.0, -1}, {2, 1, 1.0, 1}, {2, 1, 1.0, -1}};
    double amplitude = 1.0;
    double delta = 1e-4;
    double newton_tol = 1e-10;
    int newton_max_iter = 20;
    int store_every = 5;

    // [sweep2d]
    std::vector<double> psi_grid{0.0, 0.5, 1.0, 1.5, 2.0};
    BranchSeed sweep_seed{1, 1, 1.0, 1};
    double sweep_lambda_start = 35.0;
    double sweep_lambda_end = 260.0;
    double sweep_d_lambda = 2.0;

    // [rom]
    int n_max = 8;
    double energy_tol = 0.0;
    int stride = 1;
    std::string basis_file = "basis.rom";
    std::vector<BranchSeed> train_seeds{{1, 1, 1.0, 1}, {1, 1, 1.0, -1}};
    double test_start = 40.0;
    double test_end = 65.0;
    int test_count = 20;

    // [output]
    std::string output_dir = "out";
    bool svg = true;

    // [run]
    std::uint64_t rng_seed = 0x5eed;

    [[nodiscard]] int resolved_ny() const
    {
        return mesh_size > 0.0 ? std::max(1, static_cast<int>(std::lround(std::sqrt(2.0) / mesh_size))) : ny;
    }
    [[nodiscard]] int resolved_nx() const
    {
        if (nx > 0 && mesh_size <= 0.0) {
            return nx;
        }
        return std::max(1, static_cast<int>(std::lround(length * resolved_ny())));
    }

    [[nodiscard]] ContinuationOptions continuation_options() const
    {
        ContinuationOptions opt;
        opt.delta = delta;
        opt.store_every = store_every;
        opt.newton.tol = newton_tol;
        opt.newton.max_iter = newton_max_iter;
        opt.newton.seed = rng_seed;
        return opt;
    }

    [[nodiscard]] EigenOptions eigen_options() const
    {
        EigenOptions opt;
        opt.tol = eig_tol;
        opt.max_iter = eig_max_iter;
        return opt;
    }
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t' || c == ';') {
            if (!item.empty()) {
                out.push_back(item);
                item.clear();
            }
        } else {
            item += c;
        }
    }
    if (!item.empty()) {
        out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v)
{
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return x;
}

inline long long parse_int(const std::string& key, const std::string& v)
{
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

// "m:n:sign", sign one of + - +1 -1.
inline BranchSeed parse_seed(const std::string& key, const std::string& token, double amplitude)
{
    const auto a = token.find(':');
    const auto b = token.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) {
        throw ConfigError("config: '" + key + "' expects seeds as m:n:sign, got '" + token + "'");
    }
    BranchSeed seed;
    seed.m = static_cast<int>(parse_int(key, token.substr(0, a)));
    seed.n = static_cast<int>(parse_int(key, token.substr(a + 1, b - a - 1)));
    const std::string sign = token.substr(b + 1);
    if (sign == "+" || sign == "+1" || sign == "1") {
        seed.sign = 1;
    } else if (sign == "-" || sign == "-1") {
        seed.sign = -1;
    } else {
        throw ConfigError("config: '" + key + "' has a bad seed sign in '" + token + "'");
    }
    seed.amplitude = amplitude;
    return seed;
}

inline std::vector<BranchSeed> parse_seeds(const std::string& key, const std::string& v, double amplitude)
{
    std::vector<BranchSeed> seeds;
    for (const auto& t : split_list(v)) {
        seeds.push_back(parse_seed(key, t, amplitude));
    }
    return seeds;
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    for (const auto& t : split_list(v)) {
        out.push_back(parse_double(key, t));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& config_keys()
{
    auto num = [](double RunConfig::*m) {
        return Setter([m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); });
    };
    auto integer = [](int RunConfig::*m) {
        return Setter([m](RunConfig& c, const std::string& k, const std::string& v) {
            c.*m = static_cast<int>(parse_int(k, v));
        });
    };
    static const std::map<std::string, Setter> keys{
        {"mesh.L", num(&RunConfig::length)},
        {"mesh.nx", integer(&RunConfig::nx)},
        {"mesh.ny", integer(&RunConfig::ny)},
        {"mesh.degree", integer(&RunConfig::degree)},
        {"mesh.mesh_size", num(&RunConfig::mesh_size)},
        {"eigs.psi", num(&RunConfig::eig_psi)},
        {"eigs.k", integer(&RunConfig::eig_count)},
        {"eigs.tol", num(&RunConfig::eig_tol)},
        {"eigs.max_iter", integer(&RunConfig::eig_max_iter)},
        {"eigs.spectrum_start", num(&RunConfig::spectrum_start)},
        {"eigs.spectrum_end", num(&RunConfig::spectrum_end)},
        {"eigs.spectrum_step", num(&RunConfig::spectrum_step)},
        {"eigs.spectrum_k", integer(&RunConfig::spectrum_count)},
        {"eigs.order_mesh_sizes",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.order_mesh_sizes = parse_doubles(k, v); }},
        {"eigs.order_m", integer(&RunConfig::order_m)},
        {"eigs.order_n", integer(&RunConfig::order_n)},
        {"continuation.lambda_start", num(&RunConfig::lambda_start)},
        {"continuation.lambda_end", num(&RunConfig::lambda_end)},
        {"continuation.d_lambda", num(&RunConfig::d_lambda)},
        {"continuation.psi", num(&RunConfig::psi)},
        {"continuation.seeds",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.seeds = parse_seeds(k, v, c.amplitude); }},
        {"continuation.amplitude",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.amplitude = parse_double(k, v);
             for (auto* list : {&c.seeds, &c.train_seeds}) {
                 for (auto& s : *list) {
                     s.amplitude = c.amplitude;
                 }
             }
             c.sweep_seed.amplitude = c.amplitude;
         }},
        {"continuation.delta", num(&RunConfig::delta)},
        {"continuation.newton_tol", num(&RunConfig::newton_tol)},
        {"continuation.newton_max_iter", integer(&RunConfig::newton_max_iter)},
        {"continuation.store_every", integer(&RunConfig::store_every)},
        {"sweep2d.psi_grid",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.psi_grid = parse_doubles(k, v); }},
        {"sweep2d.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.sweep_seed = parse_seed(k, trim(v), c.amplitude);
         }},
        {"sweep2d.lambda_start", num(&RunConfig::sweep_lambda_start)},
        {"sweep2d.lambda_end", num(&RunConfig::sweep_lambda_end)},
        {"sweep2d.d_lambda", num(&RunConfig::sweep_d_lambda)},
        {"rom.n_max", integer(&RunConfig::n_max)},
        {"rom.energy_tol", num(&RunConfig::energy_tol)},
        {"rom.stride", integer(&RunConfig::stride)},
        {"rom.basis_file", [](RunConfig& c, const std::string&, const std::string& v) { c.basis_file = v; }},
        {"rom.train_seeds",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train_seeds = parse_seeds(k, v, c.amplitude);
         }},
        {"rom.test_start", num(&RunConfig::test_start)},
        {"rom.test_end", num(&RunConfig::test_end)},
        {"rom.test_count", integer(&RunConfig::test_count)},
        {"output.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
        {"output.svg", [](RunConfig& c, const std::string& k, const std::string& v) { c.svg = parse_bool(k, v); }},
        {"run.rng_seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.rng_seed = static_cast<std::uint64_t>(parse_int(k, v));
         }},
    };
    return keys;
}

} // namespace detail

/// Sets one `section.key` entry; unknown keys are an error.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    it->second(cfg, key, detail::trim(value));
}

/// `key=value` given on the command line.
inline void apply_override(RunConfig& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override '" + assignment + "' is not of the form section.key=value");
    }
    apply_setting(cfg, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Flat key=value text with [section] headers; '#' starts a comment.
inline void parse_config(RunConfig& cfg, std::istream& in, const std::string& origin = "<config>")
{
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string t = detail::trim(line);
        if (t.empty()) {
            continue;
        }
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw ConfigError(where + "malformed section header '" + t + "'");
            }
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + "expected key = value, got '" + t + "'");
        }
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string full = section.empty() ? key : section + "." + key;
        try {
            apply_setting(cfg, full, t.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

inline void load_config_file(RunConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    parse_config(cfg, in, path);
}

/// Name of the environment variable that overrides output.dir.
inline constexpr const char* kOutputDirEnv = "VKROM_OUTPUT_DIR";

inline void apply_environment(RunConfig& cfg)
{
    if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') {
        cfg.output_dir = dir;
    }
}

inline void validate_config(const RunConfig& c)
{
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) {
            throw ConfigError("config: " + msg);
        }
    };
    require(c.length > 0.0, "mesh.L must be positive");
    require(c.ny >= 1 && c.nx >= 0, "mesh.nx and mesh.ny must be positive");
    require(c.degree >= 1 && c.degree <= 3, "mesh.degree must be 1, 2 or 3");
    require(c.mesh_size >= 0.0, "mesh.mesh_size must be nonnegative");
    require(c.eig_count >= 1 && c.spectrum_count >= 1, "eigs.k and eigs.spectrum_k must be at least 1");
    require(c.eig_tol > 0.0 && c.eig_max_iter >= 1, "eigs.tol and eigs.max_iter must be positive");
    require(c.spectrum_start < c.spectrum_end && c.spectrum_step > 0.0, "eigs spectrum range is empty");
    require(c.order_mesh_sizes.size() >= 3, "eigs.order_mesh_sizes needs at least three values");
    for (std::size_t i = 1; i < c.order_mesh_sizes.size(); ++i) {
        require(c.order_mesh_sizes[i] < c.order_mesh_sizes[i - 1], "eigs.order_mesh_sizes must decrease");
    }
    require(c.order_m >= 1 && c.order_n >= 1, "eigs.order_m and eigs.order_n must be at least 1");
    require(c.lambda_start < c.lambda_end && c.d_lambda > 0.0, "continuation lambda range is empty");
    require(c.amplitude > 0.0 && c.delta > 0.0 && c.newton_tol > 0.0 && c.newton_max_iter >= 1,
            "continuation amplitude, delta, newton_tol and newton_max_iter must be positive");
    require(c.store_every >= 1, "continuation.store_every must be at least 1");
    for (const auto& s : c.seeds) {
        require(s.m >= 1 && s.n >= 1, "seed mode numbers must be at least 1");
    }
    require(!c.psi_grid.empty(), "sweep2d.psi_grid is empty");
    for (double p : c.psi_grid) {
        require(p >= 0.0 && p <= 2.0, "sweep2d.psi_grid values must lie in [0, 2]");
    }
    require(c.sweep_lambda_start < c.sweep_lambda_end && c.sweep_d_lambda > 0.0, "sweep2d lambda range is empty");
    require(c.n_max >= 1 && c.stride >= 1 && c.energy_tol >= 0.0 && c.energy_tol < 1.0,
            "rom.n_max and rom.stride must be positive and rom.energy_tol in [0, 1)");
    require(!c.train_seeds.empty(), "rom.train_seeds is empty");
    require(c.test_count >= 1 && c.test_start <= c.test_end, "rom test sample is empty");
    require(!c.output_dir.empty(), "output.dir is empty");
}

/// Test sample for E_N: test_count uniform points of [test_start, test_end].
inline std::vector<double> rom_test_lambdas(const RunConfig& c)
{
    std::vector<double> out;
    for (int i = 0; i < c.test_count; ++i) {
        out.push_back(c.test_count == 1 ? c.test_start
                                        : c.test_start + (c.test_end - c.test_start) * i / (c.test_count - 1));
    }
    return out;
}

} // namespace vkrom
