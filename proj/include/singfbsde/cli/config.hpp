#pragma once

// Run configuration: an INI-like file with sections model, generator,
// terminal, forward, bsde, ipde, verify and output.
//
//   # comment          ; comment
//   [section]
//   key = value        # trailing comment
//
// Keys outside the schema are rejected. Every key has a default, so the
// resolved config (all keys, in schema order) is self-contained.

#include "singfbsde/common.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace singfbsde::cli {

struct KeySpec {
    std::string_view section;
    std::string_view key;
    std::string_view fallback;
    std::string_view help;
};

inline const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> keys{
        {"model", "horizon", "1", "T"},
        {"model", "drift", "0", "b(x)"},
        {"model", "sigma", "0", "sigma(x)"},
        {"model", "jump", "e", "beta(x, e)"},
        {"model", "levy", "none", "none | atoms | density"},
        {"model", "atoms", "", "mark:mass, mark:mass, ..."},
        {"model", "density", "", "lambda density in e"},
        {"model", "density_lo", "-1", "density support"},
        {"model", "density_hi", "1", "density support"},
        {"model", "k_bsigma", "", "declared Lipschitz constant of b, sigma"},
        {"model", "k_beta", "", "declared jump Lipschitz constant"},
        {"model", "c_beta", "", "declared jump growth constant"},

        {"generator", "type", "power", "power | liquidation | heat | custom"},
        {"generator", "q", "2", "decay exponent"},
        {"generator", "a", "1", "a(t, x) of the power driver"},
        {"generator", "eta", "1", "eta(t, x) of the liquidation driver"},
        {"generator", "f0", "0", "f(t, x, 0, 0, 0)"},
        {"generator", "coupling", "0", "coefficient of B"},
        {"generator", "core", "", "custom f(t, x, y, z, B)"},
        {"generator", "gamma", "0", "gamma(x, e)"},
        {"generator", "theta", "0", "theta(e)"},
        {"generator", "ell", "1.5", "integrability exponent"},
        {"generator", "growth_delta", "0", "x-growth exponent of the bound"},
        {"generator", "lip_z", "0", "declared Lipschitz constant in z"},
        {"generator", "lip_u", "", "declared Lipschitz constant in B (default: coupling)"},
        {"generator", "mono_chi", "0", "declared monotonicity constant"},

        {"terminal", "g", "0", "finite part of g"},
        {"terminal", "singular", "", "lo:hi, lo:hi, ... (inf allowed)"},
        {"terminal", "nu", "0", "boundary behaviour exponent"},

        {"forward", "t0", "0", "start time"},
        {"forward", "x0", "0", "start state"},
        {"forward", "n_steps", "50", "time steps"},
        {"forward", "grading", "1", "time grid grading power"},
        {"forward", "n_paths", "10000", "Monte Carlo paths"},
        {"forward", "seed", "1", "master seed"},
        {"forward", "delta_cut", "1e-3", "small-jump cut"},
        {"forward", "small_jump_mode", "drop", "drop | gaussian"},
        {"forward", "mark_cells", "16", "quadrature cells per mark piece"},
        {"forward", "save_paths", "false", "write paths.bin"},

        {"bsde", "enabled", "true", ""},
        {"bsde", "schedule", "10", "truncation levels"},
        {"bsde", "tol", "1e-3", "last-gap convergence tolerance"},
        {"bsde", "basis", "polynomial", "polynomial | piecewise_linear"},
        {"bsde", "degree", "2", ""},
        {"bsde", "bins", "16", ""},
        {"bsde", "ridge", "1e-8", ""},
        {"bsde", "theta", "auto", "auto | value in [0, 1]"},
        {"bsde", "cfl_max", "0.9", ""},
        {"bsde", "clamp", "true", ""},
        {"bsde", "replay", "", "path bundle file to reuse"},

        {"ipde", "enabled", "true", ""},
        {"ipde", "schedule", "10", "truncation levels"},
        {"ipde", "tol", "1e-3", "sup-gap convergence tolerance"},
        {"ipde", "x_min", "-3", ""},
        {"ipde", "x_max", "3", ""},
        {"ipde", "nx", "121", ""},
        {"ipde", "nt", "1000", ""},
        {"ipde", "grading", "1", "time grid grading power"},
        {"ipde", "theta", "auto", "auto | value in [0.5, 1]"},
        {"ipde", "cfl_max", "0.9", ""},
        {"ipde", "envelope_k", "inf", "cap on extrapolated jump targets"},
        {"ipde", "max_extrapolation", "0.25", "share of jump mass allowed off the grid"},
        {"ipde", "gap_epsilon", "0.05", "gaps measured on t <= T - epsilon"},
        {"ipde", "coarse_check", "false", "re-solve on a halved grid for error estimates"},

        {"verify", "points", "", "t:x, t:x, ... (default t0:x0)"},
        {"verify", "n_se", "3", ""},
        {"verify", "relative", "0", "cross-validation relative allowance"},
        {"verify", "absolute", "1e-10", "cross-validation absolute allowance"},
        {"verify", "oracle_n", "", "compare with the comparison ODE at this level (inf allowed)"},
        {"verify", "oracle_tol", "1e-3", ""},
        {"verify", "eps_sweep", "0.2, 0.1, 0.05, 0.025", ""},
        {"verify", "terminal_rel", "0.05", ""},
        {"verify", "apriori_window", "0.05", ""},
        {"verify", "apriori_rel", "1e-2", ""},
        {"verify", "k_cal", "1", ""},
        {"verify", "divergence_threshold", "1", ""},
        {"verify", "blowup_x", "", "fit the blow-up slope at this x"},
        {"verify", "blowup_window", "0.01:0.3", "T - t window of the fit"},
        {"verify", "blowup_tol", "0.05", "allowed |slope + 1/q|"},
        {"verify", "audit_box", "", "lo:hi (default: the ipde grid)"},
        {"verify", "audit_states", "2000", ""},
        {"verify", "audit_pairs", "10000", ""},
        {"verify", "audit_seed", "7", ""},

        {"output", "dir", "out", ""},
        {"output", "plots", "true", ""},
    };
    return keys;
}

inline std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

class Config {
public:
    Config() {
        for (const auto& k : schema()) values_[full(k.section, k.key)] = std::string(k.fallback);
    }

    static bool known(const std::string& name) {
        for (const auto& k : schema())
            if (full(k.section, k.key) == name) return true;
        return false;
    }

    void set(const std::string& name, const std::string& value) {
        if (!known(name)) throw ConfigError("unknown key " + name);
        values_[name] = value;
    }

    /// `section.key=value`.
    void apply_override(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
        const auto name = trim(assignment.substr(0, eq));
        if (name.find('.') == std::string::npos)
            throw ConfigError("override key " + name + " needs a section, e.g. generator.q");
        set(name, trim(assignment.substr(eq + 1)));
    }

    void read(std::istream& is, const std::string& origin = "config") {
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
            if (body.empty()) continue;
            const std::string where = origin + ":" + std::to_string(lineno);
            if (body.front() == '[') {
                if (body.back() != ']') throw ConfigError(where + ": malformed section header");
                section = trim(std::string_view(body).substr(1, body.size() - 2));
                bool any = false;
                for (const auto& k : schema()) any = any || k.section == section;
                if (!any) throw ConfigError(where + ": unknown section [" + section + "]");
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
            if (section.empty()) throw ConfigError(where + ": key outside any section");
            const auto name = section + "." + trim(std::string_view(body).substr(0, eq));
            if (!known(name)) throw ConfigError(where + ": unknown key " + name);
            values_[name] = trim(std::string_view(body).substr(eq + 1));
        }
    }

    void read_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config " + path);
        read(is, path);
    }

    const std::string& str(const std::string& name) const {
        const auto it = values_.find(name);
        if (it == values_.end()) throw ConfigError("unknown key " + name);
        return it->second;
    }
    bool empty(const std::string& name) const { return str(name).empty(); }

    double num(const std::string& name) const { return parse_number(name, str(name)); }
    std::optional<double> opt_num(const std::string& name) const {
        if (empty(name)) return std::nullopt;
        return num(name);
    }
    long long integer(const std::string& name) const {
        const double v = num(name);
        if (!(std::floor(v) == v) || std::abs(v) > 9e15) throw ConfigError(name + " must be an integer");
        return static_cast<long long>(v);
    }
    std::size_t count(const std::string& name, long long min = 1) const {
        const auto v = integer(name);
        if (v < min) throw ConfigError(name + " must be >= " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& name) const {
        const auto& v = str(name);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError(name + " must be true or false, got '" + v + "'");
    }
    std::vector<double> list(const std::string& name) const {
        std::vector<double> out;
        if (empty(name)) return out;
        for (const auto& item : split(str(name), ',')) out.push_back(parse_number(name, item));
        return out;
    }
    std::vector<int> levels(const std::string& name) const {
        std::vector<int> out;
        for (double v : list(name)) {
            if (!(std::floor(v) == v) || v < 1 || v > 1e9) throw ConfigError(name + " entries must be integers >= 1");
            out.push_back(static_cast<int>(v));
        }
        if (out.empty()) throw ConfigError(name + " is empty");
        return out;
    }
    /// `a:b, c:d`.
    std::vector<std::pair<double, double>> pairs(const std::string& name) const {
        std::vector<std::pair<double, double>> out;
        if (empty(name)) return out;
        for (const auto& item : split(str(name), ',')) {
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw ConfigError(name + ": expected a:b, got '" + item + "'");
            out.emplace_back(parse_number(name, parts[0]), parse_number(name, parts[1]));
        }
        return out;
    }

    /// All keys in schema order, one section block each.
    std::string resolved() const {
        std::ostringstream os;
        std::string_view section;
        for (const auto& k : schema()) {
            if (k.section != section) {
                if (!section.empty()) os << '\n';
                section = k.section;
                os << '[' << section << "]\n";
            }
            os << k.key << " = " << str(full(k.section, k.key)) << '\n';
        }
        return os.str();
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    static double parse_number(const std::string& name, const std::string& text) {
        const auto s = trim(text);
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
            throw ConfigError(name + ": '" + s + "' is not a number");
        return v;
    }

private:
    static std::string full(std::string_view section, std::string_view key) {
        return std::string(section) + "." + std::string(key);
    }
    std::map<std::string, std::string> values_;
};

}  // namespace singfbsde::cli
