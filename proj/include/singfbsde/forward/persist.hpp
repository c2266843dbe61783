#pragma once

#include "singfbsde/forward/paths.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace singfbsde::forward {

// Flat binary layout, all little-endian:
//   magic "SFBPATH1" | u64 dim | u64 n_paths | u64 n_steps | u64 seed | u64 small_jump_mode
//   f64 delta_cut | f64 total_rate | f64 small_jump_variance
//   f64 nodes[n_steps + 1] | f64 x[(n_steps + 1) * n_paths * dim]
//   f64 dw[n_steps * n_paths * dim] | f64 m_gamma[n_steps * n_paths]

namespace detail {

inline constexpr char kMagic[8] = {'S', 'F', 'B', 'P', 'A', 'T', 'H', '1'};

inline std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
        return r;
    }
    return v;
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw ConfigError("path file truncated");
    return to_le(v);
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace detail

template <std::size_t Dim>
void write_bundle(const std::string& path, const PathBundle<Dim>& b) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    os.write(detail::kMagic, 8);
    detail::put_u64(os, Dim);
    detail::put_u64(os, b.n_paths);
    detail::put_u64(os, b.n_steps());
    detail::put_u64(os, b.seed);
    detail::put_u64(os, static_cast<std::uint64_t>(b.small_jump_mode));
    detail::put_f64(os, b.delta_cut);
    detail::put_f64(os, b.total_rate);
    detail::put_f64(os, b.small_jump_variance);
    for (double t : b.grid.nodes) detail::put_f64(os, t);
    for (const auto& s : b.x)
        for (double v : s) detail::put_f64(os, v);
    for (const auto& s : b.dw)
        for (double v : s) detail::put_f64(os, v);
    for (double v : b.m_gamma) detail::put_f64(os, v);
    if (!os) throw ConfigError("write failed for " + path);
}

template <std::size_t Dim>
PathBundle<Dim> read_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::kMagic, 8) != 0) throw ConfigError(path + " is not a path file");
    if (detail::get_u64(is) != Dim) throw ConfigError(path + ": dimension mismatch");
    PathBundle<Dim> b;
    b.n_paths = detail::get_u64(is);
    const std::uint64_t n_steps = detail::get_u64(is);
    b.seed = detail::get_u64(is);
    b.small_jump_mode = static_cast<SmallJumpMode>(detail::get_u64(is));
    b.delta_cut = detail::get_f64(is);
    b.total_rate = detail::get_f64(is);
    b.small_jump_variance = detail::get_f64(is);
    if (n_steps == 0 || b.n_paths == 0 || n_steps > (1u << 26) || b.n_paths > (1u << 28))
        throw ConfigError(path + ": implausible shape");
    std::vector<double> nodes(n_steps + 1);
    for (auto& t : nodes) t = detail::get_f64(is);
    b.grid = TimeGrid::from_nodes(std::move(nodes));
    b.x.resize((n_steps + 1) * b.n_paths);
    for (auto& s : b.x)
        for (auto& v : s) v = detail::get_f64(is);
    b.dw.resize(n_steps * b.n_paths);
    for (auto& s : b.dw)
        for (auto& v : s) v = detail::get_f64(is);
    b.m_gamma.resize(n_steps * b.n_paths);
    for (auto& v : b.m_gamma) v = detail::get_f64(is);
    return b;
}

/// Per-node summary: t, then mean/std/min/max of each state component.
template <std::size_t Dim>
void write_bundle_summary(std::ostream& os, const PathBundle<Dim>& b) {
    os << "node,t";
    for (std::size_t k = 0; k < Dim; ++k) os << ",mean_" << k << ",std_" << k << ",min_" << k << ",max_" << k;
    os << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i <= b.n_steps(); ++i) {
        os << i << ',' << b.grid.nodes[i];
        for (std::size_t k = 0; k < Dim; ++k) {
            double s = 0.0, s2 = 0.0, lo = kInf, hi = -kInf;
            for (std::size_t p = 0; p < b.n_paths; ++p) {
                const double v = b.state(i, p)[k];
                s += v;
                s2 += v * v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double n = static_cast<double>(b.n_paths);
            const double mean = s / n;
            os << ',' << mean << ',' << std::sqrt(std::max(0.0, s2 / n - mean * mean)) << ',' << lo << ',' << hi;
        }
        os << '\n';
    }
}

}  // namespace singfbsde::forward
