#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace singfbsde {

/// State of the forward process. The Brownian dimension equals the state dimension.
template <std::size_t Dim>
using Point = std::array<double, Dim>;

/// Row-major Dim x Dim diffusion matrix.
template <std::size_t Dim>
using Matrix = std::array<double, Dim * Dim>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Malformed input or configuration. Maps to CLI exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown (CFL violation, rank deficiency, non-finite state). Exit status 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DomainError(what);
}

template <std::size_t Dim>
inline bool all_finite(const Point<Dim>& p) {
    return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

template <std::size_t Dim>
inline double norm(const Point<Dim>& p) {
    double s = 0.0;
    for (double v : p) s += v * v;
    return std::sqrt(s);
}

template <std::size_t Dim>
inline double distance(const Point<Dim>& a, const Point<Dim>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < Dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Frobenius norm of the difference of two diffusion matrices.
template <std::size_t Dim>
inline double matrix_distance(const Matrix<Dim>& a, const Matrix<Dim>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < Dim * Dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Deterministic random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent generator for (seed, stream, block); the same triple always
/// yields the same sequence regardless of which worker runs the block.
inline std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x51ED270B27AEB3ull));
    const std::uint64_t c = splitmix64(b ^ splitmix64(block + 0x2545F4914F6CDD1Dull));
    std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Worker parallelism

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> value{1};
    return value;
}
}  // namespace detail

inline unsigned default_threads() { return std::max(1u, detail::thread_setting().load()); }
inline void set_default_threads(unsigned n) { detail::thread_setting().store(std::max(1u, n)); }

/// Runs fn(task) for task in [0, n_tasks). Task results must be written to
/// task-owned slots; scheduling order never affects outputs.
template <class Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n_tasks);
                return;
            }
        }
    };
    const std::size_t n_workers = std::min<std::size_t>(threads, n_tasks);
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Small numerical helpers shared by the solvers

/// Solves the monotone increasing scalar equation fn(y) = target.
/// fn must be continuous and eventually grow at least linearly in |y|.
template <class Fn>
double solve_increasing(Fn&& fn, double target, double guess) {
    double step = std::max(1.0, std::abs(guess)) * 1e-3 + 1e-3;
    double lo = guess, hi = guess;
    double f_lo = fn(lo) - target, f_hi = f_lo;
    if (f_lo == 0.0) return guess;
    int expand = 0;
    if (f_lo > 0.0) {
        while (f_lo > 0.0) {
            hi = lo;
            f_hi = f_lo;
            lo -= step;
            step *= 2.0;
            f_lo = fn(lo) - target;
            if (++expand > 200) throw NumericalError("solve_increasing: cannot bracket root");
        }
    } else {
        while (f_hi < 0.0) {
            lo = hi;
            f_lo = f_hi;
            hi += step;
            step *= 2.0;
            f_hi = fn(hi) - target;
            if (++expand > 200) throw NumericalError("solve_increasing: cannot bracket root");
        }
    }
    // Illinois regula falsi with a bisection fallback.
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
        const double f_mid = fn(mid) - target;
        if (f_mid == 0.0) return mid;
        if (f_mid < 0.0) {
            lo = mid;
            f_lo = f_mid;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        }
        if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)) ||
            hi - lo <= std::numeric_limits<double>::min())
            break;
    }
    return 0.5 * (lo + hi);
}

/// Thomas algorithm for a tridiagonal system; sub/diag/super indexed by row.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                             std::span<const double> super, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), d(n), x(n);
    double m = diag[0];
    if (m == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
    c[0] = n > 1 ? super[0] / m : 0.0;
    d[0] = rhs[0] / m;
    for (std::size_t i = 1; i < n; ++i) {
        m = diag[i] - sub[i] * c[i - 1];
        if (m == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
        c[i] = i + 1 < n ? super[i] / m : 0.0;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

}  // namespace singfbsde
