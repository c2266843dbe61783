#pragma once

#include "singfbsde/common.hpp"
#include "singfbsde/model/levy.hpp"

#include <functional>
#include <optional>

namespace singfbsde::model {

/// Coefficients of dX = b(X)dt + sigma(X)dW + int beta(X-, e) mu~(de, dt).
template <std::size_t Dim>
struct ForwardModel {
    using State = Point<Dim>;

    std::function<State(const State&)> drift = [](const State&) { return State{}; };
    std::function<Matrix<Dim>(const State&)> diffusion = [](const State&) { return Matrix<Dim>{}; };
    std::function<State(const State&, double)> jump = [](const State&, double) { return State{}; };
    LevyMeasureSpec levy;
    double horizon = 1.0;

    // Declared structural constants; when absent the audit reports estimates only.
    std::optional<double> k_bsigma;
    std::optional<double> k_beta;
    std::optional<double> c_beta;

    static constexpr std::size_t dim = Dim;
};

/// Driver f(t, x, y, z, B), where B is the scalar aggregate int u(e) gamma(x, e) lambda(de),
/// together with the constants of its structural conditions.
template <std::size_t Dim>
struct Generator {
    using State = Point<Dim>;

    std::function<double(double, const State&, double, const State&, double)> core =
        [](double, const State&, double, const State&, double) { return 0.0; };
    std::function<double(const State&, double)> gamma = [](const State&, double) { return 0.0; };
    std::function<double(double)> theta = [](double) { return 0.0; };
    std::function<double(double, const State&)> decay = [](double, const State&) { return 1.0; };  // a(t,x)
    std::function<double(double, const State&)> f0 = [](double, const State&) { return 0.0; };

    double q = 1.0;
    double ell = 1.5;
    double growth_delta = 0.0;
    double lip_z = 0.0;
    double lip_u = 0.0;
    double mono_chi = 0.0;

    // Hints that enable closed forms; set by presets when known exactly.
    std::optional<double> constant_decay;
    bool f0_is_zero = false;

    /// Horizon T used for the input check and the truncation clamp (0 = unset).
    double horizon = 0.0;
    /// Truncation level n of f_n; 0 for the untruncated driver.
    int truncation_level = 0;
};

/// Closed box; lo/hi may be infinite to describe rays and half-spaces.
template <std::size_t Dim>
struct Box {
    Point<Dim> lo;
    Point<Dim> hi;

    bool contains(const Point<Dim>& x) const {
        for (std::size_t i = 0; i < Dim; ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
    bool bounded() const {
        for (std::size_t i = 0; i < Dim; ++i)
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) return false;
        return true;
    }
    /// Euclidean distance from x to the boundary of the box.
    double boundary_distance(const Point<Dim>& x) const {
        if (contains(x)) {
            double d = kInf;
            for (std::size_t i = 0; i < Dim; ++i) d = std::min({d, x[i] - lo[i], hi[i] - x[i]});
            return d;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < Dim; ++i) {
            const double gap = std::max({lo[i] - x[i], 0.0, x[i] - hi[i]});
            s += gap * gap;
        }
        return std::sqrt(s);
    }
};

/// Singular set S as a finite union of closed boxes. In d = 1 overlapping
/// intervals are merged; in d >= 2 boxes must be pairwise disjoint so the
/// boundary distance is the minimum over boxes.
template <std::size_t Dim>
class SingularSet {
public:
    SingularSet() = default;

    explicit SingularSet(std::vector<Box<Dim>> boxes) {
        for (const auto& b : boxes)
            for (std::size_t i = 0; i < Dim; ++i)
                if (!(b.lo[i] <= b.hi[i])) throw ConfigError("singular set: box with lo > hi");
        if constexpr (Dim == 1) {
            std::sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) { return a.lo[0] < b.lo[0]; });
            for (const auto& b : boxes) {
                if (!boxes_.empty() && b.lo[0] <= boxes_.back().hi[0])
                    boxes_.back().hi[0] = std::max(boxes_.back().hi[0], b.hi[0]);
                else
                    boxes_.push_back(b);
            }
        } else {
            for (std::size_t a = 0; a < boxes.size(); ++a)
                for (std::size_t b = a + 1; b < boxes.size(); ++b) {
                    bool overlap = true;
                    for (std::size_t i = 0; i < Dim; ++i)
                        overlap = overlap && boxes[a].lo[i] <= boxes[b].hi[i] && boxes[b].lo[i] <= boxes[a].hi[i];
                    if (overlap) throw ConfigError("singular set: boxes must be disjoint in dimension >= 2");
                }
            boxes_ = std::move(boxes);
        }
    }

    /// d = 1 convenience: union of closed intervals [lo, hi] (infinite ends allowed).
    static SingularSet intervals(std::vector<std::pair<double, double>> iv) requires(Dim == 1) {
        std::vector<Box<1>> boxes;
        for (auto [a, b] : iv) boxes.push_back(Box<1>{{a}, {b}});
        return SingularSet(std::move(boxes));
    }

    bool empty() const { return boxes_.empty(); }
    const std::vector<Box<Dim>>& boxes() const { return boxes_; }

    bool contains(const Point<Dim>& x) const {
        return std::any_of(boxes_.begin(), boxes_.end(), [&](const auto& b) { return b.contains(x); });
    }

    /// d(x, dS); +inf when the boundary is empty (S empty or the whole space).
    double boundary_distance(const Point<Dim>& x) const {
        double d = kInf;
        for (const auto& b : boxes_) d = std::min(d, b.boundary_distance(x));
        return d;
    }

    bool boundary_compact() const {
        return std::all_of(boxes_.begin(), boxes_.end(), [](const auto& b) {
            if constexpr (Dim == 1) return true;  // the boundary is a finite set of endpoints
            else return b.bounded();
        });
    }

    /// Finite boundary points in d = 1.
    std::vector<double> boundary_points() const requires(Dim == 1) {
        std::vector<double> pts;
        for (const auto& b : boxes_) {
            if (std::isfinite(b.lo[0])) pts.push_back(b.lo[0]);
            if (std::isfinite(b.hi[0]) && b.hi[0] != b.lo[0]) pts.push_back(b.hi[0]);
        }
        return pts;
    }

private:
    std::vector<Box<Dim>> boxes_;
};

/// Terminal function g with values in [0, +inf]; g = +inf exactly on the singular set.
template <std::size_t Dim>
struct TerminalData {
    using State = Point<Dim>;

    std::function<double(const State&)> finite_part = [](const State&) { return 0.0; };
    SingularSet<Dim> singular;
    double nu = 0.0;

    double operator()(const State& x) const { return singular.contains(x) ? kInf : finite_part(x); }
};

template <std::size_t Dim>
struct ProblemSpec {
    ForwardModel<Dim> model;
    Generator<Dim> generator;
    TerminalData<Dim> terminal;

    ProblemSpec() = default;
    ProblemSpec(ForwardModel<Dim> m, Generator<Dim> g, TerminalData<Dim> term)
        : model(std::move(m)), generator(std::move(g)), terminal(std::move(term)) {
        generator.horizon = model.horizon;
    }

    double horizon() const { return model.horizon; }
};

}  // namespace singfbsde::model
