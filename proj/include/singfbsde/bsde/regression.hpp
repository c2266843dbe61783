#pragma once

#include "singfbsde/common.hpp"

#include <Eigen/Dense>

namespace singfbsde::bsde {

struct RegressionBasis {
    enum class Kind { polynomial, piecewise_linear };

    Kind kind = Kind::polynomial;
    int degree = 2;          ///< total degree for polynomial
    int bins = 16;           ///< quantile bins for piecewise_linear (d = 1)
    double ridge = 1e-8;     ///< relative to trace / columns
    double max_condition = 1e12;

    static RegressionBasis polynomial(int degree) {
        RegressionBasis b;
        b.degree = degree;
        return b;
    }
    static RegressionBasis piecewise_linear(int bins) {
        RegressionBasis b;
        b.kind = Kind::piecewise_linear;
        b.bins = bins;
        return b;
    }
};

namespace detail {

template <std::size_t Dim>
void multi_indices(int degree, std::vector<std::array<int, Dim>>& out) {
    std::array<int, Dim> idx{};
    auto rec = [&](auto&& self, std::size_t axis, int left) -> void {
        if (axis == Dim) {
            out.push_back(idx);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            idx[axis] = k;
            self(self, axis + 1, left - k);
        }
        idx[axis] = 0;
    };
    rec(rec, 0, degree);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (std::size_t i = 0; i < Dim; ++i) {
            sa += a[i];
            sb += b[i];
        }
        return sa < sb;
    });
}

}  // namespace detail

/// Least-squares projector onto a basis of the states at one time node.
/// Built once per node and reused for every regressed quantity.
template <std::size_t Dim>
class RegressionDesign {
public:
    RegressionDesign(std::span<const Point<Dim>> states, const RegressionBasis& basis) : n_(states.size()) {
        require(n_ >= 1, "regression: no samples");
        Point<Dim> lo, hi;
        lo.fill(kInf);
        hi.fill(-kInf);
        for (const auto& s : states)
            for (std::size_t i = 0; i < Dim; ++i) {
                lo[i] = std::min(lo[i], s[i]);
                hi[i] = std::max(hi[i], s[i]);
            }
        double spread = 0.0;
        for (std::size_t i = 0; i < Dim; ++i)
            spread = std::max(spread, (hi[i] - lo[i]) / (1.0 + std::abs(lo[i]) + std::abs(hi[i])));
        degenerate_ = spread <= 1e-13 || n_ < 2;

        if (degenerate_) {
            cols_ = 1;
            phi_ = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_), 1);
        } else if (basis.kind == RegressionBasis::Kind::piecewise_linear) {
            if constexpr (Dim != 1) {
                throw ConfigError("piecewise_linear basis requires dimension 1");
            } else {
                build_hats(states, basis.bins);
            }
        } else {
            build_polynomial(states, basis.degree);
        }

        Eigen::MatrixXd gram = phi_.transpose() * phi_ / static_cast<double>(n_);
        const double ridge = basis.ridge * gram.trace() / static_cast<double>(cols_);
        gram.diagonal().array() += ridge;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const auto& ev = eig.eigenvalues();
        condition_ = ev(0) > 0.0 ? ev(ev.size() - 1) / ev(0) : kInf;
        if (!(condition_ <= basis.max_condition))
            throw NumericalError("regression design is rank deficient after ridge (condition number " +
                                 std::to_string(condition_) + ")");
        solver_ = gram.ldlt();
    }

    std::size_t columns() const { return cols_; }
    bool degenerate() const { return degenerate_; }
    double condition_number() const { return condition_; }

    /// Fitted E[values | X] at every sample.
    std::vector<double> fit(std::span<const double> values) const {
        require(values.size() == n_, "regression: value count mismatch");
        Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(n_));
        if (!v.allFinite()) throw NumericalError("regression: non-finite regressand");
        // Centre first so the ridge never shrinks the constant component.
        const double mean = v.mean();
        const Eigen::VectorXd coef = solver_.solve(phi_.transpose() * (v.array() - mean).matrix() / static_cast<double>(n_));
        const Eigen::VectorXd fitted = (phi_ * coef).array() + mean;
        return {fitted.data(), fitted.data() + fitted.size()};
    }

private:
    void build_polynomial(std::span<const Point<Dim>> states, int degree) {
        require(degree >= 0, "regression: degree must be >= 0");
        Point<Dim> mean{}, sd{};
        for (const auto& s : states)
            for (std::size_t i = 0; i < Dim; ++i) mean[i] += s[i];
        for (auto& m : mean) m /= static_cast<double>(n_);
        for (const auto& s : states)
            for (std::size_t i = 0; i < Dim; ++i) sd[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
        for (auto& v : sd) v = std::sqrt(v / static_cast<double>(n_));
        std::vector<std::array<int, Dim>> idx;
        detail::multi_indices<Dim>(degree, idx);
        cols_ = idx.size();
        phi_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(cols_));
        for (std::size_t p = 0; p < n_; ++p) {
            Point<Dim> z;
            for (std::size_t i = 0; i < Dim; ++i) z[i] = sd[i] > 0.0 ? (states[p][i] - mean[i]) / sd[i] : 0.0;
            for (std::size_t c = 0; c < cols_; ++c) {
                double v = 1.0;
                for (std::size_t i = 0; i < Dim; ++i)
                    for (int k = 0; k < idx[c][i]; ++k) v *= z[i];
                phi_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = v;
            }
        }
    }

    void build_hats(std::span<const Point<1>> states, int bins) {
        require(bins >= 1, "regression: bins must be >= 1");
        std::vector<double> xs(n_);
        for (std::size_t p = 0; p < n_; ++p) xs[p] = states[p][0];
        std::sort(xs.begin(), xs.end());
        std::vector<double> knots;
        for (int k = 0; k <= bins; ++k) {
            const double pos = static_cast<double>(k) / bins * static_cast<double>(n_ - 1);
            const auto i = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(i);
            const double q = i + 1 < n_ ? xs[i] * (1.0 - frac) + xs[i + 1] * frac : xs[i];
            if (knots.empty() || q > knots.back()) knots.push_back(q);
        }
        cols_ = knots.size();
        if (cols_ < 2) {
            cols_ = 1;
            phi_ = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_), 1);
            return;
        }
        phi_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(cols_));
        for (std::size_t p = 0; p < n_; ++p) {
            const double x = std::clamp(states[p][0], knots.front(), knots.back());
            const auto it = std::upper_bound(knots.begin(), knots.end(), x);
            std::size_t j = static_cast<std::size_t>(it - knots.begin());
            if (j == 0) j = 1;
            if (j >= cols_) j = cols_ - 1;
            const double w = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
            phi_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j - 1)) = 1.0 - w;
            phi_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = w;
        }
    }

    std::size_t n_;
    std::size_t cols_ = 1;
    bool degenerate_ = false;
    double condition_ = 1.0;
    Eigen::MatrixXd phi_;
    Eigen::LDLT<Eigen::MatrixXd> solver_;
};

/// One-shot conditional expectation of `values` given the states.
template <std::size_t Dim>
std::vector<double> condexp_regress(std::span<const Point<Dim>> states, std::span<const double> values,
                                    const RegressionBasis& basis) {
    return RegressionDesign<Dim>(states, basis).fit(values);
}

}  // namespace singfbsde::bsde
