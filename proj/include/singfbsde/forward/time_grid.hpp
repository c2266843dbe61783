#pragma once

#include "singfbsde/common.hpp"

namespace singfbsde::forward {

struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    std::vector<double> nodes;

    /// Uniform grid; the last node is set to T exactly.
    static TimeGrid uniform(double t0, double T, std::size_t n_steps) {
        require(n_steps >= 1, "TimeGrid: n_steps must be >= 1");
        require(std::isfinite(t0) && std::isfinite(T) && T > t0, "TimeGrid: need t0 < T");
        TimeGrid g;
        g.t0 = t0;
        g.T = T;
        g.nodes.resize(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i)
            g.nodes[i] = t0 + (T - t0) * static_cast<double>(i) / static_cast<double>(n_steps);
        g.nodes.back() = T;
        return g;
    }

    /// tau_i = t0 + (T - t0)(1 - (1 - i/N)^power): steps shrink towards T for power > 1.
    static TimeGrid graded(double t0, double T, std::size_t n_steps, double power) {
        require(power >= 1.0 && std::isfinite(power), "TimeGrid: grading power must be >= 1");
        TimeGrid g = uniform(t0, T, n_steps);
        if (power == 1.0) return g;
        for (std::size_t i = 1; i < n_steps; ++i)
            g.nodes[i] = t0 + (T - t0) * (1.0 - std::pow(1.0 - static_cast<double>(i) / static_cast<double>(n_steps), power));
        return g;
    }

    static TimeGrid from_nodes(std::vector<double> nodes) {
        require(nodes.size() >= 2, "TimeGrid: need at least two nodes");
        for (std::size_t i = 1; i < nodes.size(); ++i)
            require(nodes[i] > nodes[i - 1], "TimeGrid: nodes must be strictly increasing");
        TimeGrid g;
        g.t0 = nodes.front();
        g.T = nodes.back();
        g.nodes = std::move(nodes);
        return g;
    }

    std::size_t n_steps() const { return nodes.size() - 1; }
    double dt(std::size_t i) const { return nodes[i + 1] - nodes[i]; }
    double max_dt() const {
        double m = 0.0;
        for (std::size_t i = 0; i < n_steps(); ++i) m = std::max(m, dt(i));
        return m;
    }
};

}  // namespace singfbsde::forward
