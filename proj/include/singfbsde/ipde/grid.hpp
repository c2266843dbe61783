#pragma once

#include "singfbsde/common.hpp"

namespace singfbsde::ipde {

/// Uniform 1-d grid x_min = x_0 < ... < x_{nx-1} = x_max.
struct SpaceGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t nx = 0;
    double h = 0.0;
    std::vector<double> nodes;

    static SpaceGrid uniform(double x_min, double x_max, std::size_t nx) {
        require(std::isfinite(x_min) && std::isfinite(x_max) && x_min < x_max, "SpaceGrid: need x_min < x_max");
        require(nx >= 3, "SpaceGrid: need at least 3 nodes");
        SpaceGrid g;
        g.x_min = x_min;
        g.x_max = x_max;
        g.nx = nx;
        g.h = (x_max - x_min) / static_cast<double>(nx - 1);
        g.nodes.resize(nx);
        for (std::size_t j = 0; j < nx; ++j) g.nodes[j] = x_min + g.h * static_cast<double>(j);
        g.nodes.back() = x_max;
        return g;
    }

    bool contains(double x) const { return x >= x_min && x <= x_max; }

    /// Linear interpolation of nodal values; flat outside the grid.
    double interpolate(std::span<const double> u, double x) const {
        if (x <= x_min) return u.front();
        if (x >= x_max) return u.back();
        const double pos = (x - x_min) / h;
        const auto i = std::min(static_cast<std::size_t>(pos), nx - 2);
        const double w = pos - static_cast<double>(i);
        return (1.0 - w) * u[i] + w * u[i + 1];
    }
};

}  // namespace singfbsde::ipde
