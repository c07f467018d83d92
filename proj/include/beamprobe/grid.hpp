// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_GRID_HPP
#define BEAMPROBE_GRID_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beamprobe {

// Regular grid of square cells; cell (i, j) spans
// [origin + (i, j) * cell, origin + (i + 1, j + 1) * cell].
struct GridSpec
{
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    double cell = 2.0;
    int nx = 1;
    int ny = 1;

    void validate() const
    {
        if (!(cell > 0.0) || nx < 1 || ny < 1)
            throw std::invalid_argument("GridSpec: cell size and counts must be positive");
    }

    bool operator==(const GridSpec& o) const
    {
        return origin == o.origin && cell == o.cell && nx == o.nx && ny == o.ny;
    }

    int cell_count() const { return nx * ny; }
    int flat(int i, int j) const { return j * nx + i; }

    Eigen::Vector2d center(int i, int j) const
    {
        return origin + cell * Eigen::Vector2d(i + 0.5, j + 0.5);
    }

    // Index of the nearest cell center along one axis. Queries exactly half
    // way between two centers go to the lower index; outside queries clamp.
    static int nearest_axis(double coord, double origin, double cell, int count)
    {
        const double t = (coord - origin) / cell - 0.5;
        const double k = std::ceil(t - 0.5);
        if (!(k > 0.0))
            return 0;
        return static_cast<int>(std::min<double>(k, count - 1));
    }

    // Nearest cell center in Euclidean distance; the problem separates per axis.
    std::pair<int, int> nearest(const Eigen::Vector2d& s) const
    {
        return {nearest_axis(s.x(), origin.x(), cell, nx), nearest_axis(s.y(), origin.y(), cell, ny)};
    }

    // Grid of `cell`-sized squares covering [lo, hi].
    static GridSpec covering(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, double cell)
    {
        GridSpec g;
        g.origin = lo;
        g.cell = cell;
        g.nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell - 1e-9)));
        g.ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell - 1e-9)));
        g.validate();
        return g;
    }
};

}  // namespace beamprobe

#endif  // BEAMPROBE_GRID_HPP
