#pragma once

#include "pier/grid.hpp"
#include "pier/world.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace pier::testutil {

inline std::string asset(const std::string& rel) {
    return std::string(PIER_SOURCE_DIR) + "/" + rel;
}

/// Build a world from row strings (first string = top row), 0.25 m cells.
inline World world_from_rows(const std::vector<std::string>& rows, double resolution = 0.25) {
    std::ostringstream text;
    text << "resolution " << resolution << "\n";
    for (const auto& r : rows) text << r << "\n";
    std::istringstream in(text.str());
    return World::load(in);
}

/// Empty square room of the given side length.
inline World empty_room(double side_m, double resolution = 0.25, std::uint64_t seed = 7) {
    const int n = static_cast<int>(std::round(side_m / resolution));
    World w(n, n, resolution, seed);
    return w;  // constructor leaves the interior free, border occupied
}

/// Round room of the given radius carved into an occupied block.
inline World circular_room(double radius_m, double resolution = 0.25) {
    const int n = static_cast<int>(std::round(2.0 * (radius_m + 1.0) / resolution));
    World w(n, n, resolution, 7);
    const double cx = n * resolution / 2.0, cy = cx;
    for (int iy = 1; iy < n - 1; ++iy)
        for (int ix = 1; ix < n - 1; ++ix) {
            const Vec2 c = w.cell_center(ix, iy);
            w.set_occupied(ix, iy, std::hypot(c.x() - cx, c.y() - cy) > radius_m);
        }
    return w;
}

/// Fully integrate the world into a world-aligned robot grid by sweeping
/// scans over a coarse lattice of free cells (test fixture).
inline RobotGrid reveal_world(const World& w, int stride = 8) {
    RobotGrid grid = RobotGrid::world_aligned(w.resolution(), w.width_m(), w.height_m());
    for (int cy = 1; cy < w.height() - 1; cy += stride)
        for (int cx = 1; cx < w.width() - 1; cx += stride) {
            if (w.occupied(cx, cy)) continue;
            const Vec2 p = w.cell_center(cx, cy);
            integrate_scan(grid, Pose2{p.x(), p.y(), 0.0}, raycast_scan(w, Pose2{p.x(), p.y(), 0.0}));
        }
    return grid;
}

}  // namespace pier::testutil
