#include "pier/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <unordered_set>

namespace pier {

RobotGrid::RobotGrid(double resolution, double half_extent_m) : resolution_(resolution) {
    const int half_cells = static_cast<int>(std::ceil(half_extent_m / resolution)) + 1;
    size_ = 2 * half_cells + 1;
    origin_ = -(half_cells + 0.5) * resolution_;
    cells_.assign(static_cast<std::size_t>(size_) * size_, Cell::Unknown);
}

RobotGrid RobotGrid::world_aligned(double resolution, double width_m, double height_m) {
    RobotGrid g;
    g.resolution_ = resolution;
    g.origin_ = 0.0;
    g.size_ = static_cast<int>(std::ceil(std::max(width_m, height_m) / resolution)) + 1;
    g.cells_.assign(static_cast<std::size_t>(g.size_) * g.size_, Cell::Unknown);
    return g;
}

void RobotGrid::observe(int cx, int cy, Cell value) {
    if (!in_bounds(cx, cy) || value == Cell::Unknown) return;
    Cell& cell = cells_[idx(cx, cy)];
    if (cell != Cell::Unknown) return;
    cell = value;
    ++known_count_;
    if (known_count_ == 1) {
        known_min_ = known_max_ = {cx, cy};
    } else {
        known_min_.x = std::min(known_min_.x, cx);
        known_min_.y = std::min(known_min_.y, cy);
        known_max_.x = std::max(known_max_.x, cx);
        known_max_.y = std::max(known_max_.y, cy);
    }
}

bool RobotGrid::segment_free(const Vec2& a, const Vec2& b, double step_m) const {
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / step_m)));
    for (int i = 0; i <= steps; ++i) {
        const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
        if (at_point(p) != Cell::Free) return false;
    }
    return true;
}

void RobotGrid::export_ascii(std::ostream& out) const {
    const CellIdx lo = has_known() ? known_min_ : CellIdx{0, 0};
    const CellIdx hi = has_known() ? known_max_ : CellIdx{-1, -1};
    for (int cy = hi.y; cy >= lo.y; --cy) {
        for (int cx = lo.x; cx <= hi.x; ++cx) {
            const Cell c = at(cx, cy);
            out << (c == Cell::Unknown ? '?' : c == Cell::Free ? '.' : 'X');
        }
        out << "\n";
    }
}

void integrate_scan(RobotGrid& grid, const Pose2& pose, const Scan& scan) {
    const double res = grid.resolution();
    const Vec2 origin = pose.position();
    const double eps = 1e-4;

    for (int i = 0; i < kScanBeams; ++i) {
        const double range = scan.ranges[i];
        const bool hit = range < scan.max_range - eps;
        const double angle = pose.theta + i * (M_PI / 180.0);
        const double dx = std::cos(angle), dy = std::sin(angle);

        // Same boundary traversal as the sensor model, so cells marked free
        // are exactly the cells the beam passed through.
        CellIdx cell = grid.cell_of(origin);
        const int step_x = dx > 0.0 ? 1 : -1;
        const int step_y = dy > 0.0 ? 1 : -1;
        const double inf = std::numeric_limits<double>::infinity();
        const double t_delta_x = dx != 0.0 ? std::abs(res / dx) : inf;
        const double t_delta_y = dy != 0.0 ? std::abs(res / dy) : inf;
        double t_max_x = inf, t_max_y = inf;
        if (dx != 0.0) {
            const double cell_lo = grid.center_of(cell).x() - 0.5 * res;
            const double edge = dx > 0.0 ? cell_lo + res : cell_lo;
            t_max_x = (edge - origin.x()) / dx;
        }
        if (dy != 0.0) {
            const double cell_lo = grid.center_of(cell).y() - 0.5 * res;
            const double edge = dy > 0.0 ? cell_lo + res : cell_lo;
            t_max_y = (edge - origin.y()) / dy;
        }

        grid.observe(cell.x, cell.y, Cell::Free);
        while (true) {
            double t;
            if (t_max_x < t_max_y) {
                t = t_max_x;
                t_max_x += t_delta_x;
                cell.x += step_x;
            } else {
                t = t_max_y;
                t_max_y += t_delta_y;
                cell.y += step_y;
            }
            if (t >= range - eps) break;
            grid.observe(cell.x, cell.y, Cell::Free);
        }
        if (hit) grid.observe(cell.x, cell.y, Cell::Occupied);
    }
}

std::vector<CellIdx> detect_frontiers(const RobotGrid& grid,
                                      const std::function<bool(const Vec2&)>& region) {
    std::vector<CellIdx> out;
    if (!grid.has_known()) return out;
    const CellIdx lo = grid.known_min();
    const CellIdx hi = grid.known_max();
    for (int cy = lo.y; cy <= hi.y; ++cy) {
        for (int cx = lo.x; cx <= hi.x; ++cx) {
            if (grid.at(cx, cy) != Cell::Free) continue;
            const bool frontier =
                (grid.in_bounds(cx + 1, cy) && grid.at(cx + 1, cy) == Cell::Unknown) ||
                (grid.in_bounds(cx - 1, cy) && grid.at(cx - 1, cy) == Cell::Unknown) ||
                (grid.in_bounds(cx, cy + 1) && grid.at(cx, cy + 1) == Cell::Unknown) ||
                (grid.in_bounds(cx, cy - 1) && grid.at(cx, cy - 1) == Cell::Unknown);
            if (!frontier) continue;
            if (region && !region(grid.center_of({cx, cy}))) continue;
            out.push_back({cx, cy});
        }
    }
    return out;
}

std::vector<FrontierCenter> cluster_frontiers(const RobotGrid& grid,
                                              const std::vector<CellIdx>& cells,
                                              int min_cluster) {
    std::vector<FrontierCenter> centers;
    if (cells.empty()) return centers;

    auto key = [](const CellIdx& c) {
        return (static_cast<std::int64_t>(c.x) << 32) ^ static_cast<std::uint32_t>(c.y);
    };
    std::unordered_set<std::int64_t> unvisited;
    unvisited.reserve(cells.size() * 2);
    for (const auto& c : cells) unvisited.insert(key(c));

    for (const auto& seed : cells) {
        if (!unvisited.erase(key(seed))) continue;
        std::vector<CellIdx> members{seed};
        std::queue<CellIdx> frontier_queue;
        frontier_queue.push(seed);
        while (!frontier_queue.empty()) {
            const CellIdx c = frontier_queue.front();
            frontier_queue.pop();
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const CellIdx nb{c.x + dx, c.y + dy};
                    if (unvisited.erase(key(nb))) {
                        members.push_back(nb);
                        frontier_queue.push(nb);
                    }
                }
            }
        }
        if (static_cast<int>(members.size()) < min_cluster) continue;

        Vec2 centroid{0.0, 0.0};
        for (const auto& m : members) centroid += grid.center_of(m);
        centroid /= static_cast<double>(members.size());
        const CellIdx* best = &members.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& m : members) {
            const double d = (grid.center_of(m) - centroid).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = &m;
            }
        }
        centers.push_back({grid.center_of(*best), static_cast<int>(members.size())});
    }
    return centers;
}

}  // namespace pier
