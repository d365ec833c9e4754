#pragma once

#include "pier/geometry.hpp"
#include "pier/grid.hpp"
#include "pier/world.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pier {

/// Minimal grid abstraction for the planners, so the same search runs over
/// robot maps, the ground-truth world, and test fixtures.
struct GridView {
    int width = 0;
    int height = 0;
    double resolution = 0.25;
    std::function<bool(int, int)> traversable;
};

/// 8-connected A* between cells; diagonal moves cost sqrt(2) and may not cut
/// corners. Returns the cell path including both endpoints, or nullopt.
std::optional<std::vector<CellIdx>> astar_cells(const GridView& view, CellIdx from, CellIdx to);

/// Multi-source Dijkstra distance field in meters; unreachable = +inf.
std::vector<double> dijkstra_field(const GridView& view, const std::vector<CellIdx>& sources);

struct PlanOptions {
    bool allow_unknown = false;  // rendezvous travel plans through unknown space
    int inflate_cells = 1;       // clearance from occupied cells; endpoints exempt
};

/// A* on a robot's own map. Waypoints are cell centers in the own frame
/// (collinear runs collapsed); empty result when from == to cell.
std::optional<std::vector<Vec2>> plan_path(const RobotGrid& grid, const Vec2& from, const Vec2& to,
                                           const PlanOptions& opts = {});

/// Length of the A* path in meters, +inf when unreachable.
double plan_distance(const RobotGrid& grid, const Vec2& from, const Vec2& to,
                     const PlanOptions& opts = {});

/// View of the ground-truth world's free cells (no inflation).
GridView world_view(const World& world);

/// View of a robot map's known-free cells with clearance handling.
GridView robot_view(const RobotGrid& grid, const PlanOptions& opts, CellIdx exempt_a,
                    CellIdx exempt_b);

}  // namespace pier
