#pragma once

#include "pier/geometry.hpp"
#include "pier/world.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace pier {

enum class Cell : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct CellIdx {
    int x = 0;
    int y = 0;
    friend bool operator==(const CellIdx&, const CellIdx&) = default;
};

/// Per-robot occupancy grid in the robot's own map frame, centered on the
/// start position. Cells only ever transition Unknown -> {Free, Occupied}.
class RobotGrid {
public:
    RobotGrid() = default;
    RobotGrid(double resolution, double half_extent_m);

    /// Grid whose cell lattice coincides with a world of the given size
    /// (origin at (0,0)); used by fixtures that work in world coordinates.
    static RobotGrid world_aligned(double resolution, double width_m, double height_m);

    double resolution() const { return resolution_; }
    int size() const { return size_; }

    bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cy >= 0 && cx < size_ && cy < size_;
    }
    Cell at(int cx, int cy) const { return cells_[idx(cx, cy)]; }
    Cell at_point(const Vec2& p) const {
        const CellIdx c = cell_of(p);
        return in_bounds(c.x, c.y) ? at(c.x, c.y) : Cell::Unknown;
    }

    /// Unknown -> known transitions only; later writes to a known cell are ignored.
    void observe(int cx, int cy, Cell value);

    CellIdx cell_of(const Vec2& p) const {
        return {static_cast<int>(std::floor((p.x() - origin_) / resolution_)),
                static_cast<int>(std::floor((p.y() - origin_) / resolution_))};
    }
    Vec2 center_of(const CellIdx& c) const {
        return {origin_ + (c.x + 0.5) * resolution_, origin_ + (c.y + 0.5) * resolution_};
    }

    std::size_t known_count() const { return known_count_; }
    bool has_known() const { return known_count_ > 0; }
    // Bounding box of known cells, inclusive.
    CellIdx known_min() const { return known_min_; }
    CellIdx known_max() const { return known_max_; }

    /// True when the straight segment a-b stays inside known free cells,
    /// sampled every `step_m` meters.
    bool segment_free(const Vec2& a, const Vec2& b, double step_m = 0.25) const;

    void export_ascii(std::ostream& out) const;

private:
    std::size_t idx(int cx, int cy) const { return static_cast<std::size_t>(cy) * size_ + cx; }

    double resolution_ = 0.25;
    double origin_ = 0.0;  // own-frame coordinate of cell (0,0) corner
    int size_ = 0;
    std::vector<Cell> cells_;
    std::size_t known_count_ = 0;
    CellIdx known_min_{0, 0};
    CellIdx known_max_{-1, -1};
};

/// Carve one scan into the grid: beam cells free up to the hit, endpoint
/// occupied iff the beam hit something before max range.
void integrate_scan(RobotGrid& grid, const Pose2& pose, const Scan& scan);

/// Free cells 4-adjacent to unknown, optionally filtered by a region
/// predicate over own-frame positions. Row-major order.
std::vector<CellIdx> detect_frontiers(
    const RobotGrid& grid,
    const std::function<bool(const Vec2&)>& region = nullptr);

struct FrontierCenter {
    Vec2 position;  // own-frame meters, snapped to a member cell center
    int size = 0;   // member cell count
};

/// 8-adjacency connected components of the frontier cells; components
/// smaller than min_cluster are dropped. Center = centroid snapped to the
/// nearest member cell.
std::vector<FrontierCenter> cluster_frontiers(const RobotGrid& grid,
                                              const std::vector<CellIdx>& cells,
                                              int min_cluster);

}  // namespace pier
