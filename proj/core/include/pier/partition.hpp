#pragma once

#include "pier/geometry.hpp"

#include <map>
#include <optional>
#include <vector>
#include <vector>

namespace pier {

/// Voronoi assignment over one connected component's robot positions in the
/// shared reference frame; ties go to the lowest robot id.
struct Partition {
    std::vector<std::pair<int, Vec2>> bases;  // (robot id, position), sorted by id

    int owner_of(const Vec2& p) const;
    bool in_region(const Vec2& p, int robot) const { return owner_of(p) == robot; }
};

Partition make_partition(const std::map<int, Vec2>& component_positions);

/// Membership test as a standalone predicate (the Voronoi region definition).
bool voronoi_region_test(const Vec2& p, int robot, const std::map<int, Vec2>& component_positions);

/// Cheapest-center rule shared by the NBV strategies: least cost, ties by
/// (y, x); infinite costs never win.
std::optional<Vec2> select_min_cost_center(const std::vector<std::pair<double, Vec2>>& scored);

}  // namespace pier
