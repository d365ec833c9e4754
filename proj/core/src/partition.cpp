#include "pier/partition.hpp"

#include <cmath>
#include <limits>
#include <tuple>

namespace pier {

int Partition::owner_of(const Vec2& p) const {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [id, base] : bases) {
        const double d = (p - base).squaredNorm();
        if (d < best_d - 1e-12) {  // ties keep the earlier (lower) id
            best_d = d;
            best = id;
        }
    }
    return best;
}

Partition make_partition(const std::map<int, Vec2>& component_positions) {
    Partition part;
    for (const auto& [id, p] : component_positions) part.bases.emplace_back(id, p);
    return part;
}

bool voronoi_region_test(const Vec2& p, int robot,
                         const std::map<int, Vec2>& component_positions) {
    return make_partition(component_positions).owner_of(p) == robot;
}

std::optional<Vec2> select_min_cost_center(const std::vector<std::pair<double, Vec2>>& scored) {
    std::optional<Vec2> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& [cost, center] : scored) {
        if (!std::isfinite(cost)) continue;
        if (!best || cost < best_cost - 1e-12 ||
            (std::abs(cost - best_cost) <= 1e-12 &&
             std::tie(center.y(), center.x()) < std::tie(best->y(), best->x()))) {
            best_cost = cost;
            best = center;
        }
    }
    return best;
}

}  // namespace pier
