#include "pier/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace pier {

namespace {

constexpr double kSqrt2 = 1.41421356237309515;

struct HeapEntry {
    double f;
    double g;
    int cell;
    bool operator>(const HeapEntry& o) const {
        if (f != o.f) return f > o.f;
        if (g != o.g) return g > o.g;
        return cell > o.cell;  // fixed tie-break keeps expansions deterministic
    }
};

inline double octile(int dx, int dy) {
    dx = std::abs(dx);
    dy = std::abs(dy);
    return (dx > dy) ? (dx - dy) + kSqrt2 * dy : (dy - dx) + kSqrt2 * dx;
}

}  // namespace

std::optional<std::vector<CellIdx>> astar_cells(const GridView& view, CellIdx from, CellIdx to) {
    const int w = view.width, h = view.height;
    auto in = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h; };
    if (!in(from.x, from.y) || !in(to.x, to.y)) return std::nullopt;
    if (!view.traversable(from.x, from.y) || !view.traversable(to.x, to.y)) return std::nullopt;

    const int n = w * h;
    std::vector<double> g(n, std::numeric_limits<double>::infinity());
    std::vector<int> parent(n, -1);
    std::vector<std::uint8_t> closed(n, 0);
    auto id = [&](int x, int y) { return y * w + x; };

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> open;
    g[id(from.x, from.y)] = 0.0;
    open.push({octile(to.x - from.x, to.y - from.y), 0.0, id(from.x, from.y)});

    while (!open.empty()) {
        const HeapEntry top = open.top();
        open.pop();
        if (closed[top.cell]) continue;
        closed[top.cell] = 1;
        const int cx = top.cell % w, cy = top.cell / w;
        if (cx == to.x && cy == to.y) {
            std::vector<CellIdx> path;
            for (int c = top.cell; c != -1; c = parent[c]) path.push_back({c % w, c / w});
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = cx + dx, ny = cy + dy;
                if (!in(nx, ny) || !view.traversable(nx, ny)) continue;
                if (dx != 0 && dy != 0 &&
                    (!view.traversable(cx + dx, cy) || !view.traversable(cx, cy + dy)))
                    continue;  // no corner cutting
                const double step = (dx != 0 && dy != 0) ? kSqrt2 : 1.0;
                const double ng = top.g + step;
                const int nid = id(nx, ny);
                if (ng < g[nid] - 1e-12) {
                    g[nid] = ng;
                    parent[nid] = top.cell;
                    open.push({ng + octile(to.x - nx, to.y - ny), ng, nid});
                }
            }
        }
    }
    return std::nullopt;
}

namespace {

// Extended neighborhood for near-Euclidean distance fields (~1.3% worst
// case); every move lists the cells its segment sweeps, all must be free.
struct FieldMove {
    int dx, dy;
    double cost;
    std::vector<std::pair<int, int>> crossed;
};

const std::vector<FieldMove>& field_moves() {
    static const std::vector<FieldMove> moves = [] {
        std::vector<FieldMove> out;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                FieldMove m{dx, dy, (dx != 0 && dy != 0) ? kSqrt2 : 1.0, {}};
                if (dx != 0 && dy != 0) m.crossed = {{dx, 0}, {0, dy}};
                out.push_back(std::move(m));
            }
        auto add_long = [&](int dx, int dy, double cost,
                            std::vector<std::pair<int, int>> crossed) {
            for (int sx = -1; sx <= 1; sx += 2) {
                for (int sy = -1; sy <= 1; sy += 2) {
                    FieldMove m{dx * sx, dy * sy, cost, {}};
                    for (auto [cx, cy] : crossed) m.crossed.push_back({cx * sx, cy * sy});
                    out.push_back(std::move(m));
                    FieldMove t{dy * sx, dx * sy, cost, {}};
                    for (auto [cx, cy] : crossed) t.crossed.push_back({cy * sx, cx * sy});
                    out.push_back(std::move(t));
                }
            }
        };
        // Knight moves and their 1:3 cousins (conservative sweeps).
        add_long(1, 2, std::sqrt(5.0), {{0, 1}, {1, 1}});
        add_long(1, 3, std::sqrt(10.0), {{0, 1}, {0, 2}, {1, 1}, {1, 2}});
        return out;
    }();
    return moves;
}

}  // namespace

std::vector<double> dijkstra_field(const GridView& view, const std::vector<CellIdx>& sources) {
    const int w = view.width, h = view.height;
    const int n = w * h;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> closed(n, 0);
    auto in = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h; };
    auto id = [&](int x, int y) { return y * w + x; };

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> open;
    for (const auto& s : sources) {
        if (!in(s.x, s.y) || !view.traversable(s.x, s.y)) continue;
        dist[id(s.x, s.y)] = 0.0;
        open.push({0.0, 0.0, id(s.x, s.y)});
    }
    while (!open.empty()) {
        const HeapEntry top = open.top();
        open.pop();
        if (closed[top.cell]) continue;
        closed[top.cell] = 1;
        const int cx = top.cell % w, cy = top.cell / w;
        for (const FieldMove& m : field_moves()) {
            const int nx = cx + m.dx, ny = cy + m.dy;
            if (!in(nx, ny) || !view.traversable(nx, ny)) continue;
            bool blocked = false;
            for (const auto& [ix, iy] : m.crossed) {
                if (!view.traversable(cx + ix, cy + iy)) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            const double nd = top.g + m.cost;
            const int nid = id(nx, ny);
            if (nd < dist[nid] - 1e-12) {
                dist[nid] = nd;
                open.push({nd, nd, nid});
            }
        }
    }
    for (auto& d : dist) d *= view.resolution;
    return dist;
}

GridView world_view(const World& world) {
    GridView v;
    v.width = world.width();
    v.height = world.height();
    v.resolution = world.resolution();
    v.traversable = [&world](int x, int y) { return !world.occupied(x, y); };
    return v;
}

GridView robot_view(const RobotGrid& grid, const PlanOptions& opts, CellIdx exempt_a,
                    CellIdx exempt_b) {
    GridView v;
    v.width = grid.size();
    v.height = grid.size();
    v.resolution = grid.resolution();
    const int inflate = opts.inflate_cells;
    const bool allow_unknown = opts.allow_unknown;
    v.traversable = [&grid, inflate, allow_unknown, exempt_a, exempt_b](int x, int y) {
        const Cell c = grid.at(x, y);
        if (c == Cell::Occupied) return false;
        if (c == Cell::Unknown && !allow_unknown) return false;
        if ((x == exempt_a.x && y == exempt_a.y) || (x == exempt_b.x && y == exempt_b.y))
            return true;
        for (int dy = -inflate; dy <= inflate; ++dy)
            for (int dx = -inflate; dx <= inflate; ++dx) {
                if (dx == 0 && dy == 0) continue;
                if (grid.in_bounds(x + dx, y + dy) && grid.at(x + dx, y + dy) == Cell::Occupied)
                    return false;
            }
        return true;
    };
    return v;
}

namespace {

// Windowed A* over a precomputed traversability bitmap: avoids touching the
// full (large, mostly unknown) robot grid and the per-query inflation scans.
std::optional<std::vector<CellIdx>> plan_cells_fast(const RobotGrid& grid, CellIdx from,
                                                    CellIdx to, const PlanOptions& opts) {
    if (!grid.has_known()) return std::nullopt;
    CellIdx lo = grid.known_min();
    CellIdx hi = grid.known_max();
    lo.x = std::min({lo.x, from.x, to.x});
    lo.y = std::min({lo.y, from.y, to.y});
    hi.x = std::max({hi.x, from.x, to.x});
    hi.y = std::max({hi.y, from.y, to.y});
    const int margin = 4;
    lo.x = std::max(0, lo.x - margin);
    lo.y = std::max(0, lo.y - margin);
    hi.x = std::min(grid.size() - 1, hi.x + margin);
    hi.y = std::min(grid.size() - 1, hi.y + margin);
    const int w = hi.x - lo.x + 1;
    const int h = hi.y - lo.y + 1;
    if (w <= 0 || h <= 0) return std::nullopt;

    std::vector<std::uint8_t> open_cell(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Cell c = grid.at(lo.x + x, lo.y + y);
            open_cell[static_cast<std::size_t>(y) * w + x] =
                (c == Cell::Free || (c == Cell::Unknown && opts.allow_unknown)) ? 1 : 0;
        }
    if (opts.inflate_cells > 0) {
        const int inflate = opts.inflate_cells;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (grid.at(lo.x + x, lo.y + y) != Cell::Occupied) continue;
                for (int dy = -inflate; dy <= inflate; ++dy)
                    for (int dx = -inflate; dx <= inflate; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx >= 0 && ny >= 0 && nx < w && ny < h)
                            open_cell[static_cast<std::size_t>(ny) * w + nx] = 0;
                    }
            }
    }
    // Endpoints are exempt from inflation but must not sit in a wall.
    auto window_id = [&](CellIdx c) {
        return static_cast<std::size_t>(c.y - lo.y) * w + (c.x - lo.x);
    };
    auto endpoint_open = [&](CellIdx c) -> std::uint8_t {
        const Cell cell = grid.at(c.x, c.y);
        return (cell == Cell::Free || (cell == Cell::Unknown && opts.allow_unknown)) ? 1 : 0;
    };
    open_cell[window_id(from)] = endpoint_open(from);
    open_cell[window_id(to)] = endpoint_open(to);

    GridView view;
    view.width = w;
    view.height = h;
    view.resolution = grid.resolution();
    view.traversable = [&open_cell, w](int x, int y) {
        return open_cell[static_cast<std::size_t>(y) * w + x] != 0;
    };
    auto cells = astar_cells(view, {from.x - lo.x, from.y - lo.y}, {to.x - lo.x, to.y - lo.y});
    if (!cells) return std::nullopt;
    for (auto& c : *cells) {
        c.x += lo.x;
        c.y += lo.y;
    }
    return cells;
}

}  // namespace

std::optional<std::vector<Vec2>> plan_path(const RobotGrid& grid, const Vec2& from, const Vec2& to,
                                           const PlanOptions& opts) {
    const CellIdx a = grid.cell_of(from);
    const CellIdx b = grid.cell_of(to);
    const auto cells = plan_cells_fast(grid, a, b, opts);
    if (!cells) return std::nullopt;
    std::vector<Vec2> path;
    path.reserve(cells->size());
    for (std::size_t i = 0; i < cells->size(); ++i) {
        // Collapse collinear runs to keep waypoint lists short.
        if (i > 0 && i + 1 < cells->size()) {
            const CellIdx& prev = (*cells)[i - 1];
            const CellIdx& cur = (*cells)[i];
            const CellIdx& next = (*cells)[i + 1];
            if (next.x - cur.x == cur.x - prev.x && next.y - cur.y == cur.y - prev.y) continue;
        }
        path.push_back(grid.center_of((*cells)[i]));
    }
    if (!path.empty()) path.back() = to;  // land on the exact goal point
    return path;
}

double plan_distance(const RobotGrid& grid, const Vec2& from, const Vec2& to,
                     const PlanOptions& opts) {
    const auto path = plan_path(grid, from, to, opts);
    if (!path) return std::numeric_limits<double>::infinity();
    double len = 0.0;
    Vec2 prev = from;
    for (const auto& p : *path) {
        len += (p - prev).norm();
        prev = p;
    }
    return len;
}

}  // namespace pier
