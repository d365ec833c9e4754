#include "pier/fhtmap.hpp"

#include "pier/planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace pier {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int FhtMap::add_node(NodeKind kind, const Vec2& p, const Rect& rect,
                     std::shared_ptr<const MainNodeData> features) {
    FhtNode node;
    node.id = static_cast<int>(nodes_.size());
    node.kind = kind;
    node.p = p;
    node.rect = rect;
    node.features = std::move(features);
    if (kind == NodeKind::Main) ++main_count_;
    nodes_.push_back(std::move(node));
    adj_.emplace_back();
    return nodes_.back().id;
}

void FhtMap::add_edge(int a, int b, double length) {
    if (a == b || has_edge(a, b)) return;
    const double w = length >= 0.0 ? length : (nodes_[a].p - nodes_[b].p).norm();
    edges_.push_back({std::min(a, b), std::max(a, b), w});
    adj_[a].emplace_back(b, w);
    adj_[b].emplace_back(a, w);
}

bool FhtMap::has_edge(int a, int b) const {
    for (const auto& [v, w] : adj_[static_cast<std::size_t>(a)])
        if (v == b) return true;
    return false;
}

std::vector<double> FhtMap::dijkstra(const std::vector<std::pair<int, double>>& seeds) const {
    std::vector<double> dist(nodes_.size(), kInf);
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    for (const auto& [id, cost] : seeds) {
        if (cost < dist[id]) {
            dist[id] = cost;
            open.push({cost, id});
        }
    }
    while (!open.empty()) {
        const auto [d, u] = open.top();
        open.pop();
        if (d > dist[u] + 1e-15) continue;
        for (const auto& [v, w] : adj_[u]) {
            const double nd = d + w;
            if (nd < dist[v] - 1e-15) {
                dist[v] = nd;
                open.push({nd, v});
            }
        }
    }
    return dist;
}

FhtMap FhtMap::structural_copy() const {
    FhtMap copy(owner_);
    for (const auto& n : nodes_) copy.add_node(n.kind, n.p, n.rect, nullptr);
    copy.main_count_ = main_count_;  // kinds are preserved even without payloads
    for (const auto& e : edges_) copy.add_edge(e.a, e.b, e.length);
    return copy;
}

double density(const FhtMap& map, const Vec2& p, double sigma_c) {
    double d = 0.0;
    const double inv = 1.0 / (sigma_c * sigma_c);
    for (const auto& n : map.nodes())
        if (n.is_main()) d += std::exp(-(p - n.p).squaredNorm() * inv);
    return d;
}

double heat(const Scan& scan, double r_open, int min_width_deg) {
    // Wraparound runs of beams with range beyond r_open.
    std::array<bool, kScanBeams> open{};
    int open_total = 0;
    for (int i = 0; i < kScanBeams; ++i) {
        open[i] = scan.ranges[i] > r_open;
        open_total += open[i];
    }
    if (open_total == kScanBeams) return 0.25;  // fully open: one 360-degree run
    if (open_total == 0) return 0.0;

    // Start at a closed beam so runs never straddle the seam.
    int start = 0;
    while (open[start]) ++start;
    int openings = 0;
    int run = 0;
    for (int k = 0; k < kScanBeams; ++k) {
        const int i = (start + k) % kScanBeams;
        if (open[i]) {
            ++run;
        } else {
            if (run > min_width_deg) ++openings;
            run = 0;
        }
    }
    if (run > min_width_deg) ++openings;
    return std::min(openings, 4) / 4.0;
}

void CandidateBuffer::push(Candidate c) {
    if (items_.size() == capacity_) items_.erase(items_.begin());
    items_.push_back(std::move(c));
}

std::optional<std::size_t> select_main_node(const CandidateBuffer& buffer, const FhtMap& map,
                                            const SelectionParams& params) {
    std::optional<std::size_t> best;
    double best_score = kInf;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const Candidate& c = buffer[i];
        const double d = density(map, c.position, params.sigma_c);
        if (!(d > params.gamma2 && d < params.gamma1)) continue;
        bool similar = false;
        for (const auto& n : map.nodes()) {
            if (!n.is_main()) continue;
            if (dot(c.phi, n.features->phi) >= params.theta_sim) {
                similar = true;
                break;
            }
        }
        if (similar) continue;
        const double score = params.omega1 * d - params.omega2 * c.heat_value;
        if (score < best_score) {  // strict: ties keep the earliest candidate
            best_score = score;
            best = i;
        }
    }
    return best;
}

Rect free_space_rect(const RobotGrid& grid, const Vec2& p, double max_half_m) {
    const CellIdx seed = grid.cell_of(p);
    if (grid.at(seed.x, seed.y) != Cell::Free)
        throw std::invalid_argument("free_space_rect: seed position not known-free");

    const int max_cells = static_cast<int>(max_half_m / grid.resolution());
    int lo_x = seed.x, hi_x = seed.x, lo_y = seed.y, hi_y = seed.y;
    bool can[4] = {true, true, true, true};  // +x, -x, +y, -y

    auto column_free = [&](int cx, int y0, int y1) {
        if (!grid.in_bounds(cx, y0) || !grid.in_bounds(cx, y1)) return false;
        for (int y = y0; y <= y1; ++y)
            if (grid.at(cx, y) != Cell::Free) return false;
        return true;
    };
    auto row_free = [&](int cy, int x0, int x1) {
        if (!grid.in_bounds(x0, cy) || !grid.in_bounds(x1, cy)) return false;
        for (int x = x0; x <= x1; ++x)
            if (grid.at(x, cy) != Cell::Free) return false;
        return true;
    };

    bool grew = true;
    while (grew) {
        grew = false;
        if (can[0] && hi_x - seed.x < max_cells && column_free(hi_x + 1, lo_y, hi_y)) {
            ++hi_x;
            grew = true;
        } else {
            can[0] = false;
        }
        if (can[1] && seed.x - lo_x < max_cells && column_free(lo_x - 1, lo_y, hi_y)) {
            --lo_x;
            grew = true;
        } else {
            can[1] = false;
        }
        if (can[2] && hi_y - seed.y < max_cells && row_free(hi_y + 1, lo_x, hi_x)) {
            ++hi_y;
            grew = true;
        } else {
            can[2] = false;
        }
        if (can[3] && seed.y - lo_y < max_cells && row_free(lo_y - 1, lo_x, hi_x)) {
            --lo_y;
            grew = true;
        } else {
            can[3] = false;
        }
    }

    const double res = grid.resolution();
    const Vec2 lo_c = grid.center_of({lo_x, lo_y});
    const Vec2 hi_c = grid.center_of({hi_x, hi_y});
    return {lo_c.x() - 0.5 * res, hi_c.x() + 0.5 * res, lo_c.y() - 0.5 * res, hi_c.y() + 0.5 * res};
}

int attach_node(FhtMap& map, NodeKind kind, const Vec2& p, const Rect& rect,
                std::shared_ptr<const MainNodeData> features, const RobotGrid& grid) {
    const int prev = map.last_node_id();
    const int id = map.add_node(kind, p, rect, std::move(features));
    if (prev < 0) return id;

    if (grid.segment_free(p, map.node(prev).p)) {
        map.add_edge(id, prev);
    } else {
        // Nearest node reachable through known free space.
        std::vector<int> order;
        for (const auto& n : map.nodes())
            if (n.id != id) order.push_back(n.id);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return (map.node(a).p - p).squaredNorm() < (map.node(b).p - p).squaredNorm();
        });
        PlanOptions opts;
        opts.inflate_cells = 0;
        for (int cand : order) {
            if (grid.segment_free(p, map.node(cand).p)) {
                map.add_edge(id, cand);
                break;
            }
            // Detour link: weight it by the validated path, not the chord,
            // so the graph never tunnels through walls.
            const double len = plan_distance(grid, p, map.node(cand).p, opts);
            if (std::isfinite(len)) {
                map.add_edge(id, cand, len);
                break;
            }
        }
    }

    // Rectangle containment certifies a free straight segment in both cases.
    for (const auto& n : map.nodes()) {
        if (n.id == id) continue;
        if (n.rect.contains(p) || rect.contains(n.p)) map.add_edge(id, n.id);
    }
    // Nearby visible nodes also link up; doorway crossings in particular
    // need these so path lengths hug the true geodesics.
    constexpr double kLosRadius = 4.0;
    for (const auto& n : map.nodes()) {
        if (n.id == id || map.has_edge(id, n.id)) continue;
        if ((n.p - p).norm() > kLosRadius) continue;
        if (grid.segment_free(p, n.p)) map.add_edge(id, n.id);
    }
    return id;
}

namespace {

// Attachment legs for a point endpoint: every node whose rectangle contains it.
std::vector<std::pair<int, double>> attachments(const FhtMap& map, const Vec2& p) {
    std::vector<std::pair<int, double>> out;
    for (const auto& n : map.nodes())
        if (n.rect.contains(p)) out.emplace_back(n.id, (n.p - p).norm());
    return out;
}

}  // namespace

std::optional<double> topo_path_length(const FhtMap& map, const TopoEndpoint& a,
                                       const TopoEndpoint& b) {
    if (map.empty()) return std::nullopt;
    std::vector<std::pair<int, double>> seeds;
    if (a.node_id) {
        seeds.emplace_back(*a.node_id, 0.0);
    } else {
        seeds = attachments(map, a.point);
        if (seeds.empty()) return std::nullopt;
    }

    if (b.node_id) {
        if (a.node_id && *a.node_id == *b.node_id) return 0.0;
        const auto dist = map.dijkstra(seeds);
        return dist[*b.node_id];
    }
    const auto legs = attachments(map, b.point);
    if (legs.empty()) return std::nullopt;
    if (!a.node_id) {
        // Both points may share a rectangle; the direct chord inside it wins
        // whenever it is shorter than any node detour.
        for (const auto& [na, da] : seeds)
            for (const auto& [nb, db] : legs)
                if (na == nb && (a.point - b.point).norm() < da + db)
                    return (a.point - b.point).norm();
    }
    const auto dist = map.dijkstra(seeds);
    double best = kInf;
    for (const auto& [id, leg] : legs) best = std::min(best, dist[id] + leg);
    return best;
}

double nav_cost(const FhtMap& map, const RobotGrid& grid, const Vec2& from, const Vec2& to) {
    if ((from - to).norm() < 1e-9) return 0.0;

    PlanOptions opts;
    opts.inflate_cells = 0;
    // Nodes in increasing distance order; the first with a free segment wins.
    auto nearest_visible = [&](const Vec2& p) -> std::optional<std::pair<int, double>> {
        std::vector<std::pair<double, int>> order;
        order.reserve(map.nodes().size());
        for (const auto& n : map.nodes()) order.emplace_back((n.p - p).squaredNorm(), n.id);
        std::sort(order.begin(), order.end());
        for (const auto& [d2, id] : order)
            if (grid.segment_free(p, map.node(id).p)) return {{id, std::sqrt(d2)}};
        return std::nullopt;
    };

    if (!map.empty()) {
        const auto from_attach = nearest_visible(from);
        const auto to_attach = nearest_visible(to);
        if (from_attach && to_attach) {
            if (from_attach->first == to_attach->first && grid.segment_free(from, to))
                return (from - to).norm();
            const auto dist = map.dijkstra({{from_attach->first, from_attach->second}});
            const double total = dist[to_attach->first] + to_attach->second;
            if (std::isfinite(total)) return total;
        }
    }
    return plan_distance(grid, from, to, opts);
}

}  // namespace pier
