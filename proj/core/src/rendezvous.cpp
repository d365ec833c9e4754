#include "pier/rendezvous.hpp"

#include "pier/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_set>
#include <stdexcept>

namespace pier {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool MergedMap::connected() const {
    if (nodes_.empty()) return false;
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (const auto& [v, w] : adj_[u]) {
            (void)w;
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                q.push(v);
            }
        }
    }
    return count == nodes_.size();
}

bool MergedMap::node_contains(int index, const Vec2& p_ref) const {
    const MergedNode& n = nodes_[static_cast<std::size_t>(index)];
    const Vec2 p_own = node_inv_frame_[static_cast<std::size_t>(index)].apply(p_ref);
    return n.rect_own.contains(p_own);
}

std::vector<int> MergedMap::containing(const Vec2& p_ref) const {
    std::vector<int> out;
    if (bins_x_ == 0) return out;
    const int bx = std::clamp(static_cast<int>((p_ref.x() - bin_x0_) / bin_size_), 0, bins_x_ - 1);
    const int by = std::clamp(static_cast<int>((p_ref.y() - bin_y0_) / bin_size_), 0, bins_y_ - 1);
    for (int idx : bins_[static_cast<std::size_t>(by) * bins_x_ + bx])
        if (node_contains(idx, p_ref)) out.push_back(idx);
    return out;
}

std::vector<double> MergedMap::dijkstra(const std::vector<std::pair<int, double>>& seeds) const {
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

void MergedMap::add_edge_once(int a, int b, double length) {
    if (a == b) return;
    for (const auto& [v, w] : adj_[static_cast<std::size_t>(a)])
        if (v == b) return;
    edges_.emplace_back(std::min(a, b), std::max(a, b));
    const double w = length >= 0.0 ? length : (nodes_[a].p_ref - nodes_[b].p_ref).norm();
    adj_[a].emplace_back(b, w);
    adj_[b].emplace_back(a, w);
}

void MergedMap::build_index() {
    if (nodes_.empty()) return;
    double x0 = kInf, y0 = kInf, x1 = -kInf, y1 = -kInf;
    std::vector<Rect> boxes(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        // Bounding box of the (possibly rotated) rectangle in the ref frame.
        const MergedNode& n = nodes_[i];
        const Pose2& f = frames_.at(n.robot);
        const Rect& r = n.rect_own;
        Rect box{kInf, -kInf, kInf, -kInf};
        for (const Vec2 corner : {Vec2{r.x_min, r.y_min}, Vec2{r.x_max, r.y_min},
                                  Vec2{r.x_min, r.y_max}, Vec2{r.x_max, r.y_max}}) {
            const Vec2 c = f.apply(corner);
            box.x_min = std::min(box.x_min, c.x());
            box.x_max = std::max(box.x_max, c.x());
            box.y_min = std::min(box.y_min, c.y());
            box.y_max = std::max(box.y_max, c.y());
        }
        boxes[i] = box;
        x0 = std::min(x0, box.x_min);
        y0 = std::min(y0, box.y_min);
        x1 = std::max(x1, box.x_max);
        y1 = std::max(y1, box.y_max);
    }
    bin_x0_ = x0;
    bin_y0_ = y0;
    bins_x_ = std::max(1, static_cast<int>((x1 - x0) / bin_size_) + 1);
    bins_y_ = std::max(1, static_cast<int>((y1 - y0) / bin_size_) + 1);
    bins_.assign(static_cast<std::size_t>(bins_x_) * bins_y_, {});
    node_bins_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Rect& box = boxes[i];
        const int bx0 = std::clamp(static_cast<int>((box.x_min - x0) / bin_size_), 0, bins_x_ - 1);
        const int bx1 = std::clamp(static_cast<int>((box.x_max - x0) / bin_size_), 0, bins_x_ - 1);
        const int by0 = std::clamp(static_cast<int>((box.y_min - y0) / bin_size_), 0, bins_y_ - 1);
        const int by1 = std::clamp(static_cast<int>((box.y_max - y0) / bin_size_), 0, bins_y_ - 1);
        node_bins_[i] = {bx0, bx1, by0, by1};
        for (int by = by0; by <= by1; ++by)
            for (int bx = bx0; bx <= bx1; ++bx)
                bins_[static_cast<std::size_t>(by) * bins_x_ + bx].push_back(static_cast<int>(i));
    }
}

std::vector<int> MergedMap::bin_superset(int index) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<int> out;
    const auto [bx0, bx1, by0, by1] = node_bins_[static_cast<std::size_t>(index)];
    for (int by = by0; by <= by1; ++by)
        for (int bx = bx0; bx <= bx1; ++bx)
            for (int j : bins_[static_cast<std::size_t>(by) * bins_x_ + bx])
                if (!seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    out.push_back(j);
                }
    return out;
}

MergedMap merge_maps(const std::vector<FhtMap>& maps,
                     const std::vector<RpMeasurement>& measurements,
                     const std::map<int, Pose2>& frames) {
    MergedMap merged;
    merged.frames_ = frames;

    std::map<std::pair<int, int>, int> id_of;  // (robot, orig id) -> merged index
    for (const auto& map : maps) {
        const auto frame_it = frames.find(map.owner());
        if (frame_it == frames.end())
            throw std::invalid_argument("merge_maps: missing frame for robot");
        for (const auto& n : map.nodes()) {
            MergedNode mn;
            mn.robot = map.owner();
            mn.orig_id = n.id;
            mn.kind = n.kind;
            mn.p_ref = frame_it->second.apply(n.p);
            mn.rect_own = n.rect;
            id_of[{map.owner(), n.id}] = static_cast<int>(merged.nodes_.size());
            merged.nodes_.push_back(mn);
            merged.node_inv_frame_.push_back(frame_it->second.inverse());
            merged.adj_.emplace_back();
        }
    }
    for (const auto& map : maps)
        for (const auto& e : map.edges())
            merged.add_edge_once(id_of.at({map.owner(), e.a}), id_of.at({map.owner(), e.b}),
                                 e.length);

    const auto intra = merged.edges_.size();

    // Rule 1: an estimated RP links the estimating robot's node to the
    // matched node.
    for (const auto& m : measurements) {
        if (m.observer_node < 0 || m.source_node < 0) continue;
        const auto a = id_of.find({m.from_robot, m.observer_node});
        const auto b = id_of.find({m.source_robot, m.source_node});
        if (a == id_of.end() || b == id_of.end()) continue;
        merged.add_edge_once(a->second, b->second);
    }

    // Rule 2: node inside another node's free rectangle.
    merged.build_index();
    for (std::size_t i = 0; i < merged.nodes_.size(); ++i) {
        for (int j : merged.containing(merged.nodes_[i].p_ref)) {
            if (static_cast<std::size_t>(j) == i) continue;
            merged.add_edge_once(static_cast<int>(i), j);
        }
    }

    merged.inter_edges_ = static_cast<int>(merged.edges_.size() - intra);
    return merged;
}

RendezvousEvaluator::RendezvousEvaluator(const MergedMap& merged,
                                         const std::vector<Vec2>& robot_positions_ref)
    : merged_(merged), robot_positions_(robot_positions_ref) {
    // Graph neighbors sitting inside a node's rectangle allow hops to be
    // cut short: u -> p is a chord of rect(v) whenever u, p are both inside.
    in_rect_nbrs_.resize(merged.nodes().size());
    for (std::size_t v = 0; v < merged.nodes().size(); ++v)
        for (const auto& [u, w] : merged.adjacency()[v])
            if (merged.node_contains(static_cast<int>(v), merged.nodes()[u].p_ref))
                in_rect_nbrs_[v].push_back(u);

    robot_stride_ = robot_positions_ref.size();
    node_dist_.assign(merged.nodes().size() * robot_stride_, kInf);
    robot_hosts_.reserve(robot_positions_ref.size());
    std::size_t robot_index = 0;
    for (const Vec2& pos : robot_positions_ref) {
        std::vector<int> hosts = merged.containing(pos);
        std::vector<std::pair<int, double>> seeds;
        for (int idx : hosts) {
            seeds.emplace_back(idx, (merged.nodes()[idx].p_ref - pos).norm());
            // Start-side cut: any node inside a shared rectangle is directly
            // reachable by a certified chord.
            for (int u : in_rect_nbrs_[static_cast<std::size_t>(idx)])
                seeds.emplace_back(u, (merged.nodes()[u].p_ref - pos).norm());
        }
        std::vector<char> flags(merged.nodes().size(), 0);
        for (int idx : hosts) flags[static_cast<std::size_t>(idx)] = 1;
        host_flags_.push_back(std::move(flags));
        if (seeds.empty()) {
            // Robot outside every rectangle (possible after travel): attach
            // to the nearest node.
            int best = -1;
            double best_d = kInf;
            for (std::size_t i = 0; i < merged.nodes().size(); ++i) {
                const double d = (merged.nodes()[i].p_ref - pos).norm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(i);
                }
            }
            if (best >= 0) seeds.emplace_back(best, best_d);
        }
        robot_hosts_.push_back(std::move(hosts));
        const std::vector<double> dist = merged.dijkstra(seeds);
        for (std::size_t i = 0; i < dist.size(); ++i)
            node_dist_[i * robot_stride_ + robot_index] = dist[i];
        ++robot_index;
    }
}

double RendezvousEvaluator::robot_distance(std::size_t k, const Vec2& p_ref,
                                           const std::vector<int>& hosts) const {
    double best = kInf;
    int top1 = -1, top2 = -1;
    double top1_d = kInf, top2_d = kInf;
    for (int idx : hosts) {
        const double leg = (merged_.nodes()[idx].p_ref - p_ref).norm();
        const double via = node_dist_[static_cast<std::size_t>(idx) * robot_stride_ + k] + leg;
        best = std::min(best, via);
        if (via < top1_d) {
            top2_d = top1_d;
            top2 = top1;
            top1_d = via;
            top1 = idx;
        } else if (via < top2_d) {
            top2_d = via;
            top2 = idx;
        }
        // Rectangles are convex free space: sharing one with the robot
        // certifies the direct chord.
        if (host_flags_[k][static_cast<std::size_t>(idx)])
            best = std::min(best, (robot_positions_[k] - p_ref).norm());
    }
    // Cut the final kink on the two most promising hosts.
    for (int idx : {top1, top2}) {
        if (idx < 0) continue;
        for (int u : in_rect_nbrs_[static_cast<std::size_t>(idx)]) {
            const double cut = node_dist_[static_cast<std::size_t>(u) * robot_stride_ + k] +
                               (merged_.nodes()[u].p_ref - p_ref).norm();
            best = std::min(best, cut);
        }
    }
    return best;
}

std::vector<double> RendezvousEvaluator::per_robot(const Vec2& p_ref) const {
    const std::vector<int> hosts = merged_.containing(p_ref);
    std::vector<double> out(robot_stride_, kInf);
    if (hosts.empty()) return out;
    for (std::size_t k = 0; k < robot_stride_; ++k) out[k] = robot_distance(k, p_ref, hosts);
    return out;
}

double RendezvousEvaluator::evaluate(const Vec2& p_ref) const {
    const std::vector<int> hosts = merged_.containing(p_ref);
    if (hosts.empty()) return kInf;
    double f = 0.0;
    for (std::size_t k = 0; k < robot_stride_; ++k) {
        const double d = robot_distance(k, p_ref, hosts);
        if (d > f) f = d;
        if (f == kInf) break;
    }
    return f;
}

double RendezvousEvaluator::region_lower_bound(int node) const {
    // Any point p inside rect(node) is evaluated through hosts whose
    // rectangles intersect rect(node) — a subset of the bin superset — or
    // through their in-rect cut neighbors, or by a direct robot chord
    // (only when the robot shares a host rectangle, i.e. a flagged node).
    std::vector<double> lo(robot_stride_, kInf);
    for (int u : merged_.bin_superset(node)) {
        for (std::size_t k = 0; k < robot_stride_; ++k) {
            if (host_flags_[k][static_cast<std::size_t>(u)]) {
                lo[k] = 0.0;
            } else {
                lo[k] = std::min(lo[k], node_dist_[static_cast<std::size_t>(u) * robot_stride_ + k]);
            }
        }
        for (int w : in_rect_nbrs_[static_cast<std::size_t>(u)])
            for (std::size_t k = 0; k < robot_stride_; ++k)
                lo[k] = std::min(lo[k], node_dist_[static_cast<std::size_t>(w) * robot_stride_ + k]);
    }
    double bound = 0.0;
    for (std::size_t k = 0; k < robot_stride_; ++k) bound = std::max(bound, lo[k]);
    return bound;
}

double compute_F(const MergedMap& merged, const Vec2& p_ref,
                 const std::vector<Vec2>& robot_positions_ref) {
    return RendezvousEvaluator(merged, robot_positions_ref).evaluate(p_ref);
}

RendezvousResult select_rendezvous_point(const MergedMap& merged,
                                         const std::vector<Vec2>& robot_positions_ref,
                                         double delta) {
    RendezvousResult result;
    const RendezvousEvaluator eval(merged, robot_positions_ref);

    // Overlapping rectangles resample the same lattice points; evaluate each
    // candidate once.
    std::unordered_set<std::uint64_t> seen;
    Vec2 best_p{0.0, 0.0};
    double best_f = kInf;
    auto consider = [&](const Vec2& p) {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(p.x() * 8192.0)) &
                                        0xffffffffULL)
             << 32) |
            (static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(p.y() * 8192.0)) &
                                        0xffffffffULL));
        if (!seen.insert(key).second) return;
        ++result.samples_evaluated;
        const double f = eval.evaluate(p);
        if (f < best_f ||
            (f == best_f && (p.x() < best_p.x() ||
                             (p.x() == best_p.x() && p.y() < best_p.y())))) {
            best_f = f;
            best_p = p;
        }
    };

    for (const auto& n : merged.nodes()) consider(n.p_ref);

    // Rectangles that provably cannot contain a better point are skipped.
    std::vector<char> prune(merged.nodes().size(), 0);
    for (std::size_t i = 0; i < merged.nodes().size(); ++i)
        prune[i] = eval.region_lower_bound(static_cast<int>(i)) > best_f + 1e-9 ? 1 : 0;

    // Lattice anchored at each rectangle corner so larger delta yields a
    // superset of candidates. Samples within `inset` of any side are
    // skipped: rectangle boundaries lie on wall faces, and a boundary point
    // can fall into the occupied cell when frames are rotated.
    const double spacing = 1.0 / delta;
    const double inset = 0.01;
    std::size_t node_index = 0;
    for (const auto& n : merged.nodes()) {
        const std::size_t i = node_index++;
        if (prune[i]) continue;
        const Rect& r = n.rect_own;
        const Pose2& frame = merged.frames().at(n.robot);
        for (int iy = 0;; ++iy) {
            const double y = r.y_min + iy * spacing;
            if (y > r.y_max - inset) break;
            if (y < r.y_min + inset) continue;
            for (int ix = 0;; ++ix) {
                const double x = r.x_min + ix * spacing;
                if (x > r.x_max - inset) break;
                if (x < r.x_min + inset) continue;
                consider(frame.apply({x, y}));
            }
        }
    }

    result.p_hat = best_p;
    result.f_value = best_f;
    result.per_robot_lengths = eval.per_robot(best_p);
    return result;
}

GridOracle::GridOracle(const World& world, const std::vector<Vec2>& robot_positions_world)
    : world_(world) {
    const GridView view = world_view(world);
    for (const Vec2& pos : robot_positions_world) {
        const CellIdx cell{world.cell_of(pos.x()), world.cell_of(pos.y())};
        fields_.push_back(dijkstra_field(view, {cell}));
    }

    double best = kInf;
    int best_cell = -1;
    const int w = world.width();
    for (int cy = 0; cy < world.height(); ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            if (world.occupied(cx, cy)) continue;
            const int id = cy * w + cx;
            double f = 0.0;
            for (const auto& field : fields_) f = std::max(f, field[id]);
            if (f < best) {  // strict: row-major order breaks ties
                best = f;
                best_cell = id;
            }
        }
    }
    if (best_cell >= 0) {
        p_star_ = world.cell_center(best_cell % w, best_cell / w);
        f_star_ = best;
    } else {
        f_star_ = kInf;
    }
}

double GridOracle::evaluate(const Vec2& p_world) const {
    const int cx = world_.cell_of(p_world.x());
    const int cy = world_.cell_of(p_world.y());
    if (!world_.in_bounds(cx, cy) || world_.occupied(cx, cy)) return kInf;
    const int id = cy * world_.width() + cx;
    double f = 0.0;
    for (const auto& field : fields_) f = std::max(f, field[id]);
    return f;
}

}  // namespace pier
