#include "pier/controller.hpp"

#include "pier/rendezvous.hpp"

#include <algorithm>
#include <cmath>
#include <chrono>
#include <sstream>
#include <stdexcept>

namespace pier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_point(const Vec2& p) {
    std::ostringstream out;
    out.precision(3);
    out << std::fixed << p.x() << "," << p.y();
    return out.str();
}

bool measurement_less(const RpMeasurement& a, const RpMeasurement& b) {
    return std::tie(a.tick, a.from_robot, a.to_robot, a.source_robot, a.source_node) <
           std::tie(b.tick, b.from_robot, b.to_robot, b.source_robot, b.source_node);
}

bool measurement_same(const RpMeasurement& a, const RpMeasurement& b) {
    return a.tick == b.tick && a.from_robot == b.from_robot && a.to_robot == b.to_robot &&
           a.source_robot == b.source_robot && a.source_node == b.source_node;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
    if (name == "pier") return Strategy::Pier;
    if (name == "nbv-only") return Strategy::NbvOnly;
    if (name == "full-coverage") return Strategy::FullCoverage;
    if (name == "grid-share") return Strategy::GridShare;
    throw std::invalid_argument("unknown strategy: " + name);
}

const char* to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::Pier: return "pier";
        case Strategy::NbvOnly: return "nbv-only";
        case Strategy::FullCoverage: return "full-coverage";
        case Strategy::GridShare: return "grid-share";
    }
    return "unknown";
}

Simulation::Simulation(const World& world, std::vector<Pose2> starts_world, CommGraph comm,
                       SimConfig config)
    : world_(world),
      field_(world.descriptor_seed()),
      config_(std::move(config)),
      network_(std::move(comm)),
      noise_rng_(config_.seed ^ 0xabcdef12345ULL) {
    if (starts_world.empty()) throw std::invalid_argument("simulation: no robots");
    if (network_.graph().robot_count != static_cast<int>(starts_world.size()))
        throw std::invalid_argument("simulation: comm graph size mismatch");

    const double half_extent = world.width_m() + world.height_m();
    robots_.reserve(starts_world.size());
    for (std::size_t i = 0; i < starts_world.size(); ++i) {
        if (!world.free_at(starts_world[i].position()))
            throw std::invalid_argument("simulation: start pose in occupied space");
        Robot r;
        r.id = static_cast<int>(i);
        r.frame = starts_world[i];
        r.pose = Pose2{0.0, 0.0, 0.0};
        r.true_world = starts_world[i];
        r.grid = RobotGrid(world.resolution(), half_extent);
        r.map = FhtMap(r.id);
        r.buffer = CandidateBuffer(config_.selection.buffer_capacity);
        r.trajectory_world.push_back(starts_world[i].position());
        robots_.push_back(std::move(r));
    }
    loopback_.resize(robots_.size());
    component_count_ = static_cast<int>(robots_.size());
}

void Simulation::log(std::uint64_t tick, int robot, const char* type, std::string detail) {
    events_.push_back({tick, robot, type, std::move(detail)});
}

void Simulation::broadcast_all(int origin, Message msg) {
    msg.src = origin;
    network_.broadcast(origin, msg);
    Message self = msg;
    self.dst = origin;
    loopback_[static_cast<std::size_t>(origin)].push_back({tick_ + 1, std::move(self)});
}

void Simulation::process_inbox(Robot& r) {
    std::vector<Message> msgs = network_.fetch_inbox(r.id);
    auto& self_queue = loopback_[static_cast<std::size_t>(r.id)];
    auto it = self_queue.begin();
    while (it != self_queue.end()) {
        if (it->first <= tick_) {
            msgs.push_back(std::move(it->second));
            it = self_queue.erase(it);
        } else {
            ++it;
        }
    }

    for (auto& msg : msgs) {
        switch (msg.kind) {
            case MessageKind::MapDelta: {
                const auto& p = std::get<MapDeltaPayload>(msg.payload);
                if (p.raw_grid) break;  // grid-share payloads carry no usable structure
                auto [map_it, inserted] = r.neighbor_maps.try_emplace(p.owner, FhtMap(p.owner));
                FhtMap& snapshot = map_it->second;
                for (const auto& n : p.nodes) {
                    if (n.id != static_cast<int>(snapshot.nodes().size())) continue;  // replay guard
                    snapshot.add_node(n.kind, n.p, n.rect, n.features);
                }
                for (const auto& e : p.edges)
                    if (e.a < static_cast<int>(snapshot.nodes().size()) &&
                        e.b < static_cast<int>(snapshot.nodes().size()))
                        snapshot.add_edge(e.a, e.b, e.length);
                break;
            }
            case MessageKind::RpEstimate: {
                const auto& p = std::get<RpEstimatePayload>(msg.payload);
                for (const auto& m : p.measurements) {
                    auto pos = std::lower_bound(r.measurements.begin(), r.measurements.end(), m,
                                                measurement_less);
                    if (pos != r.measurements.end() && measurement_same(*pos, m)) continue;
                    r.measurements.insert(pos, m);
                    r.new_measurement_flag = true;
                }
                break;
            }
            case MessageKind::RobotPose: {
                const auto& p = std::get<RobotPosePayload>(msg.payload);
                r.known_poses[p.robot] = p.pose;
                break;
            }
            case MessageKind::FrontierSummary: {
                const auto& p = std::get<FrontierSummaryPayload>(msg.payload);
                r.frontier_summaries[p.robot] = p.centers;
                break;
            }
            case MessageKind::StructuralMap: {
                const auto& p = std::get<StructuralMapPayload>(msg.payload);
                r.structural_maps[p.map.owner()] = p.map;
                break;
            }
            default:
                break;
        }
    }
}

Descriptor Simulation::descriptor_at(const Robot& r) const {
    return field_.sample(r.true_world.position());
}

void Simulation::send_map_delta(Robot& r, const std::vector<FhtNode>& nodes,
                                const std::vector<FhtEdge>& new_edges) {
    if (config_.strategy == Strategy::GridShare) return;  // nodes are not shared in GM mode
    MapDeltaPayload payload;
    payload.owner = r.id;
    payload.nodes = nodes;
    payload.edges = new_edges;
    for (int nb : network_.graph().neighbors(r.id)) {
        Message msg;
        msg.kind = MessageKind::MapDelta;
        msg.src = r.id;
        msg.dst = nb;
        msg.payload = payload;
        network_.send(std::move(msg));
    }
}

void Simulation::create_main_node(Robot& r, const Vec2& position, const Scan& scan,
                                  const Descriptor& phi) {
    Rect rect;
    try {
        rect = free_space_rect(r.grid, position);
    } catch (const std::invalid_argument&) {
        const double res = r.grid.resolution();
        rect = {position.x() - res, position.x() + res, position.y() - res, position.y() + res};
    }
    auto features = std::make_shared<MainNodeData>();
    features->phi = phi;
    features->psi = scan;
    const std::size_t edges_before = r.map.edges().size();
    const int id = attach_node(r.map, NodeKind::Main, position, rect, features, r.grid);
    std::vector<FhtEdge> new_edges(r.map.edges().begin() + edges_before, r.map.edges().end());
    send_map_delta(r, {r.map.node(id)}, new_edges);
    r.last_node_rect = rect;
    r.dist_since_node = 0.0;
    log(tick_, r.id, "main_node", std::to_string(id) + " " + format_point(position));
}

void Simulation::create_support_node(Robot& r) {
    const Vec2 position = r.pose.position();
    Rect rect;
    try {
        rect = free_space_rect(r.grid, position);
    } catch (const std::invalid_argument&) {
        return;  // current cell unknown (should not happen after integration)
    }
    const std::size_t edges_before = r.map.edges().size();
    const int id = attach_node(r.map, NodeKind::Support, position, rect, nullptr, r.grid);
    std::vector<FhtEdge> new_edges(r.map.edges().begin() + edges_before, r.map.edges().end());
    send_map_delta(r, {r.map.node(id)}, new_edges);
    r.last_node_rect = rect;
    r.dist_since_node = 0.0;
    log(tick_, r.id, "support_node", std::to_string(id) + " " + format_point(position));
}

void Simulation::maybe_broadcast_pose(Robot& r, bool force) {
    if (!force && (r.pose.position() - r.last_pose_broadcast).norm() < config_.pose_broadcast_dist)
        return;
    Message msg;
    msg.kind = MessageKind::RobotPose;
    msg.payload = RobotPosePayload{r.id, r.pose};
    broadcast_all(r.id, std::move(msg));
    r.last_pose_broadcast = r.pose.position();
}

void Simulation::sense_and_map(Robot& r) {
    const Pose2 sensor_world{r.true_world.x, r.true_world.y, r.frame.theta};
    const Scan scan = raycast_scan(world_, sensor_world);
    integrate_scan(r.grid, Pose2{r.pose.x, r.pose.y, 0.0}, scan);
    r.last_scan = scan;
    r.has_scan = true;

    const Descriptor phi = descriptor_at(r);
    const SelectionParams& sel = config_.selection;
    const Vec2 position = r.pose.position();

    if (r.map.main_count() == 0) {
        create_main_node(r, position, scan, phi);  // bootstrap at the start pose
    } else {
        const double d = density(r.map, position, sel.sigma_c);
        bool created = false;
        if (d <= sel.gamma2) {
            const auto pick = select_main_node(r.buffer, r.map, sel);
            if (pick) {
                const Candidate& c = r.buffer[*pick];
                create_main_node(r, c.position, c.scan, c.phi);
            } else {
                ++counters_.fallback_nodes;
                create_main_node(r, position, scan, phi);
            }
            r.buffer.clear();
            created = true;
        } else if (d < sel.gamma1) {
            Candidate c;
            c.position = position;
            c.scan = scan;
            c.phi = phi;
            c.heat_value = heat(scan);
            c.tick = tick_;
            r.buffer.push(std::move(c));
        }
        if (!created) {
            const bool exited_rect = r.last_node_rect && !r.last_node_rect->contains(position);
            if (exited_rect || r.dist_since_node >= sel.support_spacing) create_support_node(r);
        }
    }

    if (config_.strategy != Strategy::GridShare) run_rp_estimation(r);
    maybe_broadcast_pose(r, false);
}

void Simulation::run_rp_estimation(Robot& r) {
    std::size_t neighbor_nodes = 0;
    for (const auto& [owner, map] : r.neighbor_maps) neighbor_nodes += map.nodes().size();
    if (neighbor_nodes == 0) return;

    const bool moved_enough =
        !r.rp_checked_once || (r.pose.position() - r.last_rp_check).norm() >= config_.rp_check_dist;
    // A robot standing still still re-checks when new nodes arrive.
    const bool maps_grew = neighbor_nodes != r.neighbor_nodes_seen;
    if (!moved_enough && !maps_grew) return;
    r.neighbor_nodes_seen = neighbor_nodes;
    r.last_rp_check = r.pose.position();
    r.rp_checked_once = true;

    std::vector<const FhtMap*> neighbors;
    neighbors.reserve(r.neighbor_maps.size());
    for (const auto& [owner, map] : r.neighbor_maps) neighbors.push_back(&map);

    SingleRpStats stats;
    const Descriptor phi = descriptor_at(r);
    auto skip = [&r](int robot, int node) { return r.matched.count({robot, node}) > 0; };
    std::vector<RpMeasurement> found =
        single_rp_estimation(r.map, r.id, r.pose.position(), phi, r.last_scan, neighbors,
                             config_.theta_match, skip, &stats, config_.icp);
    counters_.icp_attempts += stats.attempts;
    counters_.icp_rejected += stats.rejected;
    if (found.empty()) return;

    for (auto& m : found) {
        m.tick = tick_;
        if (config_.rp_noise_sigma_xy > 0.0 || config_.rp_noise_sigma_theta > 0.0) {
            m.transform = m.transform * Pose2{config_.rp_noise_sigma_xy * noise_rng_.next_gaussian(),
                                              config_.rp_noise_sigma_xy * noise_rng_.next_gaussian(),
                                              config_.rp_noise_sigma_theta *
                                                  noise_rng_.next_gaussian()};
        }
        r.matched.insert({m.source_robot, m.source_node});
        ++counters_.measurements;
        log(tick_, r.id, "rp_measurement",
            std::to_string(m.from_robot) + "-" + std::to_string(m.to_robot) + " node " +
                std::to_string(m.source_node));
    }
    Message msg;
    msg.kind = MessageKind::RpEstimate;
    msg.payload = RpEstimatePayload{std::move(found)};
    broadcast_all(r.id, std::move(msg));
}

void Simulation::grid_share_tick() {
    const auto period_ticks =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(config_.grid_share_period_s / config_.dt));
    if (tick_ % period_ticks != 0) return;

    // The grid-map baseline republishes each robot's map to its neighbors
    // every period, run-length encoded row by row over the known area.
    for (auto& r : robots_) {
        if (!r.grid.has_known()) continue;
        const std::size_t known = r.grid.known_count();
        if (known == r.grid_cells_shared) continue;  // nothing new since last publish
        r.grid_cells_shared = known;
        std::size_t runs = 0;
        const CellIdx lo = r.grid.known_min();
        const CellIdx hi = r.grid.known_max();
        for (int cy = lo.y; cy <= hi.y; ++cy) {
            Cell prev = Cell::Unknown;
            bool in_row = false;
            for (int cx = lo.x; cx <= hi.x; ++cx) {
                const Cell c = r.grid.at(cx, cy);
                if (!in_row || c != prev) {
                    ++runs;
                    in_row = true;
                    prev = c;
                }
            }
        }
        MapDeltaPayload payload;
        payload.owner = r.id;
        payload.raw_grid = true;
        payload.grid_runs = runs;
        for (int nb : network_.graph().neighbors(r.id)) {
            Message msg;
            msg.kind = MessageKind::MapDelta;
            msg.src = r.id;
            msg.dst = nb;
            msg.payload = payload;
            network_.send(std::move(msg));
        }
    }

    // Merge stand-in: an RP becomes available once the known-free regions of
    // two adjacent robots overlap enough for grid correlation to lock.
    const RpGraph current{static_cast<int>(robots_.size()), robots_[0].measurements};
    for (int a = 0; a < static_cast<int>(robots_.size()); ++a) {
        for (int b = a + 1; b < static_cast<int>(robots_.size()); ++b) {
            if (!network_.graph().has_edge(a, b)) continue;
            if (current.has_edge(a, b)) continue;
            const Robot& ra = robots_[a];
            const Robot& rb = robots_[b];
            const double cell_area = world_.resolution() * world_.resolution();
            const std::size_t needed =
                static_cast<std::size_t>(config_.grid_share_overlap_m2 / cell_area);
            std::size_t overlap = 0;
            const Pose2 inv_a = ra.frame.inverse();
            const Pose2 inv_b = rb.frame.inverse();
            for (int cy = 0; cy < world_.height() && overlap < needed; ++cy) {
                for (int cx = 0; cx < world_.width(); ++cx) {
                    if (world_.occupied(cx, cy)) continue;
                    const Vec2 c = world_.cell_center(cx, cy);
                    if (ra.grid.at_point(inv_a.apply(c)) != Cell::Free) continue;
                    if (rb.grid.at_point(inv_b.apply(c)) != Cell::Free) continue;
                    if (++overlap >= needed) break;
                }
            }
            if (overlap < needed) continue;

            SplitMix64 pair_rng(config_.seed ^ (static_cast<std::uint64_t>(a) << 32) ^
                                static_cast<std::uint64_t>(b * 2654435761u));
            RpMeasurement m;
            m.from_robot = a;
            m.to_robot = b;
            // Sub-cell, sub-degree registration noise: grid correlation over
            // a large overlap locks to the cell lattice.
            m.transform = ra.frame.inverse() * rb.frame *
                          Pose2{0.02 * pair_rng.next_gaussian(), 0.02 * pair_rng.next_gaussian(),
                                (0.2 * M_PI / 180.0) * pair_rng.next_gaussian()};
            m.fitness = 0.05;
            // Grid correlation links frames, not topological nodes; map
            // merging connects these maps through rectangle containment.
            m.source_robot = b;
            m.source_node = -1;
            m.observer_node = -1;
            m.tick = tick_;
            ++counters_.measurements;
            log(tick_, a, "rp_measurement", std::to_string(a) + "-" + std::to_string(b) + " grid");
            Message msg;
            msg.kind = MessageKind::RpEstimate;
            msg.payload = RpEstimatePayload{{m}};
            broadcast_all(a, std::move(msg));
        }
    }
}

void Simulation::update_partition(Robot& r) {
    const RpGraph graph{static_cast<int>(robots_.size()), r.measurements};
    const auto components = connected_components(graph);
    for (const auto& comp : components) {
        if (std::find(comp.begin(), comp.end(), r.id) == comp.end()) continue;
        r.component = comp;
        break;
    }

    r.component_frames.clear();
    if (r.component.size() == 1) {
        r.component_frames[r.id] = Pose2{};
        if (r.mode != Mode::RendezvousTravel && r.mode != Mode::Done) r.mode = Mode::Nbv;
        r.partition = Partition{};
        return;
    }

    PgoProblem problem;
    problem.robots = r.component;
    for (const auto& m : r.measurements)
        if (std::find(r.component.begin(), r.component.end(), m.from_robot) != r.component.end())
            problem.measurements.push_back(m);
    problem.omega = config_.omega_diag.asDiagonal();
    const PgoResult solved = pgo_solve(problem, config_.pgo);
    for (std::size_t i = 0; i < problem.robots.size(); ++i)
        r.component_frames[problem.robots[i]] = solved.poses[i];

    std::map<int, Vec2> bases;
    for (int member : r.component) {
        const auto pose_it = r.known_poses.find(member);
        const Vec2 own_pos =
            pose_it != r.known_poses.end() ? pose_it->second.position() : Vec2{0.0, 0.0};
        bases[member] = r.component_frames.at(member).apply(own_pos);
    }
    r.partition = make_partition(bases);
    if (config_.strategy == Strategy::Pier || config_.strategy == Strategy::GridShare) {
        if (r.mode == Mode::Nbv) r.mode = Mode::Partitioned;
        ++counters_.partition_updates;
        log(tick_, r.id, "partition_update", std::to_string(r.component.size()) + " robots");
    }
}

std::vector<FrontierCenter> Simulation::centers_in_region(Robot& r, bool restrict_to_region) {
    std::function<bool(const Vec2&)> region;
    if (restrict_to_region && r.component.size() > 1) {
        const Pose2 to_ref = r.component_frames.at(r.id);
        const Partition* part = &r.partition;
        const int me = r.id;
        region = [to_ref, part, me](const Vec2& p_own) {
            return part->owner_of(to_ref.apply(p_own)) == me;
        };
    }
    const auto cells = detect_frontiers(r.grid, region);
    return cluster_frontiers(r.grid, cells, config_.min_cluster);
}

bool Simulation::component_exhausted(const Robot& r) const {
    // True when some member's latest summary has no center inside its region.
    if (r.component.size() < 2) return false;
    for (int member : r.component) {
        const auto it = r.frontier_summaries.find(member);
        if (it == r.frontier_summaries.end()) continue;
        bool any_in_region = false;
        const auto frame_it = r.component_frames.find(member);
        if (frame_it == r.component_frames.end()) continue;
        for (const Vec2& c : it->second) {
            if (r.partition.owner_of(frame_it->second.apply(c)) == member) {
                any_in_region = true;
                break;
            }
        }
        if (!any_in_region) return true;
    }
    return false;
}

double Simulation::shared_center_cost(const Robot& viewer, int member,
                                      const Vec2& center_ref) const {
    const auto frame_it = viewer.component_frames.find(member);
    const auto pose_it = viewer.known_poses.find(member);
    if (frame_it == viewer.component_frames.end() || pose_it == viewer.known_poses.end())
        return kInf;
    const Vec2 center_own = frame_it->second.inverse().apply(center_ref);
    const Vec2 from = pose_it->second.position();

    const FhtMap* map = nullptr;
    if (member == viewer.id) {
        map = &viewer.map;
    } else {
        const auto it = viewer.neighbor_maps.find(member);
        if (it != viewer.neighbor_maps.end()) map = &it->second;
    }
    if (map && !map->empty()) {
        const auto d = topo_path_length(*map, TopoEndpoint::at(from), TopoEndpoint::at(center_own));
        if (d && std::isfinite(*d)) return *d;
    }
    return (from - center_own).norm();
}

std::optional<Vec2> Simulation::reassign_goal(Robot& r) {
    // Furthest shared frontier from any robot in the component.
    std::optional<Vec2> best;
    double best_score = -kInf;
    for (int member : r.component) {
        const auto summary_it = r.frontier_summaries.find(member);
        const auto frame_it = r.component_frames.find(member);
        if (summary_it == r.frontier_summaries.end() || frame_it == r.component_frames.end())
            continue;
        for (const Vec2& own_c : summary_it->second) {
            const Vec2 c_ref = frame_it->second.apply(own_c);
            double min_cost = kInf;
            for (int other : r.component)
                min_cost = std::min(min_cost, shared_center_cost(r, other, c_ref));
            if (!std::isfinite(min_cost)) continue;
            if (min_cost > best_score + 1e-12 ||
                (std::abs(min_cost - best_score) <= 1e-12 && best &&
                 (c_ref.x() < best->x() || (c_ref.x() == best->x() && c_ref.y() < best->y())))) {
                best_score = min_cost;
                best = c_ref;
            }
        }
    }
    if (!best) return std::nullopt;
    return r.component_frames.at(r.id).inverse().apply(*best);
}

void Simulation::plan_to(Robot& r, const Vec2& goal_own, bool allow_unknown) {
    PlanOptions opts;
    opts.allow_unknown = allow_unknown;
    opts.inflate_cells = 1;
    auto path = plan_path(r.grid, r.pose.position(), goal_own, opts);
    if (!path) {
        opts.inflate_cells = 0;
        path = plan_path(r.grid, r.pose.position(), goal_own, opts);
    }
    if (!path) {
        // Goal cell may sit just inside a wall (frame estimation error):
        // try the adjacent cell centers.
        for (int dy = -1; dy <= 1 && !path; ++dy)
            for (int dx = -1; dx <= 1 && !path; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const Vec2 alt = r.grid.center_of(
                    {r.grid.cell_of(goal_own).x + dx, r.grid.cell_of(goal_own).y + dy});
                path = plan_path(r.grid, r.pose.position(), alt, opts);
            }
    }
    if (!path) {
        r.goal.reset();
        r.path.clear();
        r.path_index = 0;
        return;
    }
    ++counters_.replans;
    const bool changed = !r.goal || (*r.goal - goal_own).norm() > 0.5;
    r.goal = goal_own;
    r.path = std::move(*path);
    r.path_index = 0;
    if (changed) log(tick_, r.id, "goal_change", format_point(goal_own));
}

void Simulation::full_coverage_goals(Robot& r) {
    auto own_centers = centers_in_region(r, false);
    if (r.component.size() >= 2) {
        // Greedy min-cost matching of shared frontiers to robots (m-TSP
        // stand-in); distances in the shared reference frame.
        struct Entry {
            double cost;
            int robot;
            int center_index;
            Vec2 center_ref;
        };
        std::vector<Entry> entries;
        std::vector<std::pair<int, Vec2>> all_centers;
        for (int member : r.component) {
            const auto summary_it = r.frontier_summaries.find(member);
            const auto frame_it = r.component_frames.find(member);
            if (summary_it == r.frontier_summaries.end() ||
                frame_it == r.component_frames.end())
                continue;
            for (const Vec2& c : summary_it->second)
                all_centers.emplace_back(member, frame_it->second.apply(c));
        }
        for (int member : r.component) {
            const auto pose_it = r.known_poses.find(member);
            const auto frame_it = r.component_frames.find(member);
            if (pose_it == r.known_poses.end() || frame_it == r.component_frames.end()) continue;
            const Vec2 base = frame_it->second.apply(pose_it->second.position());
            for (std::size_t ci = 0; ci < all_centers.size(); ++ci)
                entries.push_back(
                    {(all_centers[ci].second - base).norm(), member, static_cast<int>(ci),
                     all_centers[ci].second});
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return std::tie(a.cost, a.robot, a.center_index) <
                   std::tie(b.cost, b.robot, b.center_index);
        });
        std::set<int> used_robots;
        std::set<int> used_centers;
        for (const Entry& e : entries) {
            if (used_robots.count(e.robot) || used_centers.count(e.center_index)) continue;
            used_robots.insert(e.robot);
            used_centers.insert(e.center_index);
            if (e.robot == r.id) {
                const Vec2 goal_own = r.component_frames.at(r.id).inverse().apply(e.center_ref);
                plan_to(r, goal_own, true);
                return;
            }
        }
    }
    // Unassigned (or singleton): plain NBV over the whole own map.
    if (!own_centers.empty()) {
        std::vector<std::pair<double, Vec2>> scored;
        for (const auto& c : own_centers)
            scored.emplace_back(nav_cost(r.map, r.grid, r.pose.position(), c.position),
                                c.position);
        const auto best = select_min_cost_center(scored);
        if (best) {
            plan_to(r, *best, false);
            return;
        }
    }
    // Nothing anywhere: patrol own main nodes so matches can still happen.
    if (r.map.main_count() > 0) {
        std::vector<int> mains;
        for (const auto& n : r.map.nodes())
            if (n.is_main()) mains.push_back(n.id);
        const int target = mains[r.patrol_next % mains.size()];
        ++r.patrol_next;
        plan_to(r, r.map.node(target).p, false);
    }
}

void Simulation::choose_goal(Robot& r) {
    if (config_.strategy == Strategy::FullCoverage) {
        full_coverage_goals(r);
        return;
    }

    const bool partitioned = (config_.strategy == Strategy::Pier ||
                              config_.strategy == Strategy::GridShare) &&
                             r.component.size() >= 2;
    auto centers = centers_in_region(r, partitioned);

    // Share the summary whenever the own full-map center set changed.
    auto all_centers = partitioned ? centers_in_region(r, false) : centers;
    std::vector<Vec2> summary;
    summary.reserve(all_centers.size());
    for (const auto& c : all_centers) summary.push_back(c.position);
    if (summary != r.last_summary_sent) {
        Message msg;
        msg.kind = MessageKind::FrontierSummary;
        msg.payload = FrontierSummaryPayload{r.id, summary};
        broadcast_all(r.id, std::move(msg));
        r.last_summary_sent = std::move(summary);
    }

    if (!centers.empty()) {
        if (partitioned) r.mode = Mode::Partitioned;
        // Cheapest reachable center wins; ties by (y, x).
        std::vector<std::pair<double, Vec2>> ranked;
        for (const auto& c : centers) {
            const double cost = nav_cost(r.map, r.grid, r.pose.position(), c.position);
            if (std::isfinite(cost)) ranked.emplace_back(cost, c.position);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return std::tie(a.first, a.second.y(), a.second.x()) <
                   std::tie(b.first, b.second.y(), b.second.x());
        });
        for (const auto& [cost, center] : ranked) {
            plan_to(r, center, false);
            if (r.goal) return;
        }
    }

    if (partitioned) {
        const auto goal = reassign_goal(r);
        if (goal) {
            r.mode = Mode::Reassigned;
            plan_to(r, *goal, true);
            if (r.goal) return;
        }
    }

    // Component has no frontier anywhere: idle first, patrol own main nodes
    // once idling clearly cannot connect the RP graph.
    r.goal.reset();
    r.path.clear();
    r.path_index = 0;
    if (tick_ > 50 && r.map.main_count() > 1) {
        std::vector<int> mains;
        for (const auto& n : r.map.nodes())
            if (n.is_main()) mains.push_back(n.id);
        const int target = mains[r.patrol_next % mains.size()];
        ++r.patrol_next;
        plan_to(r, r.map.node(target).p, false);
    }
}

void Simulation::step_along_path(Robot& r) {
    if (r.path_index >= r.path.size()) return;
    const Pose2 before = r.pose;
    const Vec2 drift_before = r.drift;
    r.pose = advance_path(r.pose, r.path, r.path_index, config_.speed * config_.dt);
    const double moved = (r.pose.position() - before.position()).norm();

    // Odometry noise: the believed pose walks off the ground truth.
    if (config_.odom_noise_sigma > 0.0 && moved > 0.0) {
        const Vec2 dd{config_.odom_noise_sigma * noise_rng_.next_gaussian() * std::sqrt(config_.dt),
                      config_.odom_noise_sigma * noise_rng_.next_gaussian() * std::sqrt(config_.dt)};
        r.pose.x += dd.x();
        r.pose.y += dd.y();
        r.drift += dd;
    }
    const Vec2 true_own = r.pose.position() - r.drift;
    const Vec2 world_pos = r.frame.apply(true_own);
    if (!world_.free_at(world_pos)) {
        // Map/world disagreement (possible with drifting odometry): stay put
        // and force a replan.
        r.pose = before;
        r.drift = drift_before;
        r.path.clear();
        r.path_index = 0;
        r.goal.reset();
        return;
    }
    r.dist_since_node += moved;
    r.true_world = Pose2{world_pos.x(), world_pos.y(), r.frame.theta + r.pose.theta};

    if ((world_pos - r.trajectory_world.back()).norm() > 0.5)
        r.trajectory_world.push_back(world_pos);

    // Exploration goals count as visited at cell scale; rendezvous travel
    // keeps walking until its own tighter arrival check.
    if (r.mode != Mode::RendezvousTravel && r.goal &&
        (r.pose.position() - *r.goal).norm() < 0.25) {
        r.goal.reset();
        r.path.clear();
        r.path_index = 0;
    }
}

void Simulation::decide_and_move(Robot& r) {
    const bool trigger = r.new_measurement_flag ||
                         (config_.strategy != Strategy::NbvOnly && component_exhausted(r) &&
                          !r.region_was_empty);
    if (trigger || r.component.empty()) update_partition(r);
    r.region_was_empty = component_exhausted(r);
    r.new_measurement_flag = false;

    const bool cadence = tick_ % static_cast<std::uint64_t>(config_.replan_interval_ticks) == 0;
    bool blocked = false;
    if (r.path_index < r.path.size() &&
        r.grid.at_point(r.path[r.path_index]) == Cell::Occupied)
        blocked = true;

    if (trigger || cadence || blocked || !r.goal) choose_goal(r);
    step_along_path(r);
}

void Simulation::kickoff_rendezvous() {
    t0_tick_ = static_cast<std::int64_t>(tick_);
    log(tick_, -1, "connected", std::to_string(robots_.size()) + " robots");
    world_positions_t0_.clear();
    for (const auto& r : robots_) world_positions_t0_.push_back(r.true_world.position());

    for (auto& r : robots_) {
        Message structural;
        structural.kind = MessageKind::StructuralMap;
        structural.payload = StructuralMapPayload{r.map.structural_copy()};
        broadcast_all(r.id, std::move(structural));
        maybe_broadcast_pose(r, true);
        r.goal.reset();
        r.path.clear();
        r.path_index = 0;
    }
    phase_ = Phase::Kickoff;
}

void Simulation::select_rendezvous() {
    // Every robot re-solves the full component; the shared state is
    // identical, so compute the selection once from robot 0's copy.
    for (auto& r : robots_) update_partition(r);
    Robot& view = robots_[0];

    PgoProblem problem;
    problem.robots = view.component;
    problem.measurements = view.measurements;
    problem.omega = config_.omega_diag.asDiagonal();
    std::map<int, Pose2> frames;
    if (robots_.size() == 1) {
        frames[0] = Pose2{};
    } else {
        const PgoResult solved = pgo_solve(problem, config_.pgo);
        for (std::size_t i = 0; i < problem.robots.size(); ++i)
            frames[problem.robots[i]] = solved.poses[i];
    }

    std::vector<FhtMap> structural;
    for (const auto& r : robots_) {
        const auto it = view.structural_maps.find(r.id);
        structural.push_back(it != view.structural_maps.end() ? it->second
                                                              : r.map.structural_copy());
    }

    const auto wall0 = std::chrono::steady_clock::now();
    const MergedMap merged = merge_maps(structural, view.measurements, frames);
    std::vector<Vec2> positions_ref;
    for (const auto& r : robots_) {
        const auto pose_it = view.known_poses.find(r.id);
        const Vec2 own = pose_it != view.known_poses.end() ? pose_it->second.position()
                                                           : r.pose.position();
        positions_ref.push_back(frames.at(r.id).apply(own));
    }
    const RendezvousResult result =
        select_rendezvous_point(merged, positions_ref, config_.sample_density);
    const auto wall1 = std::chrono::steady_clock::now();

    rendezvous_.selected = true;
    rendezvous_.point_ref = result.p_hat;
    rendezvous_.f_value = result.f_value;
    rendezvous_.per_robot_lengths = result.per_robot_lengths;
    rendezvous_.samples_evaluated = result.samples_evaluated;
    rendezvous_.selection_ms =
        std::chrono::duration<double, std::milli>(wall1 - wall0).count();

    const int anchor = problem.robots.empty() ? 0 : problem.robots.front();
    rendezvous_.point_world = robots_[static_cast<std::size_t>(anchor)].frame.apply(
        frames.at(anchor).inverse().apply(result.p_hat));
    // frames[anchor] is the identity, so point_world = F_anchor(p_hat).

    for (auto& r : robots_) {
        r.mode = Mode::RendezvousTravel;
        r.rendezvous_target = frames.at(r.id).inverse().apply(result.p_hat);
        plan_to(r, r.rendezvous_target, true);
    }
    phase_ = Phase::Travel;
}

void Simulation::travel_tick(Robot& r) {
    if (r.mode == Mode::Done) return;
    const Pose2 sensor_world{r.true_world.x, r.true_world.y, r.frame.theta};
    const Scan scan = raycast_scan(world_, sensor_world);
    integrate_scan(r.grid, Pose2{r.pose.x, r.pose.y, 0.0}, scan);

    // Stop well inside the arrival radius: the radius is judged against the
    // ground-truth embedding, and the frame estimate carries a small error.
    if ((r.pose.position() - r.rendezvous_target).norm() <= 0.5 * config_.arrival_radius) {
        r.mode = Mode::Done;
        r.goal.reset();
        r.path.clear();
        return;
    }

    bool blocked = r.path_index >= r.path.size();
    if (!blocked && r.grid.at_point(r.path[r.path_index]) == Cell::Occupied) blocked = true;
    if (blocked || tick_ % static_cast<std::uint64_t>(config_.replan_interval_ticks) == 0)
        plan_to(r, r.rendezvous_target, true);
    step_along_path(r);
}

bool Simulation::run() {
    const auto timeout_ticks = static_cast<std::uint64_t>(config_.timeout_s / config_.dt);

    // Initial pose exchange.
    network_.set_tick(0);
    for (auto& r : robots_) maybe_broadcast_pose(r, true);

    for (tick_ = 0; tick_ <= timeout_ticks; ++tick_) {
        network_.set_tick(tick_);
        network_.deliver_up_to(tick_);
        for (auto& r : robots_) process_inbox(r);

        if (phase_ == Phase::Explore) {
            for (auto& r : robots_) sense_and_map(r);
            if (config_.strategy == Strategy::GridShare) grid_share_tick();

            // Track global component count for the event log.
            const RpGraph graph{static_cast<int>(robots_.size()), robots_[0].measurements};
            const auto comps = connected_components(graph);
            if (static_cast<int>(comps.size()) < component_count_) {
                component_count_ = static_cast<int>(comps.size());
                log(tick_, -1, "components_merged", std::to_string(component_count_));
            }

            bool exploration_done = comps.size() == 1;
            if (config_.strategy == Strategy::FullCoverage || config_.explore_only) {
                exploration_done = false;
                if (tick_ % static_cast<std::uint64_t>(config_.replan_interval_ticks) == 0) {
                    // Coverage is complete when no robot has a frontier
                    // cluster left worth visiting.
                    bool covered = true;
                    for (auto& r : robots_) {
                        const auto cells = detect_frontiers(r.grid);
                        if (!cluster_frontiers(r.grid, cells, config_.min_cluster).empty()) {
                            covered = false;
                            break;
                        }
                    }
                    exploration_done = covered && (comps.size() == 1 || config_.explore_only);
                }
            }

            if (exploration_done) {
                if (config_.explore_only) {
                    t0_tick_ = static_cast<std::int64_t>(tick_);
                    t1_tick_ = t0_tick_;
                    phase_ = Phase::Finished;
                    return true;
                }
                kickoff_rendezvous();
                if (robots_.size() == 1) {
                    select_rendezvous();
                    bool all_there = true;
                    for (const auto& r : robots_)
                        if ((r.true_world.position() - rendezvous_.point_world).norm() >
                            config_.arrival_radius)
                            all_there = false;
                    if (all_there) {
                        t1_tick_ = static_cast<std::int64_t>(tick_);
                        phase_ = Phase::Finished;
                        return true;
                    }
                }
                continue;
            }
            for (auto& r : robots_) decide_and_move(r);
        } else if (phase_ == Phase::Kickoff) {
            select_rendezvous();
            // fall through to travel the same tick
            for (auto& r : robots_) travel_tick(r);
        } else if (phase_ == Phase::Travel) {
            for (auto& r : robots_) travel_tick(r);
        }

        if (phase_ == Phase::Travel || phase_ == Phase::Kickoff) {
            bool all_there = true;
            for (const auto& r : robots_) {
                if ((r.true_world.position() - rendezvous_.point_world).norm() >
                    config_.arrival_radius) {
                    all_there = false;
                    break;
                }
            }
            if (all_there) {
                t1_tick_ = static_cast<std::int64_t>(tick_);
                phase_ = Phase::Finished;
                return true;
            }
        }
    }
    timed_out_ = true;
    return false;
}

CoverageResult run_coverage_walk(const World& world, const Pose2& start_world,
                                 const SimConfig& config) {
    SimConfig cfg = config;
    cfg.explore_only = true;
    cfg.strategy = Strategy::NbvOnly;
    Simulation sim(world, {start_world}, CommGraph::full(1), cfg);
    sim.run();
    CoverageResult out;
    out.map = sim.robot(0).map;
    out.final_pose = sim.robot(0).pose;
    out.frame = sim.robot(0).frame;
    return out;
}

}  // namespace pier
