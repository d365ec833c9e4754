#include "pier/scenario.hpp"

#include "pier/rendezvous.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pier {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_numbers(const std::string& value) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::runtime_error("config: empty number in '" + value + "'");
        out.push_back(std::stod(item));
    }
    return out;
}

std::string stem_of(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return name;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ScenarioConfig ScenarioConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    const auto slash = path.find_last_of("/\\");
    const std::string base = slash == std::string::npos ? "." : path.substr(0, slash);
    return parse(in, base);
}

ScenarioConfig ScenarioConfig::parse(std::istream& in, const std::string& base_dir) {
    ScenarioConfig cfg;
    std::map<int, Pose2> starts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto num = [&]() { return std::stod(value); };
        if (key == "world") {
            cfg.world_path = value;
            if (!value.empty() && value.front() != '/') {
                std::ifstream probe(base_dir + "/" + value);
                if (probe) cfg.world_path = base_dir + "/" + value;
            }
        } else if (key == "name") {
            cfg.name = value;
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "descriptor_seed") {
            cfg.descriptor_seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "strategy") {
            cfg.sim.strategy = strategy_from_string(value);
        } else if (key.rfind("start.", 0) == 0) {
            const int idx = std::stoi(key.substr(6));
            const auto v = parse_numbers(value);
            if (v.size() != 3)
                throw std::runtime_error("config: start expects x,y,theta_degrees");
            starts[idx] = Pose2{v[0], v[1], v[2] * M_PI / 180.0};
        } else if (key == "comm") {
            if (value != "full") {
                std::istringstream pairs(value);
                std::string pair;
                while (std::getline(pairs, pair, ',')) {
                    const auto dash = pair.find('-');
                    if (dash == std::string::npos)
                        throw std::runtime_error("config: comm edge expects a-b");
                    cfg.comm_edges.emplace_back(std::stoi(pair.substr(0, dash)),
                                                std::stoi(pair.substr(dash + 1)));
                }
            }
        } else if (key == "speed") {
            cfg.sim.speed = num();
        } else if (key == "dt") {
            cfg.sim.dt = num();
        } else if (key == "timeout") {
            cfg.sim.timeout_s = num();
        } else if (key == "arrival_radius") {
            cfg.sim.arrival_radius = num();
        } else if (key == "rp_check_dist") {
            cfg.sim.rp_check_dist = num();
        } else if (key == "pose_broadcast_dist") {
            cfg.sim.pose_broadcast_dist = num();
        } else if (key == "replan_interval") {
            cfg.sim.replan_interval_ticks = static_cast<int>(num());
        } else if (key == "min_cluster") {
            cfg.sim.min_cluster = static_cast<int>(num());
        } else if (key == "sigma_c") {
            cfg.sim.selection.sigma_c = num();
        } else if (key == "gamma1") {
            cfg.sim.selection.gamma1 = num();
        } else if (key == "gamma2") {
            cfg.sim.selection.gamma2 = num();
        } else if (key == "omega1") {
            cfg.sim.selection.omega1 = num();
        } else if (key == "omega2") {
            cfg.sim.selection.omega2 = num();
        } else if (key == "theta_sim") {
            cfg.sim.selection.theta_sim = num();
        } else if (key == "theta_match") {
            cfg.sim.theta_match = num();
        } else if (key == "support_spacing") {
            cfg.sim.selection.support_spacing = num();
        } else if (key == "delta") {
            cfg.sim.sample_density = num();
        } else if (key == "heat") {
            if (value == "off") cfg.sim.selection.omega2 = 0.0;
            else if (value != "on")
                throw std::runtime_error("config: heat expects on|off");
        } else if (key == "omega_info") {
            const auto v = parse_numbers(value);
            if (v.size() != 3) throw std::runtime_error("config: omega_info expects three values");
            cfg.sim.omega_diag = Eigen::Vector3d(v[0], v[1], v[2]);
        } else if (key == "odom_noise") {
            cfg.sim.odom_noise_sigma = num();
        } else if (key == "rp_noise_xy") {
            cfg.sim.rp_noise_sigma_xy = num();
        } else if (key == "rp_noise_theta") {
            cfg.sim.rp_noise_sigma_theta = num();
        } else if (key == "grid_share_period") {
            cfg.sim.grid_share_period_s = num();
        } else if (key == "grid_share_overlap") {
            cfg.sim.grid_share_overlap_m2 = num();
        } else {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
    if (cfg.world_path.empty()) throw std::runtime_error("config: missing world");
    if (starts.empty()) throw std::runtime_error("config: no start poses");
    for (const auto& [idx, pose] : starts) {
        if (idx != static_cast<int>(cfg.starts.size()))
            throw std::runtime_error("config: start indices must be 0..n-1 without gaps");
        cfg.starts.push_back(pose);
    }
    if (cfg.name.empty()) cfg.name = stem_of(cfg.world_path);
    return cfg;
}

Metrics run_scenario(const ScenarioConfig& config, std::shared_ptr<Simulation>* sim_out,
                     const World* preloaded) {
    World world = preloaded ? *preloaded : World::load_file(config.world_path);
    world.set_descriptor_seed(config.descriptor_seed);

    CommGraph comm;
    if (config.comm_edges.empty()) {
        comm = CommGraph::full(static_cast<int>(config.starts.size()));
    } else {
        comm.robot_count = static_cast<int>(config.starts.size());
        for (const auto& [a, b] : config.comm_edges) comm.add_edge(a, b);
    }

    SimConfig sim_cfg = config.sim;
    sim_cfg.seed = config.seed;

    auto sim = std::make_shared<Simulation>(world, config.starts, comm, sim_cfg);
    sim->run();

    Metrics m;
    m.world_name = config.name;
    m.strategy = sim_cfg.strategy;
    m.seed = config.seed;
    m.robots = static_cast<int>(config.starts.size());
    m.t0_s = sim->t0_seconds();
    m.t1_s = sim->t1_seconds();
    m.reached = sim->rendezvous_reached();
    m.timed_out = sim->timed_out();
    m.bytes_total = sim->ledger().total();
    for (std::size_t k = 0; k < m.bytes_by_kind.size(); ++k)
        m.bytes_by_kind[k] = sim->ledger().by_kind(static_cast<MessageKind>(k));
    m.counters = sim->counters();
    m.events = sim->events();

    if (sim->rendezvous().selected && !sim->positions_at_t0().empty()) {
        m.p_hat_world = sim->rendezvous().point_world;
        m.f_hat = sim->rendezvous().f_value;
        const GridOracle oracle(sim->world(), sim->positions_at_t0());
        m.p_star = oracle.p_star();
        m.f_star = oracle.f_star();
        m.dist_err = (m.p_hat_world - m.p_star).norm();
        const double f_hat_grid = oracle.evaluate(m.p_hat_world);
        m.path_err = std::isfinite(f_hat_grid) ? f_hat_grid - m.f_star : -1.0;
    }

    if (sim_out) *sim_out = std::move(sim);
    return m;
}

std::vector<Metrics> run_batch(const std::vector<ScenarioConfig>& configs, int max_workers) {
    if (max_workers <= 0) {
        max_workers = static_cast<int>(std::thread::hardware_concurrency());
        if (max_workers <= 0) max_workers = 2;
        max_workers = std::min(max_workers, 8);
    }
    std::vector<Metrics> results(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) break;
            results[i] = run_scenario(configs[i]);
        }
    };
    std::vector<std::thread> pool;
    const int workers = std::min<int>(max_workers, static_cast<int>(configs.size()));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

std::vector<Pose2> sample_free_starts(const World& world, int robots, std::uint64_t seed,
                                      double min_separation_m) {
    // Candidate cells keep one cell of wall clearance.
    std::vector<CellIdx> candidates;
    for (int cy = 2; cy < world.height() - 2; ++cy)
        for (int cx = 2; cx < world.width() - 2; ++cx) {
            bool clear = true;
            for (int dy = -1; dy <= 1 && clear; ++dy)
                for (int dx = -1; dx <= 1 && clear; ++dx)
                    if (world.occupied(cx + dx, cy + dy)) clear = false;
            if (clear) candidates.push_back({cx, cy});
        }
    if (candidates.empty()) throw std::runtime_error("sample_free_starts: no usable cells");

    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x51ULL);
    const double headings[4] = {0.0, M_PI / 2, M_PI, -M_PI / 2};
    std::vector<Pose2> starts;
    double separation = min_separation_m;
    int stale = 0;
    while (static_cast<int>(starts.size()) < robots) {
        const CellIdx c = candidates[rng.next_below(candidates.size())];
        const Vec2 p = world.cell_center(c.x, c.y);
        bool ok = true;
        for (const auto& s : starts)
            if ((s.position() - p).norm() < separation) ok = false;
        if (ok) {
            starts.emplace_back(p.x(), p.y(), headings[rng.next_below(4)]);
            stale = 0;
        } else if (++stale > 500) {
            separation *= 0.75;  // crowded world: relax until placement fits
            stale = 0;
        }
    }
    return starts;
}

std::vector<AggregateRow> aggregate(const std::vector<Metrics>& metrics) {
    std::map<std::string, std::vector<const Metrics*>> by_strategy;
    for (const auto& m : metrics) by_strategy[to_string(m.strategy)].push_back(&m);

    std::vector<AggregateRow> rows;
    for (const auto& [name, group] : by_strategy) {
        AggregateRow row;
        row.strategy = name;
        row.runs = static_cast<int>(group.size());
        std::vector<double> t0, t1, vol;
        for (const Metrics* m : group) {
            t0.push_back(m->t0_s);
            t1.push_back(m->t1_s);
            vol.push_back(static_cast<double>(m->bytes_total));
        }
        auto stats = [](const std::vector<double>& v, double& avg, double& sd) {
            avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double acc = 0.0;
            for (double x : v) acc += (x - avg) * (x - avg);
            sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
        };
        stats(t0, row.t0_avg, row.t0_std);
        stats(t1, row.t1_avg, row.t1_std);
        stats(vol, row.volume_avg, row.volume_std);
        row.t0_median = median_of(t0);
        row.t1_median = median_of(t1);
        row.volume_median = median_of(vol);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pier
