#include "pier/report.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pier {

namespace {

std::string fmt(double v, int precision = 6) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << v;
    return out.str();
}

const char* kKindColumns[] = {"bytes_map_delta", "bytes_scan",     "bytes_rp",
                              "bytes_pose",      "bytes_frontier", "bytes_structural"};

}  // namespace

std::string metrics_csv_header() {
    std::string header =
        "world,strategy,seed,robots,t0_s,t1_s,reached,timed_out,bytes_total";
    for (const char* col : kKindColumns) {
        header += ",";
        header += col;
    }
    header +=
        ",p_hat_x,p_hat_y,f_hat,p_star_x,p_star_y,f_star,dist_err,path_err,"
        "fallback_nodes,icp_attempts,icp_rejected,measurements,partition_updates,replans";
    return header;
}

void write_metrics_csv(std::ostream& out, const std::vector<Metrics>& metrics) {
    out << metrics_csv_header() << "\n";
    for (const auto& m : metrics) {
        out << m.world_name << "," << to_string(m.strategy) << "," << m.seed << "," << m.robots
            << "," << fmt(m.t0_s) << "," << fmt(m.t1_s) << "," << (m.reached ? 1 : 0) << ","
            << (m.timed_out ? 1 : 0) << "," << m.bytes_total;
        for (std::size_t k = 0; k < m.bytes_by_kind.size(); ++k) out << "," << m.bytes_by_kind[k];
        out << "," << fmt(m.p_hat_world.x()) << "," << fmt(m.p_hat_world.y()) << ","
            << fmt(m.f_hat) << "," << fmt(m.p_star.x()) << "," << fmt(m.p_star.y()) << ","
            << fmt(m.f_star) << "," << fmt(m.dist_err) << "," << fmt(m.path_err) << ","
            << m.counters.fallback_nodes << "," << m.counters.icp_attempts << ","
            << m.counters.icp_rejected << "," << m.counters.measurements << ","
            << m.counters.partition_updates << "," << m.counters.replans << "\n";
    }
}

void write_events_csv(std::ostream& out, const std::vector<EventRow>& events) {
    out << "tick,robot,event,detail\n";
    for (const auto& e : events)
        out << e.tick << "," << e.robot << "," << e.type << "," << e.detail << "\n";
}

void write_volume_csv(std::ostream& out, const VolumeLedger& ledger) {
    out << "tick,kind,bytes\n";
    for (const auto& row : ledger.rows())
        out << row.tick << "," << to_string(row.kind) << "," << row.bytes << "\n";
}

void write_result_json(std::ostream& out, const Metrics& m) {
    nlohmann::json j;
    j["world"] = m.world_name;
    j["strategy"] = to_string(m.strategy);
    j["seed"] = m.seed;
    j["robots"] = m.robots;
    j["t0_s"] = m.t0_s;
    j["t1_s"] = m.t1_s;
    j["reached"] = m.reached;
    j["volume_bytes"] = m.bytes_total;
    j["p_hat"] = {m.p_hat_world.x(), m.p_hat_world.y()};
    j["f_hat"] = m.f_hat;
    j["p_star"] = {m.p_star.x(), m.p_star.y()};
    j["f_star"] = m.f_star;
    j["distance_error"] = m.dist_err;
    j["path_length_error"] = m.path_err;
    out << j.dump(2) << "\n";
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << "strategy,runs,t0_avg,t0_std,t0_median,t1_avg,t1_std,t1_median,"
           "volume_avg,volume_std,volume_median\n";
    for (const auto& r : rows) {
        out << r.strategy << "," << r.runs << "," << fmt(r.t0_avg) << "," << fmt(r.t0_std) << ","
            << fmt(r.t0_median) << "," << fmt(r.t1_avg) << "," << fmt(r.t1_std) << ","
            << fmt(r.t1_median) << "," << fmt(r.volume_avg) << "," << fmt(r.volume_std) << ","
            << fmt(r.volume_median) << "\n";
    }
}

void write_svg(std::ostream& out, const Simulation& sim) {
    const World& world = sim.world();
    const double res = world.resolution();
    const double scale = 12.0;  // px per meter
    const double w = world.width_m() * scale;
    const double h = world.height_m() * scale;
    auto px = [&](double x) { return x * scale; };
    auto py = [&](double y) { return h - y * scale; };  // y up

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#fafafa\"/>\n";

    // Occupied cells merged into row runs.
    out << "<g fill=\"#37474f\">\n";
    for (int cy = 0; cy < world.height(); ++cy) {
        int run_start = -1;
        for (int cx = 0; cx <= world.width(); ++cx) {
            const bool occ = cx < world.width() && world.occupied(cx, cy);
            if (occ && run_start < 0) run_start = cx;
            if (!occ && run_start >= 0) {
                out << "<rect x=\"" << px(run_start * res) << "\" y=\"" << py((cy + 1) * res)
                    << "\" width=\"" << (cx - run_start) * res * scale << "\" height=\""
                    << res * scale << "\"/>\n";
                run_start = -1;
            }
        }
    }
    out << "</g>\n";

    static const char* kColors[] = {"#e53935", "#1e88e5", "#43a047", "#fb8c00",
                                    "#8e24aa", "#00acc1", "#6d4c41", "#c0ca33"};
    for (int i = 0; i < sim.robot_count(); ++i) {
        const auto& r = sim.robot(i);
        const char* color = kColors[i % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : r.trajectory_world) out << px(p.x()) << "," << py(p.y()) << " ";
        out << "\"/>\n";
        // Topological nodes in world coordinates via the robot's frame.
        for (const auto& n : r.map.nodes()) {
            const Vec2 wp = r.frame.apply(n.p);
            if (n.is_main())
                out << "<circle cx=\"" << px(wp.x()) << "\" cy=\"" << py(wp.y())
                    << "\" r=\"3\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
            else
                out << "<rect x=\"" << px(wp.x()) - 1.5 << "\" y=\"" << py(wp.y()) - 1.5
                    << "\" width=\"3\" height=\"3\" fill=\"" << color
                    << "\" fill-opacity=\"0.5\"/>\n";
        }
        const Vec2 start = r.trajectory_world.front();
        out << "<circle cx=\"" << px(start.x()) << "\" cy=\"" << py(start.y())
            << "\" r=\"5\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    }

    if (sim.rendezvous().selected) {
        const Vec2 p = sim.rendezvous().point_world;
        out << "<circle cx=\"" << px(p.x()) << "\" cy=\"" << py(p.y())
            << "\" r=\"6\" fill=\"#fdd835\" stroke=\"#f57f17\" stroke-width=\"2\"/>\n";
    }
    out << "</svg>\n";
}

void write_run_outputs(const std::string& dir, const Metrics& metrics, const Simulation& sim,
                       bool render_svg) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/metrics.csv");
        write_metrics_csv(out, {metrics});
    }
    {
        std::ofstream out(dir + "/events.csv");
        write_events_csv(out, metrics.events);
    }
    {
        std::ofstream out(dir + "/volume.csv");
        write_volume_csv(out, sim.ledger());
    }
    {
        std::ofstream out(dir + "/result.json");
        write_result_json(out, metrics);
    }
    if (render_svg) {
        std::ofstream out(dir + "/map.svg");
        write_svg(out, sim);
    }
}

}  // namespace pier
