#pragma once

#include "pier/fhtmap.hpp"
#include "pier/geometry.hpp"
#include "pier/grid.hpp"
#include "pier/netsim.hpp"
#include "pier/partition.hpp"
#include "pier/planner.hpp"
#include "pier/relpose.hpp"
#include "pier/world.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pier {

enum class Strategy { Pier, NbvOnly, FullCoverage, GridShare };

Strategy strategy_from_string(const std::string& name);
const char* to_string(Strategy strategy);

enum class Mode { Nbv, Partitioned, Reassigned, RendezvousTravel, Done };

struct SimConfig {
    SelectionParams selection;
    IcpParams icp;
    PgoOptions pgo;
    Eigen::Vector3d omega_diag{4.0, 1.0, 1.0};  // information on [dtheta, dx, dy]

    Strategy strategy = Strategy::Pier;
    double theta_match = 0.96;
    double speed = 0.5;          // m/s
    double dt = 0.1;             // s per tick
    double rp_check_dist = 0.5;  // motion between estimation attempts
    double pose_broadcast_dist = 1.0;
    int replan_interval_ticks = 10;
    int min_cluster = 5;
    double arrival_radius = 0.3;
    double sample_density = 2.0;  // rendezvous candidates per meter per axis
    double timeout_s = 3000.0;
    std::uint64_t seed = 1;

    double odom_noise_sigma = 0.0;      // per-step random walk on believed pose
    double rp_noise_sigma_xy = 0.0;     // injected measurement noise
    double rp_noise_sigma_theta = 0.0;

    double grid_share_period_s = 1.0;     // grid-share baseline cadence
    double grid_share_overlap_m2 = 100.0; // overlap needed before grid correlation locks

    // Study hook: finish exploration on full coverage and skip the
    // rendezvous phase (used to build maps for the selection studies).
    bool explore_only = false;
};

struct EventRow {
    std::uint64_t tick = 0;
    int robot = -1;
    std::string type;
    std::string detail;
};

struct SimCounters {
    int fallback_nodes = 0;
    int icp_attempts = 0;
    int icp_rejected = 0;
    int measurements = 0;
    int partition_updates = 0;
    int replans = 0;
};

struct RendezvousOutcome {
    bool selected = false;
    Vec2 point_ref{0.0, 0.0};    // reference (anchor) frame
    Vec2 point_world{0.0, 0.0};  // ground-truth embedding via the anchor frame
    double f_value = 0.0;
    std::vector<double> per_robot_lengths;
    std::size_t samples_evaluated = 0;
    double selection_ms = 0.0;
};

class Simulation {
public:
    Simulation(const World& world, std::vector<Pose2> starts_world, CommGraph comm,
               SimConfig config);

    /// Run to rendezvous, coverage (explore_only), or timeout.
    /// Returns true when the run finished without timing out.
    bool run();

    // --- results ---------------------------------------------------------
    bool timed_out() const { return timed_out_; }
    bool rendezvous_reached() const { return t1_tick_ >= 0; }
    std::int64_t t0_tick() const { return t0_tick_; }
    std::int64_t t1_tick() const { return t1_tick_; }
    double t0_seconds() const { return t0_tick_ < 0 ? -1.0 : t0_tick_ * config_.dt; }
    double t1_seconds() const { return t1_tick_ < 0 ? -1.0 : t1_tick_ * config_.dt; }
    const VolumeLedger& ledger() const { return network_.ledger(); }
    const std::vector<EventRow>& events() const { return events_; }
    const SimCounters& counters() const { return counters_; }
    const RendezvousOutcome& rendezvous() const { return rendezvous_; }
    const World& world() const { return world_; }
    const SimConfig& config() const { return config_; }
    int robot_count() const { return static_cast<int>(robots_.size()); }

    /// Ground-truth world positions captured when the RP graph connected.
    const std::vector<Vec2>& positions_at_t0() const { return world_positions_t0_; }

    // --- per-robot inspection (tests, reports) ---------------------------
    struct Robot {
        int id = -1;
        Pose2 frame;       // own map frame -> world (the start pose)
        Pose2 pose;        // believed pose in the own frame
        Pose2 true_world;  // ground truth
        RobotGrid grid;
        FhtMap map;
        CandidateBuffer buffer{512};
        Mode mode = Mode::Nbv;
        std::optional<Vec2> goal;  // own frame
        std::vector<Vec2> path;
        std::size_t path_index = 0;

        // Shared state rebuilt from received broadcasts; identical across
        // robots one tick after any change.
        std::vector<RpMeasurement> measurements;  // canonical order
        std::map<int, FhtMap> neighbor_maps;
        std::map<int, FhtMap> structural_maps;
        std::map<int, Pose2> known_poses;
        std::map<int, std::vector<Vec2>> frontier_summaries;
        std::vector<int> component;           // sorted ids incl. self
        std::map<int, Pose2> component_frames;  // robot -> pose in reference frame
        Partition partition;

        // Bookkeeping
        Scan last_scan;
        bool has_scan = false;
        Vec2 last_rp_check{0, 0};
        bool rp_checked_once = false;
        std::size_t neighbor_nodes_seen = 0;
        Vec2 last_pose_broadcast{0, 0};
        Vec2 drift{0, 0};  // believed minus true own-frame position
        double dist_since_node = 0.0;
        std::optional<Rect> last_node_rect;
        std::set<std::pair<int, int>> matched;  // (robot, node) pairs already measured
        bool new_measurement_flag = false;
        bool region_was_empty = false;
        std::size_t patrol_next = 0;
        Vec2 rendezvous_target{0, 0};  // own frame
        std::vector<Vec2> trajectory_world;
        std::vector<Vec2> last_summary_sent;
        std::size_t grid_cells_shared = 0;
    };
    const Robot& robot(int id) const { return robots_[static_cast<std::size_t>(id)]; }

private:
    // Tick phases
    void process_inbox(Robot& r);
    void sense_and_map(Robot& r);
    void run_rp_estimation(Robot& r);
    void grid_share_tick();
    void decide_and_move(Robot& r);
    void kickoff_rendezvous();
    void select_rendezvous();
    void travel_tick(Robot& r);

    // Helpers
    void log(std::uint64_t tick, int robot, const char* type, std::string detail);
    void broadcast_all(int origin, Message msg);
    void send_map_delta(Robot& r, const std::vector<FhtNode>& nodes,
                        const std::vector<FhtEdge>& new_edges);
    void create_main_node(Robot& r, const Vec2& position, const Scan& scan, const Descriptor& phi);
    void create_support_node(Robot& r);
    void maybe_broadcast_pose(Robot& r, bool force);
    void update_partition(Robot& r);
    bool partitions_due(const Robot& r) const;
    void choose_goal(Robot& r);
    std::optional<Vec2> reassign_goal(Robot& r);
    void plan_to(Robot& r, const Vec2& goal_own, bool allow_unknown);
    void step_along_path(Robot& r);
    Descriptor descriptor_at(const Robot& r) const;
    std::vector<FrontierCenter> centers_in_region(Robot& r, bool restrict_to_region);
    double shared_center_cost(const Robot& viewer, int member, const Vec2& center_ref) const;
    bool component_exhausted(const Robot& r) const;
    void full_coverage_goals(Robot& r);

    const World& world_;
    DescriptorField field_;
    SimConfig config_;
    Network network_;
    std::vector<Robot> robots_;
    std::vector<EventRow> events_;
    SimCounters counters_;
    RendezvousOutcome rendezvous_;

    enum class Phase { Explore, Kickoff, Travel, Finished };
    Phase phase_ = Phase::Explore;
    std::uint64_t tick_ = 0;
    std::int64_t t0_tick_ = -1;
    std::int64_t t1_tick_ = -1;
    bool timed_out_ = false;
    int component_count_ = 0;
    std::vector<Vec2> world_positions_t0_;
    std::vector<std::pair<std::uint64_t, std::vector<Message>>> self_pending_;  // unused slot kept small
    std::vector<std::vector<std::pair<std::uint64_t, Message>>> loopback_;
    SplitMix64 noise_rng_;
    std::uint64_t last_grid_share_tick_ = 0;
};

/// Single-robot full-coverage run used by the rendezvous-selection studies:
/// returns the built map, the robot's final believed pose, and its frame.
struct CoverageResult {
    FhtMap map;
    Pose2 final_pose;
    Pose2 frame;
};
CoverageResult run_coverage_walk(const World& world, const Pose2& start_world,
                                 const SimConfig& config);

}  // namespace pier
