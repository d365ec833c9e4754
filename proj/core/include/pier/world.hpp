#pragma once

#include "pier/geometry.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pier {

inline constexpr int kScanBeams = 360;
inline constexpr int kDescriptorDim = 512;
inline constexpr double kLidarMaxRange = 12.0;

/// 360-beam range scan; beam i points at i degrees in the sensor frame.
struct Scan {
    std::array<float, kScanBeams> ranges{};
    float max_range = static_cast<float>(kLidarMaxRange);

    int finite_beam_count() const {
        int n = 0;
        for (float r : ranges)
            if (r < max_range - 1e-4f) ++n;
        return n;
    }
};

/// Unit-norm place signature, a deterministic function of world position.
struct Descriptor {
    std::array<float, kDescriptorDim> values{};
};

double dot(const Descriptor& a, const Descriptor& b);

/// Ground-truth occupancy grid. Cell (cx, cy) covers
/// [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res); the border is always occupied.
class World {
public:
    World() = default;
    World(int width_cells, int height_cells, double resolution, std::uint64_t descriptor_seed);

    static World load(std::istream& in, std::uint64_t descriptor_seed = 0);
    static World load_file(const std::string& path, std::uint64_t descriptor_seed = 0);
    void save(std::ostream& out) const;

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    std::uint64_t descriptor_seed() const { return descriptor_seed_; }
    void set_descriptor_seed(std::uint64_t seed);

    double width_m() const { return width_ * resolution_; }
    double height_m() const { return height_ * resolution_; }

    bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cy >= 0 && cx < width_ && cy < height_;
    }
    bool occupied(int cx, int cy) const { return cells_[idx(cx, cy)]; }
    void set_occupied(int cx, int cy, bool v) { cells_[idx(cx, cy)] = v; }

    int cell_of(double coord) const { return static_cast<int>(std::floor(coord / resolution_)); }
    Vec2 cell_center(int cx, int cy) const {
        return {(cx + 0.5) * resolution_, (cy + 0.5) * resolution_};
    }

    bool free_at(const Vec2& p) const {
        const int cx = cell_of(p.x()), cy = cell_of(p.y());
        return in_bounds(cx, cy) && !occupied(cx, cy);
    }

    /// Distance from `origin` along `angle` to the first occupied cell
    /// boundary, clamped to max_range.
    double raycast(const Vec2& origin, double angle, double max_range = kLidarMaxRange) const;

private:
    std::size_t idx(int cx, int cy) const { return static_cast<std::size_t>(cy) * width_ + cx; }
    void force_border();

    int width_ = 0;
    int height_ = 0;
    double resolution_ = 0.0;
    std::uint64_t descriptor_seed_ = 0;
    std::vector<std::uint8_t> cells_;
};

/// Full 360-degree lidar sweep from `pose` (beam i at pose.theta + i degrees).
/// Throws std::invalid_argument when the pose sits in occupied space.
Scan raycast_scan(const World& world, const Pose2& pose);

/// Smooth seeded signature field over the plane. Signatures of nearby
/// positions have dot product near 1; the expected dot decays like
/// exp(-d^2 / L^2) with L = 8 m, which puts the 0.96 match threshold at
/// about 1.6 m and full decorrelation beyond ~15 m.
class DescriptorField {
public:
    DescriptorField() = default;
    explicit DescriptorField(std::uint64_t seed, double correlation_m = 8.0);

    Descriptor sample(const Vec2& position) const;

private:
    std::array<float, kDescriptorDim> freq_x_{};
    std::array<float, kDescriptorDim> freq_y_{};
    std::array<float, kDescriptorDim> phase_{};
};

/// Descriptor at a free world position (field derived from the world's seed).
/// Throws std::invalid_argument for occupied positions.
Descriptor sample_descriptor(const World& world, const DescriptorField& field, const Vec2& position);

/// Advance `dist` meters along the waypoint polyline starting at waypoint
/// `index`; `index` is updated past consumed waypoints. Heading follows the
/// segment direction; motion clamps at the final waypoint.
Pose2 advance_path(const Pose2& pose, std::span<const Vec2> path, std::size_t& index, double dist);

/// One kinematic step of arc length speed*dt along the polyline.
Pose2 step_robot(const Pose2& pose, std::span<const Vec2> path, double speed, double dt);

}  // namespace pier
