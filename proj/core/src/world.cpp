#include "pier/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pier {

double dot(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (int i = 0; i < kDescriptorDim; ++i)
        s += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    return s;
}

World::World(int width_cells, int height_cells, double resolution, std::uint64_t descriptor_seed)
    : width_(width_cells),
      height_(height_cells),
      resolution_(resolution),
      descriptor_seed_(descriptor_seed),
      cells_(static_cast<std::size_t>(width_cells) * height_cells, 0) {
    if (width_ < 3 || height_ < 3) throw std::invalid_argument("world smaller than 3x3");
    if (resolution_ <= 0.0) throw std::invalid_argument("resolution must be positive");
    force_border();
}

void World::force_border() {
    for (int cx = 0; cx < width_; ++cx) {
        set_occupied(cx, 0, true);
        set_occupied(cx, height_ - 1, true);
    }
    for (int cy = 0; cy < height_; ++cy) {
        set_occupied(0, cy, true);
        set_occupied(width_ - 1, cy, true);
    }
}

void World::set_descriptor_seed(std::uint64_t seed) { descriptor_seed_ = seed; }

World World::load(std::istream& in, std::uint64_t descriptor_seed) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("world file: empty file");
    std::istringstream header(line);
    std::string key;
    double resolution = 0.0;
    header >> key >> resolution;
    if (key != "resolution" || !(resolution > 0.0))
        throw std::runtime_error("world file: expected header 'resolution <meters>'");

    // Rows are listed top to bottom; the last line is y = 0.
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(line);
    }
    if (rows.empty()) throw std::runtime_error("world file: no grid rows");
    const std::size_t width = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != width) throw std::runtime_error("world file: non-rectangular rows");

    World w(static_cast<int>(width), static_cast<int>(rows.size()), resolution, descriptor_seed);
    for (int cy = 0; cy < w.height_; ++cy) {
        const std::string& row = rows[rows.size() - 1 - cy];
        for (int cx = 0; cx < w.width_; ++cx) {
            const char c = row[static_cast<std::size_t>(cx)];
            if (c == 'X')
                w.set_occupied(cx, cy, true);
            else if (c != '.')
                throw std::runtime_error(std::string("world file: unknown character '") + c + "'");
        }
    }
    w.force_border();
    return w;
}

World World::load_file(const std::string& path, std::uint64_t descriptor_seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("world file: cannot open " + path);
    return load(in, descriptor_seed);
}

void World::save(std::ostream& out) const {
    out << "resolution " << resolution_ << "\n";
    for (int cy = height_ - 1; cy >= 0; --cy) {
        for (int cx = 0; cx < width_; ++cx) out << (occupied(cx, cy) ? 'X' : '.');
        out << "\n";
    }
}

double World::raycast(const Vec2& origin, double angle, double max_range) const {
    int cx = cell_of(origin.x());
    int cy = cell_of(origin.y());
    if (!in_bounds(cx, cy) || occupied(cx, cy))
        throw std::invalid_argument("raycast origin in occupied space");

    const double dx = std::cos(angle), dy = std::sin(angle);
    const int step_x = dx > 0.0 ? 1 : -1;
    const int step_y = dy > 0.0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();
    const double t_delta_x = dx != 0.0 ? std::abs(resolution_ / dx) : inf;
    const double t_delta_y = dy != 0.0 ? std::abs(resolution_ / dy) : inf;

    // Distance to the first vertical / horizontal cell boundary.
    double t_max_x = inf, t_max_y = inf;
    if (dx != 0.0) {
        const double edge = (dx > 0.0 ? (cx + 1) : cx) * resolution_;
        t_max_x = (edge - origin.x()) / dx;
    }
    if (dy != 0.0) {
        const double edge = (dy > 0.0 ? (cy + 1) : cy) * resolution_;
        t_max_y = (edge - origin.y()) / dy;
    }

    // The occupied border guarantees termination before leaving the grid.
    while (true) {
        double t;
        if (t_max_x < t_max_y) {
            t = t_max_x;
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            cy += step_y;
        }
        if (t >= max_range) return max_range;
        if (!in_bounds(cx, cy)) return max_range;
        if (occupied(cx, cy)) return t;
    }
}

Scan raycast_scan(const World& world, const Pose2& pose) {
    Scan scan;
    scan.max_range = static_cast<float>(kLidarMaxRange);
    for (int i = 0; i < kScanBeams; ++i) {
        const double angle = pose.theta + i * (M_PI / 180.0);
        scan.ranges[i] =
            static_cast<float>(world.raycast({pose.x, pose.y}, angle, kLidarMaxRange));
    }
    return scan;
}

DescriptorField::DescriptorField(std::uint64_t seed, double correlation_m) {
    // Random Fourier features of a Gaussian kernel exp(-d^2 / L^2).
    // Radii are stratified over the spectral CDF and angles spread evenly
    // (then shuffled) so the empirical kernel concentrates tightly around
    // its expectation even at 512 dimensions.
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x1234567ULL);
    const double sigma_w = std::sqrt(2.0) / correlation_m;

    std::array<int, kDescriptorDim> perm{};
    for (int i = 0; i < kDescriptorDim; ++i) perm[i] = i;
    for (int i = kDescriptorDim - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.next_below(static_cast<std::uint64_t>(i + 1))]);

    for (int j = 0; j < kDescriptorDim; ++j) {
        const double u = (j + rng.next_double()) / kDescriptorDim;
        const double r = sigma_w * std::sqrt(-2.0 * std::log(std::max(1e-12, 1.0 - u)));
        const double psi = 2.0 * M_PI * (perm[j] + rng.next_double()) / kDescriptorDim;
        freq_x_[j] = static_cast<float>(r * std::cos(psi));
        freq_y_[j] = static_cast<float>(r * std::sin(psi));
        phase_[j] = static_cast<float>(2.0 * M_PI * rng.next_double());
    }
}

Descriptor DescriptorField::sample(const Vec2& position) const {
    Descriptor d;
    double norm_sq = 0.0;
    for (int j = 0; j < kDescriptorDim; ++j) {
        const double v = std::cos(freq_x_[j] * position.x() + freq_y_[j] * position.y() + phase_[j]);
        d.values[j] = static_cast<float>(v);
        norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& v : d.values) v = static_cast<float>(v * inv);
    return d;
}

Descriptor sample_descriptor(const World& world, const DescriptorField& field, const Vec2& position) {
    if (!world.free_at(position))
        throw std::invalid_argument("sample_descriptor: position not in free space");
    return field.sample(position);
}

Pose2 advance_path(const Pose2& pose, std::span<const Vec2> path, std::size_t& index, double dist) {
    Vec2 cur = pose.position();
    double heading = pose.theta;
    while (dist > 0.0 && index < path.size()) {
        const Vec2 seg = path[index] - cur;
        const double len = seg.norm();
        if (len < 1e-12) {
            ++index;
            continue;
        }
        heading = std::atan2(seg.y(), seg.x());
        if (len <= dist) {
            cur = path[index];
            dist -= len;
            ++index;
        } else {
            cur += seg * (dist / len);
            dist = 0.0;
        }
    }
    return {cur.x(), cur.y(), heading};
}

Pose2 step_robot(const Pose2& pose, std::span<const Vec2> path, double speed, double dt) {
    std::size_t index = 0;
    return advance_path(pose, path, index, speed * dt);
}

}  // namespace pier
