#pragma once

#include <Eigen/Core>
#include <cmath>

namespace pier {

using Vec2 = Eigen::Vector2d;

/// Wrap an angle into (-pi, pi].
double normalize_angle(double theta);

/// Planar rigid transform. Composition follows the usual SE(2) convention:
/// a Pose2 maps coordinates in its own frame into the parent frame.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // radians, kept in (-pi, pi]

    Pose2() = default;
    Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

    Vec2 position() const { return {x, y}; }

    Vec2 apply(const Vec2& p) const {
        const double c = std::cos(theta), s = std::sin(theta);
        return {c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y};
    }

    Pose2 compose(const Pose2& other) const {
        const Vec2 t = apply({other.x, other.y});
        return {t.x(), t.y(), theta + other.theta};
    }

    Pose2 inverse() const {
        const double c = std::cos(theta), s = std::sin(theta);
        return {-(c * x + s * y), -(-s * x + c * y), -theta};
    }
};

inline Pose2 operator*(const Pose2& a, const Pose2& b) { return a.compose(b); }

/// Axis-aligned rectangle in meters, closed on all sides.
struct Rect {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

    bool contains(const Vec2& p) const {
        return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
    }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
};

/// Deterministic 64-bit generator (splitmix64) used wherever the simulation
/// needs reproducible randomness independent of the standard library.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    /// Standard normal via Box-Muller.
    double next_gaussian() {
        double u1 = next_double(), u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace pier
