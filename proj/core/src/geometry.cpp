#include "pier/geometry.hpp"

namespace pier {

double normalize_angle(double theta) {
    // Map into (-pi, pi]; fmod keeps this O(1) for large inputs.
    theta = std::fmod(theta, 2.0 * M_PI);
    if (theta <= -M_PI) theta += 2.0 * M_PI;
    if (theta > M_PI) theta -= 2.0 * M_PI;
    return theta;
}

}  // namespace pier
