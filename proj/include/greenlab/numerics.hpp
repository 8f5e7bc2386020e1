#ifndef GREENLAB_NUMERICS_HPP
#define GREENLAB_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace greenlab {

inline constexpr double kPi = std::numbers::pi;

/// Quintic smoothstep on [0,1]; two continuous derivatives at both ends.
inline double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

/// 1 for t <= a, 0 for t >= b, quintic transition in between.
inline double cutoff(double t, double a, double b) { return 1.0 - smoothstep((t - a) / (b - a)); }

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    return std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Area of the unit sphere in R^n.
inline double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

/// FNV-1a, used for stable config hashes in reports.
inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace greenlab

#endif  // GREENLAB_NUMERICS_HPP
