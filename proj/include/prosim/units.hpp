#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace prosim {

// The whole stack runs on one fixed clock.
inline constexpr int kTickRateHz = 1000;
inline constexpr double kDt = 1.0 / kTickRateHz;

using Tick = std::int64_t;

inline constexpr double ticks_to_seconds(Tick t) { return static_cast<double>(t) * kDt; }
inline constexpr Tick seconds_to_ticks(double s) { return static_cast<Tick>(std::llround(s * kTickRateHz)); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double horizontal_norm() const { return std::hypot(x, y); }
};

inline constexpr double kGravity = 9.81;

}  // namespace prosim
