#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace pfdlab {

/// Simulation time in integer femtoseconds.
using Fs = std::int64_t;

inline constexpr Fs kFsPerPs = 1'000;
inline constexpr Fs kFsPerNs = 1'000'000;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr Fs ps(double v) { return static_cast<Fs>(v * 1e3 + (v >= 0 ? 0.5 : -0.5)); }
constexpr Fs ns(double v) { return static_cast<Fs>(v * 1e6 + (v >= 0 ? 0.5 : -0.5)); }
constexpr double to_ps(Fs t) { return static_cast<double>(t) / 1e3; }
constexpr double to_seconds(Fs t) { return static_cast<double>(t) * 1e-15; }
constexpr Fs from_seconds(double s) { return static_cast<Fs>(s * 1e15 + (s >= 0 ? 0.5 : -0.5)); }

/// Period of a clock at `hz`, rounded to the nearest femtosecond.
constexpr Fs period_of(double hz) { return from_seconds(1.0 / hz); }

/// "40ps", "1.5ns", "1200fs", or a bare integer (femtoseconds).
Fs parse_time(std::string_view text);
/// "0.2pi", "pi", "-0.5pi", or a bare number in radians.
double parse_phase(std::string_view text);

/// Bisection-friendly ps formatting: "40.0 ps".
std::string format_ps(Fs t, int decimals = 1);

}  // namespace pfdlab
