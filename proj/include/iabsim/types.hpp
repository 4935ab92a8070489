#pragma once

#include <chrono>
#include <compare>
#include <cstdint>

namespace iabsim {

using NodeId = std::uint32_t;

/// Simulation clock. Integer nanoseconds keep event ordering exact.
using SimTime = std::chrono::nanoseconds;

inline constexpr SimTime from_seconds(double s) {
  return SimTime{static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5))};
}

inline constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) * 1e-9; }

inline constexpr double to_millis(SimTime t) { return static_cast<double>(t.count()) * 1e-6; }

/// GTP-style tunnel identifier, one per UE bearer.
struct TunnelId {
  std::uint32_t value = 0;
  auto operator<=>(const TunnelId&) const = default;
};

}  // namespace iabsim
