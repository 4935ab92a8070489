#include "iabsim/traffic.hpp"

#include <cmath>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

void FlowConfig::validate() const {
  if (!(rate_bps > 0)) throw ConfigError(fmt::format("flow to UE {} needs a positive rate", ue));
  if (packet_size == 0) throw ConfigError("packet size must be positive");
  if (stop < start) throw ConfigError("flow stops before it starts");
}

CbrSchedule::CbrSchedule(const FlowConfig& flow)
    : flow_(flow), interarrival_ns_(flow.packet_size * 8.0 / flow.rate_bps * 1e9), count_(0) {
  flow_.validate();
  const double span = static_cast<double>((flow.stop - flow.start).count());
  // First k with created_at(k) >= stop.
  auto k = static_cast<std::uint64_t>(std::max(0.0, std::floor(span / interarrival_ns_)));
  while (k > 0 && created_at(k - 1) >= flow.stop) --k;
  while (created_at(k) < flow.stop) ++k;
  count_ = k;
}

SimTime CbrSchedule::created_at(std::uint64_t k) const {
  return flow_.start + SimTime{std::llround(static_cast<double>(k) * interarrival_ns_)};
}

CbrSchedule generate_flow(const FlowConfig& flow) { return CbrSchedule(flow); }

}  // namespace iabsim
