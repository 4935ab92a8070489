#pragma once

#include <cstdint>

#include "iabsim/types.hpp"

namespace iabsim {

struct FlowConfig {
  NodeId ue = 0;
  double rate_bps = 0.0;
  std::uint32_t packet_size = 1400;  // bytes
  SimTime start{0};
  SimTime stop{0};

  void validate() const;
};

struct CoreConfig {
  SimTime server_to_donor_latency = std::chrono::milliseconds(11);
};

/// Constant-bit-rate packet schedule of one flow. Packet k leaves the server
/// at start + k * packet_size * 8 / rate and is generated only if that is
/// before stop.
class CbrSchedule {
 public:
  explicit CbrSchedule(const FlowConfig& flow);

  std::uint64_t count() const { return count_; }
  SimTime created_at(std::uint64_t k) const;
  SimTime donor_arrival(std::uint64_t k, const CoreConfig& core) const {
    return created_at(k) + core.server_to_donor_latency;
  }
  double interarrival_seconds() const { return interarrival_ns_ * 1e-9; }
  const FlowConfig& flow() const { return flow_; }

 private:
  FlowConfig flow_;
  double interarrival_ns_;
  std::uint64_t count_;
};

CbrSchedule generate_flow(const FlowConfig& flow);

}  // namespace iabsim
