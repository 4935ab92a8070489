#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/geometry.hpp"
#include "iabsim/metrics.hpp"
#include "iabsim/scheduler.hpp"
#include "iabsim/stack.hpp"
#include "iabsim/topology.hpp"
#include "iabsim/traffic.hpp"

namespace iabsim {

struct GeometryConfig {
  double block_side = 50.0;
  double street_width = 10.0;
  int rows = 4;
  int cols = 4;
  double building_height = 15.0;
  NodeHeights heights;
  double relay_distance = 85.0;
};

struct SimConfig {
  GeometryConfig geometry;
  RadioConfig radio;
  MacConfig mac;
  StackConfig stack;
  CoreConfig core;
  AttachPolicy attach_policy = AttachPolicy::closest_wired;
  SimTime attach_delay = std::chrono::milliseconds(100);
  SimTime warmup = std::chrono::milliseconds(500);  // after attach_delay, excluded from metrics
  SimTime sim_duration = std::chrono::milliseconds(10600);
  int n_relays = 4;
  int n_ues = 40;
  double rate_bps = 224e6;
  std::uint32_t packet_size = 1400;
  std::uint64_t seed = 1;

  bool record_packets = false;
  bool record_allocations = false;
  int audit_interval = 0;  // subframes between conservation audits; 0 audits only at the end

  SimTime window_start() const { return attach_delay + warmup; }
  void validate() const;
};

/// Placement, link states and tree for one run.
struct Deployment {
  std::optional<Scenario> scenario;
  IabTree tree;
  LinkTable links;
};

/// Geometry, channel draws, IAB and UE attachment and look-ahead depths.
Deployment build_deployment(const SimConfig& config);

/// Link between two nodes with the shadowing draw fixed by (seed, labels).
LinkState make_link(const SimConfig& config, const Scenario& scenario, NodeId a, const Position& pa,
                    std::uint64_t label_a, NodeId b, const Position& pb, std::uint64_t label_b, bool rx_is_ue);

struct FlowResult {
  NodeId ue = 0;
  TunnelId tunnel;
  NodeId serving_gnb = 0;
  bool via_iab = false;
  int hops = 0;  // wireless hops from the donor to the UE
  std::uint64_t generated = 0;
  std::uint64_t arrived = 0;  // reached the donor
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t window_delivered = 0;
  std::uint64_t window_bytes = 0;
  std::uint64_t window_dropped = 0;
  SimTime window_latency_sum{0};
  SimTime min_latency{0};
  bool operator==(const FlowResult&) const = default;
};

/// Violation counters for properties checked while the run executes.
struct InvariantReport {
  std::uint64_t subframes_checked = 0;
  std::uint64_t non_overlap = 0;
  std::uint64_t half_cap = 0;
  std::uint64_t dci_causality = 0;
  std::uint64_t allocation_timing = 0;
  std::uint64_t work_conservation = 0;
  std::uint64_t rr_fairness = 0;
  std::uint64_t latency_floor = 0;
  std::uint64_t duplicate_delivery = 0;
  std::uint64_t hop_trace = 0;
  std::uint64_t buffer_overflow = 0;
  std::uint64_t conservation = 0;
  std::uint64_t event_order = 0;
  std::uint64_t audits = 0;
  std::uint64_t dcis_checked = 0;
  std::uint64_t packets_checked = 0;
  std::int64_t peak_ue_buffer = 0;
  std::int64_t peak_iab_buffer = 0;

  std::uint64_t scheduler_violations() const {
    return non_overlap + half_cap + dci_causality + allocation_timing + work_conservation + rr_fairness;
  }
  std::uint64_t stack_violations() const {
    return latency_floor + duplicate_delivery + hop_trace + buffer_overflow + conservation;
  }
  bool operator==(const InvariantReport&) const = default;
};

/// "name=count" for every non-zero violation counter, empty when clean.
std::string describe_violations(const InvariantReport& report);

struct DeliveryRecord {
  std::uint64_t packet_id = 0;
  NodeId ue = 0;
  SimTime created_at{0};
  SimTime delivered_at{0};
  std::vector<NodeId> hops;
  bool operator==(const DeliveryRecord&) const = default;
};

struct AllocationRecord {
  NodeId gnb = 0;
  int lookahead = 0;
  SubframeAllocation allocation;
  bool operator==(const AllocationRecord&) const = default;
};

struct RunResult {
  std::uint64_t seed = 0;
  int n_relays = 0;
  double rate_bps = 0.0;
  SimTime window_start{0};
  SimTime window_end{0};
  std::map<NodeId, int> lookahead;
  std::vector<FlowResult> flows;
  std::vector<GroupMetrics> metrics;
  InvariantReport checks;
  std::uint64_t events_processed = 0;
  std::vector<DeliveryRecord> deliveries;      // with record_packets
  std::vector<AllocationRecord> allocations;   // with record_allocations
  bool operator==(const RunResult&) const = default;
};

enum class EventKind : std::uint8_t {
  tb_reception,
  harq_feedback,
  status_report,
  timer_expiry,
  flow_start,
  flow_stop,
  packet_arrival,
  subframe_tick,
};

struct Event {
  SimTime time{0};
  EventKind kind = EventKind::subframe_tick;
  std::uint64_t seq = 0;
  std::uint32_t target = 0;
  std::uint64_t payload = 0;
};

/// Time-ordered queue; equal times resolve by kind, then insertion order.
class EventQueue {
 public:
  void push(SimTime time, EventKind kind, std::uint32_t target = 0, std::uint64_t payload = 0);
  Event pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t seq_ = 0;
};

/// One replication over a fixed deployment.
class Simulation {
 public:
  Simulation(const SimConfig& config, Deployment deployment);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  RunResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RunResult run_once(const SimConfig& config);

/// Runs seeds config.seed, config.seed + 1, ... Results come back in seed
/// order whatever the thread count.
std::vector<RunResult> run_campaign(const SimConfig& config, int n_runs, unsigned threads = 1);

}  // namespace iabsim
