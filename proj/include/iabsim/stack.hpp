#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/scheduler.hpp"
#include "iabsim/topology.hpp"
#include "iabsim/types.hpp"

namespace iabsim {

struct StackConfig {
  std::int64_t ue_buffer_bytes = 10LL * 1024 * 1024;
  std::int64_t iab_buffer_bytes = 40LL * 1024 * 1024;
  SimTime reordering_timer = std::chrono::milliseconds(2);
  int max_harq_retx = 3;
  int harq_retx_delay = 4;  // subframes from failed transmission to retransmission
  std::uint32_t rlc_header_bytes = 2;
  std::uint32_t tunnel_overhead_bytes = 60;

  void validate() const;
};

/// gNBs a packet has been routed through, donor first.
class HopTrace {
 public:
  static constexpr std::size_t kCapacity = 8;

  void push(NodeId id);
  std::span<const NodeId> nodes() const { return {hops_.data(), size_}; }
  std::size_t size() const { return size_; }
  bool operator==(std::span<const NodeId> path) const;
  bool operator==(const HopTrace& other) const { return *this == other.nodes(); }

 private:
  std::array<NodeId, kCapacity> hops_{};
  std::size_t size_ = 0;
};

struct Packet {
  std::uint64_t id = 0;
  std::uint32_t payload_bytes = 0;
  TunnelId tunnel;
  SimTime created_at{0};
  std::optional<SimTime> delivered_at;
  HopTrace hop_trace;
};

/// Byte range of one RLC SDU carried in a transport block.
struct Segment {
  std::uint32_t sn = 0;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
  bool operator==(const Segment&) const = default;
};

/// Transmitting side of an RLC AM bearer. SDUs stay buffered until every
/// byte is acknowledged, and all buffered bytes count against the capacity.
class RlcAmTx {
 public:
  RlcAmTx(std::int64_t capacity_bytes, std::uint32_t overhead_bytes, std::uint32_t header_bytes);

  /// Tail drop: false when the SDU does not fit.
  bool enqueue(const Packet& packet);

  /// Retransmissions first, then new data. Each segment costs a header.
  std::vector<Segment> pull(std::int64_t tb_bytes);

  void ack(std::span<const Segment> segments);
  void nack(std::span<const Segment> segments);

  const Packet& packet(std::uint32_t sn) const;
  std::uint32_t sdu_size(std::uint32_t sn) const;

  std::int64_t occupancy_bytes() const { return occupancy_; }
  std::int64_t capacity_bytes() const { return capacity_; }
  /// Bytes (headers included) waiting for a first transmission or a retransmission.
  std::int64_t backlog_bytes() const;
  std::uint64_t drops() const { return drops_; }
  std::uint32_t base_sn() const { return base_sn_; }
  std::uint32_t next_sn() const { return next_sn_; }
  /// True while the SDU is held (not fully acknowledged).
  bool holds(std::uint32_t sn) const;

 private:
  struct Sdu {
    Packet packet;
    std::uint32_t size = 0;
    std::uint32_t acked = 0;
  };
  Sdu& at(std::uint32_t sn);
  const Sdu& at(std::uint32_t sn) const;

  std::int64_t capacity_;
  std::uint32_t overhead_;
  std::uint32_t header_;
  std::deque<Sdu> sdus_;  // sn = base_sn_ + index
  std::uint32_t base_sn_ = 0;
  std::uint32_t next_sn_ = 0;
  std::uint32_t send_sn_ = 0;
  std::uint32_t send_offset_ = 0;
  std::deque<Segment> retx_;
  std::int64_t retx_bytes_ = 0;
  std::int64_t unsent_bytes_ = 0;
  std::int64_t occupancy_ = 0;
  std::uint64_t drops_ = 0;
};

/// Receiving side of an RLC AM bearer: reassembly, in-order delivery, and a
/// reordering timer that turns reported losses into a status report.
class RlcAmRx {
 public:
  explicit RlcAmRx(SimTime reordering_timer);

  /// Adds arriving segments and appends every packet that became deliverable
  /// in sequence to `out`. Duplicated bytes are ignored.
  void deliver(std::span<const Segment> segments, const RlcAmTx& peer, std::vector<Packet>& out);

  /// The MAC gave up on these segments. Starts the reordering timer if idle;
  /// returns the new expiry when it was started.
  std::optional<SimTime> mark_lost(std::span<const Segment> segments, SimTime now);

  std::optional<SimTime> timer_expiry() const { return timer_; }

  /// Fires the timer if it is due at `now`: returns the still-missing byte
  /// ranges for the status report (empty if nothing is missing any more).
  std::vector<Segment> expire_timer(SimTime now);

  std::uint32_t next_expected() const { return next_expected_; }
  /// SNs at or beyond next_expected() that the receiver holds bytes for.
  std::vector<std::uint32_t> held_sns() const;

 private:
  struct Pending {
    Packet packet;
    std::uint32_t size = 0;
    std::uint32_t received = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> intervals;  // [begin, end)
  };
  static void add_interval(Pending& p, std::uint32_t begin, std::uint32_t end);
  std::vector<Segment> uncovered(const Segment& seg) const;

  SimTime reordering_timer_;
  std::map<std::uint32_t, Pending> pending_;
  std::uint32_t next_expected_ = 0;
  std::vector<Segment> missing_;
  std::optional<SimTime> timer_;
};

struct TransportBlock {
  std::uint64_t harq_id = 0;
  FlowId flow = 0;
  std::vector<Segment> segments;
  std::int64_t tb_bits = 0;
  int symbols = 0;
  double spectral_efficiency = 0.0;
  int transmissions = 0;
  std::int64_t last_tx_subframe = 0;
};

struct TransmittedTb {
  TransportBlock tb;
  bool success = false;
};

enum class HarqVerdict { retransmit, rlc_recovery };

/// Downlink bearer from a gNB to one child (UE or IAB node).
class Bearer {
 public:
  Bearer(NodeId parent, NodeId child, bool backhaul, const LinkState& link, const StackConfig& config);

  NodeId parent() const { return parent_; }
  NodeId child() const { return child_; }
  bool is_backhaul() const { return backhaul_; }
  const LinkState& link() const { return link_; }

  bool enqueue(const Packet& packet) { return tx_.enqueue(packet); }

  RlcAmTx& tx() { return tx_; }
  const RlcAmTx& tx() const { return tx_; }
  RlcAmRx& rx() { return rx_; }
  const RlcAmRx& rx() const { return rx_; }

  /// Queue size handed to the scheduler, net of bytes already granted.
  std::int64_t reported_backlog() const;
  void add_granted(std::int64_t bytes) { granted_bytes_ += bytes; }
  void consume_granted(std::int64_t bytes);
  std::int64_t granted_bytes() const { return granted_bytes_; }

  std::uint64_t next_harq_id() { return next_harq_id_++; }
  /// Failed TB: keeps it for a HARQ retransmission, or after the last attempt
  /// hands its segments to RLC recovery.
  HarqVerdict on_harq_failure(TransportBlock tb, SimTime now, std::optional<SimTime>* timer_started);
  std::vector<HarqRetxRequest> harq_ready(std::int64_t target_subframe) const;
  void mark_harq_scheduled(std::uint64_t harq_id);
  TransportBlock take_harq(std::uint64_t harq_id);
  std::size_t harq_pending() const { return harq_.size(); }

  const FlowDemand demand() const;

 private:
  struct HarqSlot {
    TransportBlock tb;
    std::int64_t ready_subframe = 0;
    bool scheduled = false;
  };

  NodeId parent_;
  NodeId child_;
  bool backhaul_;
  LinkState link_;
  int max_harq_retx_;
  int harq_retx_delay_;
  RlcAmTx tx_;
  RlcAmRx rx_;
  std::int64_t granted_bytes_ = 0;
  std::uint64_t next_harq_id_ = 1;
  std::map<std::uint64_t, HarqSlot> harq_;
};

/// Builds (or re-sends) the transport block for a granted assignment and
/// draws its decoding outcome. Returns nothing when a new-data grant finds
/// the queue empty.
std::optional<TransmittedTb> serve_allocation(Bearer& bearer, const Assignment& assignment,
                                              const LinkModel& model, std::mt19937_64& rng,
                                              std::int64_t subframe);

enum class RouteKind { deliver_local, forward };

struct RouteDecision {
  RouteKind kind = RouteKind::forward;
  NodeId next_hop = 0;  // UE for deliver_local, IAB child for forward
};

/// Tunnel lookup at a gNB. Throws RoutingError for unknown tunnels.
RouteDecision route_at_node(const RoutingTable& table, TunnelId tunnel);

}  // namespace iabsim
