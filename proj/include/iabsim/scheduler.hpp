#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "iabsim/types.hpp"

namespace iabsim {

enum class SchedulerKind { rr, pf };

const char* to_string(SchedulerKind kind);

struct MacConfig {
  int symbols_per_subframe = 24;
  SimTime subframe_duration = std::chrono::milliseconds(1);
  int dci_delay = 1;  // epsilon, subframes
  double iab_cap_fraction = 0.5;
  SchedulerKind scheduler_kind = SchedulerKind::rr;
  int pf_window = 100;  // subframes

  /// Most symbols a single IAB child may receive in one subframe.
  int max_iab_child_symbols() const;
  void validate() const;
};

inline constexpr int kMaxSymbols = 64;

/// Flows are identified by the child node the bearer serves.
using FlowId = NodeId;

struct SymbolRange {
  int start = 0;
  int count = 0;
  bool operator==(const SymbolRange&) const = default;
};

enum class Direction { dl, ul_feedback };

/// One transport block worth of symbols for one flow. Ranges are disjoint and
/// ascending; they may be split around symbols that were busy.
struct Assignment {
  FlowId flow = 0;
  std::vector<SymbolRange> ranges;
  int symbols = 0;
  Direction direction = Direction::dl;
  double spectral_efficiency = 0.0;
  std::int64_t tb_bits = 0;
  std::optional<std::uint64_t> harq_id;  // set for HARQ retransmissions
  bool operator==(const Assignment&) const = default;
};

struct SubframeAllocation {
  std::int64_t subframe = 0;
  std::int64_t computed_at = 0;
  std::vector<Assignment> assignments;

  std::uint64_t used_mask() const;
  int symbols_for(FlowId flow) const;
  bool operator==(const SubframeAllocation&) const = default;
};

struct Dci {
  std::int64_t subframe = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::vector<SymbolRange> ranges;
  std::int64_t tb_bits = 0;
  double spectral_efficiency = 0.0;
  std::int64_t created_at = 0;
  bool operator==(const Dci&) const = default;
};

/// Symbols of one subframe reserved for the node's own backhaul reception.
struct BusyMask {
  std::int64_t subframe = 0;
  std::uint64_t bits = 0;

  bool busy(int symbol) const { return (bits >> symbol) & 1U; }
  int count() const;
};

std::uint64_t mask_of(std::span<const SymbolRange> ranges);
std::vector<SymbolRange> ranges_of(std::uint64_t mask);

struct FlowDemand {
  FlowId flow = 0;
  std::int64_t queued_bytes = 0;
  double per_symbol_capacity = 0.0;  // bits
  double spectral_efficiency = 0.0;
  bool is_iab_child = false;
};

struct HarqRetxRequest {
  FlowId flow = 0;
  std::uint64_t harq_id = 0;
  int symbols = 0;
  std::int64_t tb_bits = 0;
  double spectral_efficiency = 0.0;
};

struct ScheduleResult {
  SubframeAllocation allocation;
  std::vector<Dci> dcis;
};

/// Symbols a flow asks for: enough to drain its queue, clipped to the IAB
/// child cap. Zero for flows in outage.
int symbols_needed(const FlowDemand& flow, const MacConfig& config);

/// Per-gNB TDMA scheduler state. Each call to schedule() fixes the allocation
/// of a future subframe, skipping symbols the parent already claimed for this
/// node's backhaul.
class GnbScheduler {
 public:
  GnbScheduler(NodeId owner, MacConfig config);

  NodeId owner() const { return owner_; }
  const MacConfig& config() const { return config_; }

  /// Records the parent's grant as busy symbols. Throws CausalityError if the
  /// subframe is not strictly in the future or was already scheduled here.
  const BusyMask& ingest_parent_dci(const Dci& dci, std::int64_t current_subframe);

  BusyMask busy_mask(std::int64_t subframe) const;

  /// Dispatches on the configured kind using the stored busy mask.
  ScheduleResult schedule(std::int64_t current_subframe, std::int64_t target_subframe,
                          std::span<const FlowDemand> flows, std::span<const HarqRetxRequest> retx = {});

  ScheduleResult schedule_rr(std::int64_t current_subframe, std::int64_t target_subframe,
                             const BusyMask& busy, std::span<const FlowDemand> flows,
                             std::span<const HarqRetxRequest> retx = {});

  ScheduleResult schedule_pf(std::int64_t current_subframe, std::int64_t target_subframe,
                             const BusyMask& busy, std::span<const FlowDemand> flows,
                             std::span<const HarqRetxRequest> retx = {});

  /// Exponentially averaged served rate used by PF, bits/s.
  double average_rate(FlowId flow) const;
  std::optional<FlowId> last_served() const { return last_served_; }
  std::int64_t last_scheduled() const { return last_scheduled_; }

 private:
  struct Grant {
    FlowId flow;
    int symbols;
  };
  struct Plan {
    std::uint64_t free = 0;
    std::vector<HarqRetxRequest> retx;  // accepted retransmissions
    std::map<FlowId, int> used;         // symbols per flow so far (retx included)
  };

  Plan plan_retx(const BusyMask& busy, std::span<const FlowDemand> flows,
                 std::span<const HarqRetxRequest> retx) const;
  ScheduleResult lay_out(std::int64_t current, std::int64_t target, const Plan& plan,
                         const std::vector<Grant>& grants, std::span<const FlowDemand> flows) const;
  void check_target(std::int64_t current, std::int64_t target);

  NodeId owner_;
  MacConfig config_;
  std::map<std::int64_t, BusyMask> busy_;
  std::map<FlowId, double> pf_average_;
  std::optional<FlowId> last_served_;
  std::int64_t last_scheduled_ = -1;
};

}  // namespace iabsim
