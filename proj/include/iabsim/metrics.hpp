#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace iabsim {

class IabTree;
struct RunResult;

enum class UeGroup { donor_ues, iab_ues, all_ues };

const char* to_string(UeGroup group);

struct GroupMetrics {
  UeGroup group = UeGroup::all_ues;
  int ue_count = 0;
  double sum_throughput_mbps = 0.0;
  std::optional<double> mean_latency_ms;  // absent when nothing was delivered
  std::uint64_t delivered_packets = 0;
  std::uint64_t dropped_packets = 0;
  bool operator==(const GroupMetrics&) const = default;
};

/// Metrics of the groups that have at least one UE, in donor/iab/all order.
/// Only deliveries inside the run's measurement window count.
std::vector<GroupMetrics> compute_metrics(const RunResult& result, const IabTree& tree);

const GroupMetrics* find_group(std::span<const GroupMetrics> metrics, UeGroup group);

struct SummaryStat {
  double mean = 0.0;
  double ci95 = 0.0;  // Student-t half-width, 0 for a single sample
  int samples = 0;
  bool operator==(const SummaryStat&) const = default;
};

SummaryStat summarize(std::span<const double> values);

struct CellKey {
  double rate_bps = 0.0;
  int n_relays = 0;
  UeGroup group = UeGroup::all_ues;
  auto operator<=>(const CellKey&) const = default;
};

struct SummaryCell {
  int runs = 0;  // runs in which the group had UEs
  SummaryStat throughput_mbps;
  std::optional<SummaryStat> latency_ms;
  bool operator==(const SummaryCell&) const = default;
};

/// Per (rate, n_relays, group) means and 95% confidence half-widths.
struct CampaignSummary {
  std::map<CellKey, SummaryCell> cells;
};

/// Cells are created for every (rate, n_relays) seen and all three groups;
/// groups with no UEs in any run keep runs == 0.
CampaignSummary aggregate_runs(std::span<const RunResult> results);

}  // namespace iabsim
