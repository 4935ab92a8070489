#include "iabsim/metrics.hpp"

#include <cmath>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "iabsim/engine.hpp"
#include "iabsim/topology.hpp"

namespace iabsim {

const char* to_string(UeGroup group) {
  switch (group) {
    case UeGroup::donor_ues: return "donor_ues";
    case UeGroup::iab_ues: return "iab_ues";
    case UeGroup::all_ues: return "all_ues";
  }
  return "?";
}

std::vector<GroupMetrics> compute_metrics(const RunResult& result, const IabTree& tree) {
  const double window_s = to_seconds(result.window_end - result.window_start);
  struct Acc {
    GroupMetrics m;
    SimTime latency{0};
  };
  Acc acc[3];
  for (int g = 0; g < 3; ++g) acc[g].m.group = static_cast<UeGroup>(g);

  for (const auto& f : result.flows) {
    const auto& ue = tree.node(f.ue);
    const bool via_iab = ue.parent && tree.node(*ue.parent).role == NodeRole::iab;
    for (UeGroup g : {via_iab ? UeGroup::iab_ues : UeGroup::donor_ues, UeGroup::all_ues}) {
      Acc& a = acc[static_cast<int>(g)];
      ++a.m.ue_count;
      a.m.sum_throughput_mbps += static_cast<double>(f.window_bytes) * 8.0;
      a.m.delivered_packets += f.window_delivered;
      a.m.dropped_packets += f.window_dropped;
      a.latency += f.window_latency_sum;
    }
  }

  std::vector<GroupMetrics> out;
  for (auto& a : acc) {
    if (a.m.ue_count == 0) continue;
    a.m.sum_throughput_mbps = window_s > 0 ? a.m.sum_throughput_mbps / window_s / 1e6 : 0.0;
    if (a.m.delivered_packets > 0) {
      a.m.mean_latency_ms = to_millis(a.latency) / static_cast<double>(a.m.delivered_packets);
    }
    out.push_back(a.m);
  }
  return out;
}

const GroupMetrics* find_group(std::span<const GroupMetrics> metrics, UeGroup group) {
  for (const auto& m : metrics)
    if (m.group == group) return &m;
  return nullptr;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  s.samples = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double n = static_cast<double>(values.size());
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  s.ci95 = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  return s;
}

CampaignSummary aggregate_runs(std::span<const RunResult> results) {
  std::map<CellKey, std::pair<std::vector<double>, std::vector<double>>> samples;
  std::set<std::pair<double, int>> grid;
  for (const auto& r : results) {
    grid.insert({r.rate_bps, r.n_relays});
    for (const auto& m : r.metrics) {
      auto& [tput, lat] = samples[CellKey{r.rate_bps, r.n_relays, m.group}];
      tput.push_back(m.sum_throughput_mbps);
      if (m.mean_latency_ms) lat.push_back(*m.mean_latency_ms);
    }
  }

  CampaignSummary summary;
  for (const auto& [rate, relays] : grid) {
    for (UeGroup g : {UeGroup::donor_ues, UeGroup::iab_ues, UeGroup::all_ues}) {
      const CellKey key{rate, relays, g};
      SummaryCell cell;
      if (auto it = samples.find(key); it != samples.end()) {
        cell.runs = static_cast<int>(it->second.first.size());
        cell.throughput_mbps = summarize(it->second.first);
        if (!it->second.second.empty()) cell.latency_ms = summarize(it->second.second);
      }
      summary.cells.emplace(key, cell);
    }
  }
  return summary;
}

}  // namespace iabsim
