#include "iabsim/scheduler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

const char* to_string(SchedulerKind kind) { return kind == SchedulerKind::rr ? "rr" : "pf"; }

int MacConfig::max_iab_child_symbols() const {
  return static_cast<int>(std::floor(symbols_per_subframe * iab_cap_fraction + 1e-9));
}

void MacConfig::validate() const {
  if (symbols_per_subframe < 2 || symbols_per_subframe > kMaxSymbols)
    throw ConfigError(fmt::format("symbols_per_subframe must be in 2..{}", kMaxSymbols));
  if (subframe_duration <= SimTime{0}) throw ConfigError("subframe duration must be positive");
  if (dci_delay < 1) throw ConfigError("dci_delay must be at least one subframe");
  if (!(iab_cap_fraction > 0 && iab_cap_fraction <= 1)) throw ConfigError("iab_cap_fraction must be in (0, 1]");
  if (max_iab_child_symbols() < 1) throw ConfigError("iab_cap_fraction leaves IAB children no symbols");
  if (pf_window < 1) throw ConfigError("pf_window must be at least 1");
}

std::uint64_t SubframeAllocation::used_mask() const {
  std::uint64_t m = 0;
  for (const auto& a : assignments) m |= mask_of(a.ranges);
  return m;
}

int SubframeAllocation::symbols_for(FlowId flow) const {
  int n = 0;
  for (const auto& a : assignments)
    if (a.flow == flow) n += a.symbols;
  return n;
}

int BusyMask::count() const { return std::popcount(bits); }

std::uint64_t mask_of(std::span<const SymbolRange> ranges) {
  std::uint64_t m = 0;
  for (const auto& r : ranges)
    for (int s = r.start; s < r.start + r.count; ++s) m |= std::uint64_t{1} << s;
  return m;
}

std::vector<SymbolRange> ranges_of(std::uint64_t mask) {
  std::vector<SymbolRange> out;
  int s = 0;
  while (mask >> s) {
    if (!((mask >> s) & 1U)) {
      ++s;
      continue;
    }
    int e = s;
    while (e < kMaxSymbols && ((mask >> e) & 1U)) ++e;
    out.push_back({s, e - s});
    s = e;
  }
  return out;
}

int symbols_needed(const FlowDemand& flow, const MacConfig& config) {
  if (flow.queued_bytes <= 0 || !(flow.per_symbol_capacity > 0)) return 0;
  const double bits = static_cast<double>(flow.queued_bytes) * 8.0;
  const double need = std::ceil(bits / flow.per_symbol_capacity);
  int limit = config.symbols_per_subframe;
  if (flow.is_iab_child) limit = std::min(limit, config.max_iab_child_symbols());
  return need >= limit ? limit : static_cast<int>(need);
}

GnbScheduler::GnbScheduler(NodeId owner, MacConfig config) : owner_(owner), config_(config) {
  config_.validate();
}

const BusyMask& GnbScheduler::ingest_parent_dci(const Dci& dci, std::int64_t current_subframe) {
  if (dci.to != owner_) {
    throw StructuralError(fmt::format("DCI for node {} delivered to node {}", dci.to, owner_));
  }
  if (dci.subframe <= current_subframe) {
    throw CausalityError(fmt::format("node {}: DCI for subframe {} arrived at subframe {}", owner_,
                                     dci.subframe, current_subframe));
  }
  if (dci.subframe <= last_scheduled_) {
    throw CausalityError(fmt::format("node {}: DCI for subframe {} arrived after it was scheduled", owner_,
                                     dci.subframe));
  }
  auto& mask = busy_[dci.subframe];
  mask.subframe = dci.subframe;
  mask.bits |= mask_of(dci.ranges);
  return mask;
}

BusyMask GnbScheduler::busy_mask(std::int64_t subframe) const {
  auto it = busy_.find(subframe);
  return it == busy_.end() ? BusyMask{subframe, 0} : it->second;
}

void GnbScheduler::check_target(std::int64_t current, std::int64_t target) {
  if (target <= current) {
    throw CausalityError(
        fmt::format("node {}: cannot schedule subframe {} at subframe {}", owner_, target, current));
  }
  if (target <= last_scheduled_) {
    throw CausalityError(fmt::format("node {}: subframe {} already scheduled", owner_, target));
  }
  last_scheduled_ = target;
  busy_.erase(busy_.begin(), busy_.upper_bound(target));
}

ScheduleResult GnbScheduler::schedule(std::int64_t current_subframe, std::int64_t target_subframe,
                                      std::span<const FlowDemand> flows,
                                      std::span<const HarqRetxRequest> retx) {
  const BusyMask busy = busy_mask(target_subframe);
  return config_.scheduler_kind == SchedulerKind::rr
             ? schedule_rr(current_subframe, target_subframe, busy, flows, retx)
             : schedule_pf(current_subframe, target_subframe, busy, flows, retx);
}

GnbScheduler::Plan GnbScheduler::plan_retx(const BusyMask& busy, std::span<const FlowDemand> flows,
                                           std::span<const HarqRetxRequest> retx) const {
  const std::uint64_t all = config_.symbols_per_subframe >= 64
                                ? ~std::uint64_t{0}
                                : (std::uint64_t{1} << config_.symbols_per_subframe) - 1;
  Plan plan;
  plan.free = all & ~busy.bits;
  int free_count = std::popcount(plan.free);
  const int cap = config_.max_iab_child_symbols();
  for (const auto& r : retx) {
    auto f = std::find_if(flows.begin(), flows.end(), [&](const FlowDemand& d) { return d.flow == r.flow; });
    const bool iab = f != flows.end() && f->is_iab_child;
    int& used = plan.used[r.flow];
    if (r.symbols > free_count) continue;
    if (iab && used + r.symbols > cap) continue;
    used += r.symbols;
    free_count -= r.symbols;
    plan.retx.push_back(r);
  }
  return plan;
}

ScheduleResult GnbScheduler::lay_out(std::int64_t current, std::int64_t target, const Plan& plan,
                                     const std::vector<Grant>& grants,
                                     std::span<const FlowDemand> flows) const {
  ScheduleResult out;
  out.allocation.subframe = target;
  out.allocation.computed_at = current;
  std::uint64_t free = plan.free;

  auto take = [&free](int n) {
    std::uint64_t m = 0;
    while (n-- > 0) {
      const std::uint64_t low = free & (~free + 1);
      m |= low;
      free &= ~low;
    }
    return m;
  };
  auto find_flow = [&](FlowId id) -> const FlowDemand* {
    auto it = std::find_if(flows.begin(), flows.end(), [&](const FlowDemand& d) { return d.flow == id; });
    return it == flows.end() ? nullptr : &*it;
  };

  for (const auto& r : plan.retx) {
    Assignment a;
    a.flow = r.flow;
    a.ranges = ranges_of(take(r.symbols));
    a.symbols = r.symbols;
    a.spectral_efficiency = r.spectral_efficiency;
    a.tb_bits = r.tb_bits;
    a.harq_id = r.harq_id;
    out.allocation.assignments.push_back(std::move(a));
  }
  for (const auto& g : grants) {
    const FlowDemand* f = find_flow(g.flow);
    Assignment a;
    a.flow = g.flow;
    a.ranges = ranges_of(take(g.symbols));
    a.symbols = g.symbols;
    a.spectral_efficiency = f->spectral_efficiency;
    a.tb_bits = static_cast<std::int64_t>(std::floor(g.symbols * f->per_symbol_capacity));
    out.allocation.assignments.push_back(std::move(a));
  }
  for (const auto& a : out.allocation.assignments) {
    const FlowDemand* f = find_flow(a.flow);
    if (!f || !f->is_iab_child) continue;
    out.dcis.push_back(Dci{target, owner_, a.flow, a.ranges, a.tb_bits, a.spectral_efficiency, current});
  }
  return out;
}

namespace {

std::vector<std::size_t> by_flow_id(std::span<const FlowDemand> flows) {
  std::vector<std::size_t> idx(flows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return flows[a].flow < flows[b].flow; });
  return idx;
}

}  // namespace

ScheduleResult GnbScheduler::schedule_rr(std::int64_t current_subframe, std::int64_t target_subframe,
                                         const BusyMask& busy, std::span<const FlowDemand> flows,
                                         std::span<const HarqRetxRequest> retx) {
  check_target(current_subframe, target_subframe);
  Plan plan = plan_retx(busy, flows, retx);
  int free_count = std::popcount(plan.free) - std::accumulate(plan.retx.begin(), plan.retx.end(), 0,
                                                              [](int s, const auto& r) { return s + r.symbols; });

  // Rotate so the flow after the last one served goes first.
  auto order = by_flow_id(flows);
  if (last_served_) {
    auto pivot = std::find_if(order.begin(), order.end(),
                              [&](std::size_t i) { return flows[i].flow > *last_served_; });
    std::rotate(order.begin(), pivot, order.end());
  }

  std::vector<int> need(flows.size(), 0);
  std::vector<int> granted(flows.size(), 0);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    need[i] = symbols_needed(flows[i], config_);
    if (flows[i].is_iab_child) {
      auto it = plan.used.find(flows[i].flow);
      const int used = it == plan.used.end() ? 0 : it->second;
      need[i] = std::min(need[i], config_.max_iab_child_symbols() - used);
    }
  }

  std::vector<std::size_t> first_grant_order;
  std::optional<FlowId> last;
  bool progress = true;
  while (free_count > 0 && progress) {
    progress = false;
    for (std::size_t i : order) {
      if (free_count == 0) break;
      if (granted[i] >= need[i]) continue;
      if (granted[i] == 0) first_grant_order.push_back(i);
      ++granted[i];
      --free_count;
      last = flows[i].flow;
      progress = true;
    }
  }
  if (last) last_served_ = last;

  std::vector<Grant> grants;
  for (std::size_t i : first_grant_order) grants.push_back({flows[i].flow, granted[i]});
  return lay_out(current_subframe, target_subframe, plan, grants, flows);
}

ScheduleResult GnbScheduler::schedule_pf(std::int64_t current_subframe, std::int64_t target_subframe,
                                         const BusyMask& busy, std::span<const FlowDemand> flows,
                                         std::span<const HarqRetxRequest> retx) {
  check_target(current_subframe, target_subframe);
  Plan plan = plan_retx(busy, flows, retx);
  int free_count = std::popcount(plan.free) - std::accumulate(plan.retx.begin(), plan.retx.end(), 0,
                                                              [](int s, const auto& r) { return s + r.symbols; });

  const double beta = 1.0 / config_.pf_window;
  const double dur = to_seconds(config_.subframe_duration);
  const auto order = by_flow_id(flows);

  std::vector<int> need(flows.size(), 0);
  std::vector<int> used(flows.size(), 0);  // retx + new symbols
  std::vector<int> granted(flows.size(), 0);
  std::vector<double> avg(flows.size(), 0.0);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    auto u = plan.used.find(flows[i].flow);
    used[i] = u == plan.used.end() ? 0 : u->second;
    need[i] = symbols_needed(flows[i], config_);
    if (flows[i].is_iab_child) need[i] = std::min(need[i], config_.max_iab_child_symbols() - used[i]);
    avg[i] = average_rate(flows[i].flow);
  }

  std::vector<std::size_t> first_grant_order;
  while (free_count > 0) {
    std::optional<std::size_t> best;
    double best_metric = 0.0;
    for (std::size_t i : order) {
      if (granted[i] >= need[i]) continue;
      const double cap = flows[i].per_symbol_capacity;
      const double instantaneous = cap * config_.symbols_per_subframe / dur;
      const double provisional = (1.0 - beta) * avg[i] + beta * used[i] * cap / dur;
      const double metric = instantaneous / std::max(provisional, 1.0);
      if (!best || metric > best_metric) {
        best = i;
        best_metric = metric;
      }
    }
    if (!best) break;
    if (granted[*best] == 0) first_grant_order.push_back(*best);
    ++granted[*best];
    ++used[*best];
    --free_count;
  }

  for (std::size_t i = 0; i < flows.size(); ++i) {
    const double served = used[i] * flows[i].per_symbol_capacity / dur;
    pf_average_[flows[i].flow] = (1.0 - beta) * avg[i] + beta * served;
  }

  std::vector<Grant> grants;
  for (std::size_t i : first_grant_order) grants.push_back({flows[i].flow, granted[i]});
  return lay_out(current_subframe, target_subframe, plan, grants, flows);
}

double GnbScheduler::average_rate(FlowId flow) const {
  auto it = pf_average_.find(flow);
  return it == pf_average_.end() ? 0.0 : it->second;
}

}  // namespace iabsim
