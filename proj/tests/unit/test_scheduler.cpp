#include <algorithm>
#include <bit>
#include <map>
#include <random>

#include "doctest.h"
#include "iabsim/errors.hpp"
#include "iabsim/scheduler.hpp"

using namespace iabsim;

namespace {

MacConfig mac(int symbols, SchedulerKind kind = SchedulerKind::rr) {
  MacConfig c;
  c.symbols_per_subframe = symbols;
  c.scheduler_kind = kind;
  return c;
}

FlowDemand ue(FlowId id, std::int64_t bytes, double cap = 10000) { return {id, bytes, cap, 2.0, false}; }
FlowDemand iab(FlowId id, std::int64_t bytes, double cap = 10000) { return {id, bytes, cap, 3.0, true}; }

constexpr std::int64_t kLots = 1 << 30;

// Checks every structural property of one allocation against its inputs.
void check_allocation(const MacConfig& cfg, const ScheduleResult& r, const BusyMask& busy,
                      const std::vector<FlowDemand>& flows) {
  std::uint64_t used = 0;
  std::map<FlowId, int> per_flow;
  for (const auto& a : r.allocation.assignments) {
    std::uint64_t m = 0;
    for (const auto& rg : a.ranges) {
      REQUIRE(rg.start >= 0);
      REQUIRE(rg.start + rg.count <= cfg.symbols_per_subframe);
      for (int s = rg.start; s < rg.start + rg.count; ++s) m |= std::uint64_t{1} << s;
    }
    CHECK(std::popcount(m) == a.symbols);
    CHECK((m & used) == 0);
    CHECK((m & busy.bits) == 0);
    used |= m;
    per_flow[a.flow] += a.symbols;
  }
  const int free_left = cfg.symbols_per_subframe - std::popcount(used | busy.bits);
  for (const auto& f : flows) {
    if (f.is_iab_child) CHECK(per_flow[f.flow] <= cfg.symbols_per_subframe / 2);
    int want = 0;
    if (f.queued_bytes > 0 && f.per_symbol_capacity > 0)
      want = static_cast<int>(std::min<double>(std::ceil(f.queued_bytes * 8.0 / f.per_symbol_capacity),
                                               f.is_iab_child ? cfg.symbols_per_subframe / 2 : cfg.symbols_per_subframe));
    if (free_left > 0) CHECK(per_flow[f.flow] >= want);
  }
  for (const auto& d : r.dcis) {
    CHECK(d.subframe == r.allocation.subframe);
    CHECK(d.created_at <= d.subframe - 1);
    auto f = std::find_if(flows.begin(), flows.end(), [&](const FlowDemand& x) { return x.flow == d.to; });
    REQUIRE(f != flows.end());
    CHECK(f->is_iab_child);
  }
}

}  // namespace

TEST_CASE("single backlogged UE takes the whole subframe") {
  GnbScheduler s(0, mac(10));
  const std::vector<FlowDemand> flows{ue(1, kLots)};
  auto r = s.schedule(0, 1, flows);
  REQUIRE(r.allocation.assignments.size() == 1);
  CHECK(r.allocation.assignments[0].symbols == 10);
  CHECK(r.allocation.assignments[0].tb_bits == 100000);
  CHECK(r.dcis.empty());
}

TEST_CASE("IAB child is held to half the symbols") {
  GnbScheduler s(0, mac(10));
  const std::vector<FlowDemand> flows{iab(1, kLots), ue(2, kLots)};
  auto r = s.schedule(0, 1, flows);
  CHECK(r.allocation.symbols_for(1) <= 5);
  CHECK(r.allocation.symbols_for(1) + r.allocation.symbols_for(2) == 10);
  REQUIRE(r.dcis.size() == 1);
  CHECK(r.dcis[0].to == 1);

  GnbScheduler alone(0, mac(10));
  const std::vector<FlowDemand> only{iab(1, kLots)};
  CHECK(alone.schedule(0, 1, only).allocation.symbols_for(1) == 5);
}

TEST_CASE("parent DCIs mark symbols busy") {
  GnbScheduler s(1, mac(24));
  Dci d{50, 0, 1, {{0, 12}}, 0, 3.0, 45};
  CHECK(s.ingest_parent_dci(d, 46).count() == 12);
  Dci e{50, 0, 1, {{20, 2}}, 0, 3.0, 45};
  CHECK(s.ingest_parent_dci(e, 46).count() == 14);
  CHECK(s.ingest_parent_dci(e, 46).count() == 14);
  CHECK(s.busy_mask(50).busy(0));
  CHECK_FALSE(s.busy_mask(50).busy(12));
  CHECK(s.busy_mask(51).count() == 0);

  Dci late{46, 0, 1, {{0, 1}}, 0, 3.0, 45};
  CHECK_THROWS_AS(s.ingest_parent_dci(late, 46), CausalityError);
  Dci wrong{60, 0, 7, {{0, 1}}, 0, 3.0, 45};
  CHECK_THROWS_AS(s.ingest_parent_dci(wrong, 46), StructuralError);
}

TEST_CASE("access allocation avoids the backhaul symbols") {
  GnbScheduler s(1, mac(24));
  s.ingest_parent_dci(Dci{10, 0, 1, {{4, 8}}, 0, 3.0, 7}, 8);
  const std::vector<FlowDemand> flows{ue(5, kLots), ue(6, kLots)};
  const BusyMask busy = s.busy_mask(10);
  auto r = s.schedule(8, 10, flows);
  CHECK((r.allocation.used_mask() & busy.bits) == 0);
  CHECK(std::popcount(r.allocation.used_mask()) == 16);
  check_allocation(s.config(), r, busy, flows);
}

TEST_CASE("node with lookahead 2 accepts its parent's DCI two subframes early") {
  // Parent with eta 3 schedules subframe k + 3 at k; the DCI reaches the
  // child at k + 1, which then schedules k + 1 + 2 = k + 3.
  GnbScheduler parent(1, mac(24));
  GnbScheduler child(2, mac(24));
  child.schedule(0, 2, std::vector<FlowDemand>{});
  const std::vector<FlowDemand> to_child{iab(2, kLots)};
  auto r = parent.schedule(0, 3, to_child);
  REQUIRE(r.dcis.size() == 1);
  CHECK_NOTHROW(child.ingest_parent_dci(r.dcis[0], 1));
  const std::vector<FlowDemand> ues{ue(9, kLots)};
  auto c = child.schedule(1, 3, ues);
  CHECK((c.allocation.used_mask() & mask_of(r.dcis[0].ranges)) == 0);
  CHECK_THROWS_AS(child.ingest_parent_dci(r.dcis[0], 1), CausalityError);
}

TEST_CASE("scheduling the past or the same subframe twice is a causality error") {
  GnbScheduler s(0, mac(24));
  CHECK_THROWS_AS(s.schedule(5, 5, std::vector<FlowDemand>{}), CausalityError);
  s.schedule(5, 6, std::vector<FlowDemand>{});
  CHECK_THROWS_AS(s.schedule(5, 6, std::vector<FlowDemand>{}), CausalityError);
}

TEST_CASE("grants are sized to drain the queue") {
  MacConfig c = mac(24);
  CHECK(symbols_needed(ue(1, 0), c) == 0);
  CHECK(symbols_needed(ue(1, 1400, 133333.0), c) == 1);
  CHECK(symbols_needed(ue(1, 40000, 133333.0), c) == 3);
  CHECK(symbols_needed(iab(1, kLots), c) == 12);
  CHECK(symbols_needed(FlowDemand{1, 100, 0.0, 0.0, false}, c) == 0);

  GnbScheduler s(0, c);
  const std::vector<FlowDemand> flows{ue(1, 1400, 133333.0), ue(2, kLots, 133333.0)};
  auto r = s.schedule(0, 1, flows);
  CHECK(r.allocation.symbols_for(1) == 1);
  CHECK(r.allocation.symbols_for(2) == 23);
  // A 1-symbol grant at the peak rate carries a full 1400-byte packet.
  CHECK(r.allocation.assignments.front().tb_bits >= 11200);
}

TEST_CASE("round robin continues after the last flow served") {
  GnbScheduler s(0, mac(4));
  const std::vector<FlowDemand> flows{ue(1, kLots), ue(2, kLots), ue(3, kLots)};
  auto first = s.schedule(0, 1, flows);
  CHECK(first.allocation.symbols_for(1) == 2);
  CHECK(first.allocation.symbols_for(2) == 1);
  CHECK(first.allocation.symbols_for(3) == 1);
  CHECK(s.last_served() == FlowId{1});
  auto second = s.schedule(1, 2, flows);
  CHECK(second.allocation.symbols_for(2) == 2);
  CHECK(second.allocation.symbols_for(3) == 1);
  CHECK(second.allocation.symbols_for(1) == 1);
}

TEST_CASE("round robin symbol counts stay within one grant over long windows") {
  for (int k : {2, 3, 5, 7}) {
    GnbScheduler s(0, mac(24));
    std::vector<FlowDemand> flows;
    for (int i = 0; i < k; ++i) flows.push_back(ue(static_cast<FlowId>(10 + i), kLots));
    std::map<FlowId, long> totals;
    for (int sf = 0; sf < 50 * k; ++sf) {
      auto r = s.schedule(sf, sf + 1, flows);
      for (const auto& a : r.allocation.assignments) totals[a.flow] += a.symbols;
      long lo = totals.begin()->second;
      long hi = lo;
      for (const auto& [f, t] : totals) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
      CHECK(hi - lo <= (24 + k - 1) / k);
    }
  }
}

TEST_CASE("HARQ retransmissions go first and count toward the cap") {
  GnbScheduler s(0, mac(24));
  const std::vector<FlowDemand> flows{iab(1, kLots), ue(2, kLots)};
  const std::vector<HarqRetxRequest> retx{{1, 77, 8, 80000, 3.0}};
  auto r = s.schedule(0, 1, flows, retx);
  REQUIRE_FALSE(r.allocation.assignments.empty());
  const auto& first = r.allocation.assignments.front();
  CHECK(first.harq_id == std::uint64_t{77});
  CHECK(first.symbols == 8);
  CHECK(first.tb_bits == 80000);
  CHECK(first.ranges.front().start == 0);
  CHECK(r.allocation.symbols_for(1) == 12);
  CHECK(r.allocation.symbols_for(2) == 12);
}

TEST_CASE("proportional fair splits evenly between equal flows") {
  GnbScheduler s(0, mac(24, SchedulerKind::pf));
  const std::vector<FlowDemand> flows{ue(1, kLots), ue(2, kLots)};
  for (int sf = 0; sf < 20; ++sf) {
    auto r = s.schedule(sf, sf + 1, flows);
    CHECK(std::abs(r.allocation.symbols_for(1) - r.allocation.symbols_for(2)) <= 1);
  }
}

TEST_CASE("proportional fair favours the flow with the smaller average") {
  GnbScheduler s(0, mac(24, SchedulerKind::pf));
  const std::vector<FlowDemand> only_a{ue(1, kLots), ue(2, 0)};
  for (int sf = 0; sf < 200; ++sf) s.schedule(sf, sf + 1, only_a);
  CHECK(s.average_rate(1) > 0);
  CHECK(s.average_rate(2) == doctest::Approx(0));
  const std::vector<FlowDemand> both{ue(1, kLots), ue(2, kLots)};
  auto r = s.schedule(200, 201, both);
  REQUIRE_FALSE(r.allocation.assignments.empty());
  CHECK(r.allocation.assignments.front().flow == 2);
  CHECK(r.allocation.symbols_for(2) > r.allocation.symbols_for(1));
}

TEST_CASE("single flow: proportional fair equals round robin") {
  GnbScheduler rr(0, mac(24));
  GnbScheduler pf(0, mac(24, SchedulerKind::pf));
  std::mt19937_64 rng(5);
  for (int sf = 0; sf < 50; ++sf) {
    const std::vector<FlowDemand> f{ue(3, std::uniform_int_distribution<std::int64_t>(0, 600000)(rng))};
    CHECK(rr.schedule(sf, sf + 1, f).allocation == pf.schedule(sf, sf + 1, f).allocation);
  }
}

TEST_CASE("random inputs keep non-overlap, half cap and work conservation") {
  std::mt19937_64 rng(31);
  for (auto kind : {SchedulerKind::rr, SchedulerKind::pf}) {
    GnbScheduler s(1, mac(24, kind));
    for (int sf = 0; sf < 400; ++sf) {
      if (rng() % 2) {
        const int start = static_cast<int>(rng() % 20);
        const int count = 1 + static_cast<int>(rng() % 4);
        s.ingest_parent_dci(Dci{sf + 2, 0, 1, {{start, count}}, 0, 3.0, sf}, sf);
      }
      std::vector<FlowDemand> flows;
      const int n = static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) {
        const std::int64_t bytes = (rng() % 3 == 0) ? 0 : static_cast<std::int64_t>(rng() % 400000);
        const double cap = 20000.0 + static_cast<double>(rng() % 100000);
        flows.push_back(FlowDemand{static_cast<FlowId>(2 + i), bytes, cap, 2.0, rng() % 3 == 0});
      }
      const BusyMask busy = s.busy_mask(sf + 2);
      auto r = s.schedule(sf, sf + 2, flows);
      check_allocation(s.config(), r, busy, flows);
    }
  }
}

TEST_CASE("mac config validation") {
  MacConfig c;
  CHECK(c.max_iab_child_symbols() == 12);
  c.symbols_per_subframe = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MacConfig{};
  c.dci_delay = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MacConfig{};
  c.iab_cap_fraction = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("symbol mask helpers round-trip") {
  const std::vector<SymbolRange> r{{0, 3}, {5, 1}, {10, 4}};
  CHECK(ranges_of(mask_of(r)) == r);
  CHECK(ranges_of(0).empty());
}
