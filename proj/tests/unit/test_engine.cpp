#include <algorithm>
#include <set>

#include "doctest.h"
#include "iabsim/engine.hpp"
#include "iabsim/errors.hpp"

using namespace iabsim;

namespace {

SimConfig short_config(int relays, double rate, double seconds = 1.2) {
  SimConfig c;
  c.n_relays = relays;
  c.rate_bps = rate;
  c.sim_duration = from_seconds(seconds);
  c.warmup = std::chrono::milliseconds(200);
  c.audit_interval = 25;
  c.radio.base.tx_power_dbm = 20;
  return c;
}

void require_clean(const RunResult& r) {
  INFO(describe_violations(r.checks));
  CHECK(describe_violations(r.checks).empty());
  CHECK(r.checks.subframes_checked > 0);
  CHECK(r.checks.audits > 1);
}

LinkState link(NodeId a, NodeId b, double snr, double se) {
  LinkState l;
  l.a = a;
  l.b = b;
  l.snr_db = snr;
  l.spectral_efficiency = se;
  l.per_symbol_capacity = se * 1e9 * 1e-3 / 24;
  return l;
}

// donor 0 -> {1, 4}, 1 -> 2 -> 3, two UEs under 3 and one each under 0, 2, 4.
// Links sit exactly at their selection SNR, so one block in ten fails.
Deployment figure_one_deployment() {
  Deployment d;
  IabTree t(0, {0, 0, 10});
  t.add_iab(1, {}, 0);
  t.add_iab(4, {}, 0);
  t.add_iab(2, {}, 1);
  t.add_iab(3, {}, 2);
  const SimTime attach = std::chrono::milliseconds(100);
  t.add_ue(10, {}, 3, TunnelId{1}, attach);
  t.add_ue(11, {}, 3, TunnelId{2}, attach);
  t.add_ue(12, {}, 4, TunnelId{3}, attach);
  t.add_ue(13, {}, 0, TunnelId{4}, attach);
  t.add_ue(14, {}, 2, TunnelId{5}, attach);
  compute_lookahead(t);
  const LinkModel m;
  auto at_selection = [&](NodeId a, NodeId b, double se) { return link(a, b, required_snr_db(m, se), se); };
  for (auto [a, b] : {std::pair{0u, 1u}, std::pair{0u, 4u}, std::pair{1u, 2u}, std::pair{2u, 3u}})
    d.links.insert(at_selection(a, b, 3.0));
  for (auto [a, b] : {std::pair{3u, 10u}, std::pair{3u, 11u}, std::pair{4u, 12u}, std::pair{0u, 13u}, std::pair{2u, 14u}})
    d.links.insert(at_selection(a, b, 1.5));
  d.tree = std::move(t);
  return d;
}

SimConfig figure_one_config(double rate, SchedulerKind kind) {
  SimConfig c;
  c.n_relays = 4;
  c.rate_bps = rate;
  c.sim_duration = from_seconds(1.5);
  c.warmup = std::chrono::milliseconds(200);
  c.audit_interval = 10;
  c.record_allocations = true;
  c.record_packets = true;
  c.mac.scheduler_kind = kind;
  return c;
}

}  // namespace

TEST_CASE("event queue orders by time, then kind, then insertion") {
  EventQueue q;
  const SimTime t = std::chrono::milliseconds(3);
  q.push(t, EventKind::subframe_tick, 1);
  q.push(t, EventKind::packet_arrival, 2);
  q.push(t, EventKind::tb_reception, 3);
  q.push(t - SimTime{1}, EventKind::subframe_tick, 4);
  q.push(t, EventKind::tb_reception, 5);
  q.push(t, EventKind::harq_feedback, 6);
  std::vector<std::uint32_t> order;
  while (!q.empty()) order.push_back(q.pop().target);
  CHECK(order == std::vector<std::uint32_t>{4, 3, 5, 6, 2, 1});
}

TEST_CASE("uncongested single UE: everything delivered close to the core latency") {
  SimConfig c = short_config(0, 5e6);
  c.n_ues = 1;
  c.record_packets = true;
  const RunResult r = run_once(c);
  require_clean(r);
  REQUIRE(r.flows.size() == 1);
  const auto& f = r.flows[0];
  CHECK(f.dropped == 0);
  CHECK(f.arrived > 0);
  CHECK(f.delivered + 5 >= f.arrived);
  CHECK(f.min_latency >= std::chrono::milliseconds(12));
  const auto* all = find_group(r.metrics, UeGroup::all_ues);
  REQUIRE(all);
  CHECK(*all->mean_latency_ms < 16.0);
  CHECK(*all->mean_latency_ms >= 12.0);
  CHECK(all->sum_throughput_mbps == doctest::Approx(5.0).epsilon(0.02));
  for (const auto& d : r.deliveries) CHECK(d.hops == std::vector<NodeId>{0});
}

TEST_CASE("reference tree: allocations computed exactly eta subframes ahead") {
  for (auto kind : {SchedulerKind::rr, SchedulerKind::pf}) {
    const RunResult r = Simulation(figure_one_config(200e6, kind), figure_one_deployment()).run();
    require_clean(r);
    CHECK(r.lookahead.at(0) == 4);
    CHECK(r.lookahead.at(1) == 3);
    CHECK(r.lookahead.at(2) == 2);
    CHECK(r.lookahead.at(3) == 1);
    CHECK(r.lookahead.at(4) == 1);
    std::set<NodeId> seen;
    for (const auto& a : r.allocations) {
      CHECK(a.allocation.subframe - a.allocation.computed_at == r.lookahead.at(a.gnb));
      seen.insert(a.gnb);
    }
    CHECK(seen.size() == 5);
    CHECK(r.checks.dcis_checked > 0);

    // Every delivered packet followed its tree path.
    const std::map<NodeId, std::vector<NodeId>> paths{
        {10, {0, 1, 2, 3}}, {11, {0, 1, 2, 3}}, {12, {0, 4}}, {13, {0}}, {14, {0, 1, 2}}};
    std::map<NodeId, int> per_ue;
    for (const auto& d : r.deliveries) {
      CHECK(d.hops == paths.at(d.ue));
      CHECK(d.delivered_at - d.created_at >=
            std::chrono::milliseconds(11) + static_cast<int>(d.hops.size()) * std::chrono::milliseconds(1));
      ++per_ue[d.ue];
    }
    CHECK(per_ue.size() == 5);
  }
}

TEST_CASE("reference tree: backhaul symbols never reused for access") {
  const RunResult r = Simulation(figure_one_config(200e6, SchedulerKind::rr), figure_one_deployment()).run();
  // Rebuild each relay's busy symbols from its parent's allocations.
  std::map<std::pair<NodeId, std::int64_t>, std::uint64_t> busy;
  for (const auto& a : r.allocations) {
    for (const auto& as : a.allocation.assignments) {
      if (as.flow == 1 || as.flow == 2 || as.flow == 3 || as.flow == 4)
        busy[{as.flow, a.allocation.subframe}] |= mask_of(as.ranges);
    }
  }
  long overlaps = 0;
  long relay_allocs = 0;
  for (const auto& a : r.allocations) {
    if (a.gnb == 0) continue;
    ++relay_allocs;
    auto it = busy.find({a.gnb, a.allocation.subframe});
    if (it != busy.end() && (it->second & a.allocation.used_mask())) ++overlaps;
  }
  CHECK(relay_allocs > 1000);
  CHECK(overlaps == 0);
}

TEST_CASE("lossy links exercise HARQ and RLC recovery without losing packets") {
  SimConfig c = figure_one_config(20e6, SchedulerKind::rr);
  c.radio.model.bler_target = 0.5;
  const RunResult r = Simulation(c, figure_one_deployment()).run();
  require_clean(r);
  for (const auto& f : r.flows) {
    CHECK(f.dropped == 0);
    CHECK(f.delivered > 0);
    CHECK(f.delivered <= f.arrived);
  }
}

TEST_CASE("a DCI delay longer than the look-ahead allows is a causality error") {
  SimConfig c = figure_one_config(50e6, SchedulerKind::rr);
  c.mac.dci_delay = 2;
  Simulation sim(c, figure_one_deployment());
  CHECK_THROWS_AS(sim.run(), CausalityError);
}

TEST_CASE("paper deployment: four relays on the donor, forty tunnels") {
  SimConfig c;
  c.seed = 4;
  for (auto policy : {AttachPolicy::closest_wired, AttachPolicy::best_hqf}) {
    c.attach_policy = policy;
    const Deployment d = build_deployment(c);
    CHECK(d.tree.iab_nodes().size() == 4);
    for (NodeId r : d.tree.iab_nodes()) {
      CHECK(*d.tree.node(r).parent == 0);
      CHECK(d.links.at(0, r).los);
      CHECK(d.links.at(0, r).distance_3d == doctest::Approx(85));
    }
    std::set<std::uint32_t> tunnels;
    for (NodeId u : d.tree.ues()) tunnels.insert(d.tree.node(u).tunnel->value);
    CHECK(tunnels.size() == 40);
    CHECK(d.tree.node(0).lookahead_depth == 2);
  }
}

TEST_CASE("shadowing of a link does not depend on the relay count") {
  SimConfig a;
  a.seed = 9;
  a.n_relays = 0;
  SimConfig b = a;
  b.n_relays = 4;
  const Deployment da = build_deployment(a);
  const Deployment db = build_deployment(b);
  // UE j has id 1 + j without relays and 5 + j with four.
  for (NodeId j = 0; j < 40; ++j) {
    CHECK(da.links.at(0, 1 + j).snr_db == db.links.at(0, 5 + j).snr_db);
  }
}

TEST_CASE("same seed, same result; different seed, different result") {
  SimConfig c = short_config(2, 100e6, 0.9);
  c.record_packets = true;
  const RunResult a = run_once(c);
  const RunResult b = run_once(c);
  CHECK(a == b);
  c.seed = 2;
  CHECK_FALSE(run_once(c) == a);
}

TEST_CASE("campaign results do not depend on the thread count") {
  const SimConfig c = short_config(1, 224e6, 0.8);
  const auto serial = run_campaign(c, 3, 1);
  const auto parallel = run_campaign(c, 3, 3);
  REQUIRE(serial.size() == 3);
  CHECK(serial == parallel);
  for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].seed == c.seed + i);
  CHECK(run_campaign(c, 1, 4).size() == 1);
  CHECK_THROWS_AS(run_campaign(c, 0, 1), ConfigError);
}

TEST_CASE("congested run respects capacity, offered load and all invariants") {
  for (int relays : {0, 2, 4}) {
    const RunResult r = run_once(short_config(relays, 224e6, 1.2));
    require_clean(r);
    const auto* all = find_group(r.metrics, UeGroup::all_ues);
    const auto* donor = find_group(r.metrics, UeGroup::donor_ues);
    const auto* iab = find_group(r.metrics, UeGroup::iab_ues);
    REQUIRE(all);
    CHECK(all->sum_throughput_mbps <= 40 * 224.0);
    CHECK(all->sum_throughput_mbps <= 3200.0);
    CHECK(all->sum_throughput_mbps > 1000.0);
    CHECK(*all->mean_latency_ms >= 11.0);
    const double parts = (donor ? donor->sum_throughput_mbps : 0.0) + (iab ? iab->sum_throughput_mbps : 0.0);
    CHECK(all->sum_throughput_mbps == doctest::Approx(parts));
    CHECK((iab != nullptr) == (relays > 0));
    CHECK(r.checks.peak_ue_buffer <= 10LL * 1024 * 1024);
    CHECK(r.checks.peak_iab_buffer <= 40LL * 1024 * 1024);
    std::uint64_t dropped = 0;
    for (const auto& f : r.flows) dropped += f.dropped;
    CHECK(dropped > 0);
  }
}

TEST_CASE("simulation config validation") {
  SimConfig c;
  c.sim_duration = c.attach_delay;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.n_relays = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.rate_bps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.warmup = c.sim_duration;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
