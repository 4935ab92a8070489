#include "iabsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "iabsim/errors.hpp"
#include "iabsim/random.hpp"

namespace iabsim {

void SimConfig::validate() const {
  radio.base.validate();
  radio.model.validate();
  mac.validate();
  stack.validate();
  if (n_relays < 0 || n_relays > kMaxRelays)
    throw ConfigError(fmt::format("n_relays must be in 0..{}, got {}", kMaxRelays, n_relays));
  if (n_ues < 0) throw ConfigError("n_ues must be non-negative");
  if (!(rate_bps > 0) || !std::isfinite(rate_bps)) throw ConfigError("rate must be positive");
  if (packet_size == 0) throw ConfigError("packet_size must be positive");
  if (attach_delay < SimTime{0} || warmup < SimTime{0}) throw ConfigError("attach_delay and warmup must be non-negative");
  if (sim_duration <= attach_delay) throw ConfigError("sim_duration must exceed attach_delay");
  if (window_start() >= sim_duration) throw ConfigError("warm-up leaves no measurement window");
  if (audit_interval < 0) throw ConfigError("audit_interval must be non-negative");
}

// ---------------------------------------------------------------------------
// Deployment

namespace {

constexpr std::uint64_t kDonorLabel = 0;
constexpr std::uint64_t kRelayLabelBase = 1000;
constexpr std::uint64_t kUeLabelBase = 100000;

}  // namespace

LinkState make_link(const SimConfig& config, const Scenario& scenario, NodeId a, const Position& pa,
                    std::uint64_t label_a, NodeId b, const Position& pb, std::uint64_t label_b, bool rx_is_ue) {
  LinkState link;
  link.a = a;
  link.b = b;
  link.distance_3d = distance_3d(pa, pb);
  link.los = is_los(scenario, pa, pb);
  const double sigma = link.los ? config.radio.model.shadowing_los_db : config.radio.model.shadowing_nlos_db;
  auto rng = make_substream(config.seed, "shadowing", {std::min(label_a, label_b), std::max(label_a, label_b)});
  link.shadowing_db = sigma > 0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
  const ChannelConfig ch = config.radio.downlink(rx_is_ue);
  link.snr_db = compute_snr(ch, link.distance_3d, link.los, link.shadowing_db);
  const auto la = link_adapt(ch, config.radio.model, link.snr_db, config.mac.symbols_per_subframe,
                             config.mac.subframe_duration);
  link.spectral_efficiency = la.spectral_efficiency;
  link.per_symbol_capacity = la.per_symbol_capacity;
  return link;
}

Deployment build_deployment(const SimConfig& config) {
  config.validate();
  const auto& g = config.geometry;
  Deployment dep;
  dep.scenario = build_manhattan_grid(g.block_side, g.street_width, g.rows, g.cols, g.building_height);
  const Scenario& sc = *dep.scenario;
  const Placement place = place_nodes(sc, config.n_relays, config.n_ues, config.seed, g.heights, g.relay_distance);

  std::vector<GnbSite> gnbs;
  std::vector<std::uint64_t> gnb_labels;
  gnbs.push_back({0, NodeRole::donor, place.donor});
  gnb_labels.push_back(kDonorLabel);
  for (std::size_t i = 0; i < place.relays.size(); ++i) {
    gnbs.push_back({static_cast<NodeId>(i + 1), NodeRole::iab, place.relays[i]});
    gnb_labels.push_back(kRelayLabelBase + i);
  }
  std::vector<UeSite> ues;
  const auto first_ue = static_cast<NodeId>(gnbs.size());
  for (std::size_t j = 0; j < place.ues.size(); ++j) ues.push_back({first_ue + static_cast<NodeId>(j), place.ues[j]});

  for (std::size_t i = 0; i < gnbs.size(); ++i) {
    for (std::size_t j = i + 1; j < gnbs.size(); ++j) {
      dep.links.insert(make_link(config, sc, gnbs[i].id, gnbs[i].position, gnb_labels[i], gnbs[j].id,
                                 gnbs[j].position, gnb_labels[j], false));
    }
  }
  for (std::size_t i = 0; i < gnbs.size(); ++i) {
    for (std::size_t j = 0; j < ues.size(); ++j) {
      dep.links.insert(make_link(config, sc, gnbs[i].id, gnbs[i].position, gnb_labels[i], ues[j].id,
                                 ues[j].position, kUeLabelBase + j, true));
    }
  }

  dep.tree = attach_iab_nodes(gnbs, dep.links, config.attach_policy, config.radio.model.snr_min_db);
  attach_ues(dep.tree, ues, config.attach_delay);
  compute_lookahead(dep.tree);
  dep.tree.validate();
  return dep;
}

std::string describe_violations(const InvariantReport& r) {
  const std::pair<const char*, std::uint64_t> counters[] = {
      {"non_overlap", r.non_overlap},
      {"half_cap", r.half_cap},
      {"dci_causality", r.dci_causality},
      {"allocation_timing", r.allocation_timing},
      {"work_conservation", r.work_conservation},
      {"rr_fairness", r.rr_fairness},
      {"latency_floor", r.latency_floor},
      {"duplicate_delivery", r.duplicate_delivery},
      {"hop_trace", r.hop_trace},
      {"buffer_overflow", r.buffer_overflow},
      {"conservation", r.conservation},
      {"event_order", r.event_order},
  };
  std::string out;
  for (const auto& [name, count] : counters) {
    if (count == 0) continue;
    if (!out.empty()) out += ' ';
    out += fmt::format("{}={}", name, count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event queue

void EventQueue::push(SimTime time, EventKind kind, std::uint32_t target, std::uint64_t payload) {
  heap_.push(Event{time, kind, seq_++, target, payload});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

// ---------------------------------------------------------------------------
// Simulation

struct Simulation::Impl {
  struct Flow {
    FlowResult result;
    CbrSchedule schedule;
    std::uint64_t next_k = 0;
    std::vector<NodeId> expected_path;  // gNBs from the donor to the serving gNB
    std::vector<std::pair<NodeId, NodeId>> next_hops;  // (gNB on the path, routing decision there)
    SimTime latency_floor{0};
    std::optional<std::uint64_t> last_delivered;
  };
  struct InFlight {
    NodeId child = 0;
    TransmittedTb tx;
  };
  struct PendingDci {
    std::int64_t deliver_at = 0;
    Dci dci;
  };

  SimConfig cfg;
  Deployment dep;
  SimTime sf;
  std::vector<NodeId> gnb_order;  // decreasing lookahead, then id
  std::vector<std::unique_ptr<GnbScheduler>> schedulers;
  std::vector<std::map<std::int64_t, SubframeAllocation>> allocations;
  std::vector<std::unique_ptr<Bearer>> bearers;  // by child id
  std::map<NodeId, RoutingTable> routing;
  std::vector<Flow> flows;
  std::vector<int> flow_of_ue;
  std::vector<int> flow_by_tunnel_value;
  std::unordered_map<std::uint64_t, InFlight> inflight;
  std::uint64_t next_inflight = 0;
  std::unordered_map<std::uint64_t, std::pair<NodeId, std::vector<Segment>>> reports;
  std::uint64_t next_report = 0;
  std::vector<PendingDci> dcis;
  std::mt19937_64 harq_rng;
  EventQueue queue;
  RunResult result;
  std::vector<Packet> scratch;

  Impl(const SimConfig& c, Deployment d)
      : cfg(c), dep(std::move(d)), sf(c.mac.subframe_duration), harq_rng(make_substream(c.seed, "harq")) {
    cfg.validate();
    const IabTree& tree = dep.tree;
    NodeId max_id = 0;
    for (const auto& [id, n] : tree.nodes()) max_id = std::max(max_id, id);
    schedulers.resize(max_id + 1);
    allocations.resize(max_id + 1);
    bearers.resize(max_id + 1);
    flow_of_ue.assign(max_id + 1, -1);

    gnb_order = tree.gnbs();
    std::stable_sort(gnb_order.begin(), gnb_order.end(), [&](NodeId a, NodeId b) {
      return tree.node(a).lookahead_depth > tree.node(b).lookahead_depth;
    });
    for (NodeId g : gnb_order) {
      schedulers[g] = std::make_unique<GnbScheduler>(g, cfg.mac);
      result.lookahead[g] = tree.node(g).lookahead_depth;
      if (g != tree.donor_id() && setup_complete_time(tree, g, cfg.core.server_to_donor_latency, sf) > cfg.attach_delay) {
        throw ConfigError(fmt::format("attach_delay ends before IAB node {} completes its setup", g));
      }
    }
    for (const auto& [id, n] : tree.nodes()) {
      if (!n.parent) continue;
      bearers[id] = std::make_unique<Bearer>(*n.parent, id, n.role == NodeRole::iab, dep.links.at(*n.parent, id),
                                             cfg.stack);
    }
    routing = build_routing_tables(tree);

    for (NodeId ue : tree.ues()) {
      const auto& n = tree.node(ue);
      FlowConfig fc{ue, cfg.rate_bps, cfg.packet_size, n.attach_time, cfg.sim_duration};
      fc.validate();
      Flow f{FlowResult{}, CbrSchedule(fc), 0, {}, {}, SimTime{0}, std::nullopt};
      f.result.ue = ue;
      f.result.tunnel = *n.tunnel;
      f.result.serving_gnb = *n.parent;
      f.result.via_iab = tree.node(*n.parent).role == NodeRole::iab;
      f.result.hops = tree.hops_from_donor(ue);
      f.expected_path = tree.path_from_donor(ue);
      f.expected_path.pop_back();
      for (NodeId g : f.expected_path) f.next_hops.emplace_back(g, route_at_node(routing.at(g), *n.tunnel).next_hop);
      f.latency_floor = cfg.core.server_to_donor_latency + f.result.hops * sf;
      f.result.generated = f.schedule.count();
      flow_of_ue[ue] = static_cast<int>(flows.size());
      if (flow_by_tunnel_value.size() <= n.tunnel->value) flow_by_tunnel_value.resize(n.tunnel->value + 1, -1);
      flow_by_tunnel_value[n.tunnel->value] = static_cast<int>(flows.size());
      flows.push_back(std::move(f));
    }

    result.seed = cfg.seed;
    result.n_relays = cfg.n_relays;
    result.rate_bps = cfg.rate_bps;
    result.window_start = cfg.window_start();
    result.window_end = cfg.sim_duration;
  }

  bool in_window(SimTime t) const { return t >= result.window_start && t < result.window_end; }

  std::int64_t subframe_at(SimTime t) const { return t / sf; }

  void drop(Flow& f, SimTime now) {
    ++f.result.dropped;
    if (in_window(now)) ++f.result.window_dropped;
  }

  // A packet has reached gNB `at` (the donor from the core, or a relay over backhaul).
  void arrive_at_gnb(NodeId at, Packet packet, SimTime now) {
    packet.hop_trace.push(at);
    const std::uint32_t tv = packet.tunnel.value;
    if (tv >= flow_by_tunnel_value.size() || flow_by_tunnel_value[tv] < 0)
      throw RoutingError(fmt::format("packet for unknown tunnel {} at node {}", tv, at));
    Flow& f = flows[static_cast<std::size_t>(flow_by_tunnel_value[tv])];
    // Routes along the flow's own path are resolved once at setup; anything
    // else goes through the table and fails there.
    auto hop = std::find_if(f.next_hops.begin(), f.next_hops.end(), [&](const auto& h) { return h.first == at; });
    const NodeId next = hop != f.next_hops.end() ? hop->second : route_at_node(routing.at(at), packet.tunnel).next_hop;
    if (!bearers[next]->enqueue(packet)) drop(f, now);
  }

  void deliver_to_ue(NodeId ue, Packet& packet, SimTime now) {
    const int idx = flow_of_ue[ue];
    if (idx < 0) throw StructuralError(fmt::format("packet delivered to unknown UE {}", ue));
    Flow& f = flows[static_cast<std::size_t>(idx)];
    auto& checks = result.checks;
    ++checks.packets_checked;
    if (packet.tunnel != f.result.tunnel) ++checks.hop_trace;
    if (!(packet.hop_trace == std::span<const NodeId>(f.expected_path)) ||
        packet.hop_trace.size() != f.expected_path.size())
      ++checks.hop_trace;
    const SimTime latency = now - packet.created_at;
    if (latency < f.latency_floor) ++checks.latency_floor;
    if (f.last_delivered && packet.id <= *f.last_delivered) ++checks.duplicate_delivery;
    f.last_delivered = packet.id;

    ++f.result.delivered;
    if (f.result.delivered == 1 || latency < f.result.min_latency) f.result.min_latency = latency;
    if (in_window(now)) {
      ++f.result.window_delivered;
      f.result.window_bytes += packet.payload_bytes;
      f.result.window_latency_sum += latency;
    }
    if (cfg.record_packets) {
      auto hops = packet.hop_trace.nodes();
      result.deliveries.push_back({packet.id, ue, packet.created_at, now, {hops.begin(), hops.end()}});
    }
  }

  void on_packet_arrival(std::size_t flow_idx, SimTime now) {
    Flow& f = flows[flow_idx];
    // Nothing but arrivals happens strictly between ticks, so every packet up
    // to the next tick is taken now. A packet arriving exactly on a tick must
    // not pull in later ones ahead of that tick.
    const bool on_tick = now % sf == SimTime{0};
    const SimTime end = on_tick ? now + SimTime{1} : (subframe_at(now) + 1) * sf;
    const auto& core = cfg.core;
    while (f.next_k < f.schedule.count() && f.schedule.donor_arrival(f.next_k, core) < end) {
      Packet p;
      p.id = (static_cast<std::uint64_t>(flow_idx) << 40) | f.next_k;
      p.payload_bytes = cfg.packet_size;
      p.tunnel = f.result.tunnel;
      p.created_at = f.schedule.created_at(f.next_k);
      ++f.result.arrived;
      ++f.next_k;
      arrive_at_gnb(dep.tree.donor_id(), p, now);
    }
    if (f.next_k < f.schedule.count()) {
      const SimTime next = f.schedule.donor_arrival(f.next_k, core);
      if (next < cfg.sim_duration) queue.push(next, EventKind::packet_arrival, static_cast<std::uint32_t>(flow_idx));
    }
  }

  void on_tb_reception(std::uint64_t id, SimTime now) {
    InFlight& in = inflight.at(id);
    Bearer& b = *bearers[in.child];
    if (in.tx.success) {
      scratch.clear();
      b.rx().deliver(in.tx.tb.segments, b.tx(), scratch);
      const bool to_ue = dep.tree.node(in.child).role == NodeRole::ue;
      for (auto& p : scratch) {
        if (to_ue) {
          deliver_to_ue(in.child, p, now);
        } else {
          arrive_at_gnb(in.child, p, now);
        }
      }
    }
    queue.push(now + sf, EventKind::harq_feedback, in.child, id);
  }

  void on_harq_feedback(std::uint64_t id, SimTime now) {
    auto it = inflight.find(id);
    InFlight in = std::move(it->second);
    inflight.erase(it);
    Bearer& b = *bearers[in.child];
    if (in.tx.success) {
      b.tx().ack(in.tx.tb.segments);
      return;
    }
    std::optional<SimTime> timer;
    b.on_harq_failure(std::move(in.tx.tb), now, &timer);
    if (timer) queue.push(*timer, EventKind::timer_expiry, in.child);
  }

  void on_timer_expiry(NodeId child, SimTime now) {
    auto report = bearers[child]->rx().expire_timer(now);
    if (report.empty()) return;
    const std::uint64_t id = next_report++;
    reports.emplace(id, std::pair{child, std::move(report)});
    queue.push(now + sf, EventKind::status_report, child, id);
  }

  void on_status_report(std::uint64_t id) {
    auto it = reports.find(id);
    bearers[it->second.first]->tx().nack(it->second.second);
    reports.erase(it);
  }

  std::uint64_t full_mask() const {
    const int s = cfg.mac.symbols_per_subframe;
    return s >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << s) - 1;
  }

  void check_allocation(NodeId gnb, std::int64_t k, int eta, const BusyMask& busy, const ScheduleResult& res,
                        const std::vector<FlowDemand>& demands, const std::vector<HarqRetxRequest>& retx) {
    auto& checks = result.checks;
    ++checks.subframes_checked;
    const auto& alloc = res.allocation;
    const int S = cfg.mac.symbols_per_subframe;
    const int cap = cfg.mac.max_iab_child_symbols();
    if (alloc.subframe != k + eta || alloc.computed_at != k) ++checks.allocation_timing;

    std::uint64_t used = 0;
    std::map<FlowId, int> retx_symbols;
    std::map<FlowId, int> new_symbols;
    for (const auto& a : alloc.assignments) {
      std::uint64_t m = 0;
      int count = 0;
      for (const auto& r : a.ranges) {
        if (r.start < 0 || r.count <= 0 || r.start + r.count > S) ++checks.non_overlap;
        for (int s = r.start; s < r.start + r.count && s < 64; ++s) {
          if (s >= 0) m |= std::uint64_t{1} << s;
          ++count;
        }
      }
      if (count != a.symbols || std::popcount(m) != count) ++checks.non_overlap;
      if ((m & used) || (m & busy.bits)) ++checks.non_overlap;
      used |= m;
      (a.harq_id ? retx_symbols : new_symbols)[a.flow] += a.symbols;
    }

    std::map<FlowId, bool> iab;
    for (const auto& d : demands) iab[d.flow] = d.is_iab_child;
    for (const auto& d : demands) {
      if (!d.is_iab_child) continue;
      if (retx_symbols[d.flow] + new_symbols[d.flow] > cap) ++checks.half_cap;
    }

    for (const auto& dci : res.dcis) {
      ++checks.dcis_checked;
      if (dci.created_at > dci.subframe - 1 || dci.subframe != alloc.subframe) ++checks.dci_causality;
      if (!iab[dci.to]) ++checks.dci_causality;
    }

    const int free_left = std::popcount(full_mask() & ~busy.bits & ~used);
    std::vector<std::pair<int, int>> grant_need;  // (granted new, wanted new)
    for (const auto& d : demands) {
      int want = 0;
      if (d.queued_bytes > 0 && d.per_symbol_capacity > 0) {
        const double bits = static_cast<double>(d.queued_bytes) * 8.0;
        want = static_cast<int>(std::min<double>(std::ceil(bits / d.per_symbol_capacity), S));
        if (d.is_iab_child) want = std::min(want, cap - retx_symbols[d.flow]);
      }
      const int got = new_symbols[d.flow];
      if (free_left > 0 && got < want) ++checks.work_conservation;
      grant_need.emplace_back(got, want);
    }
    for (const auto& r : retx) {
      const bool scheduled = std::any_of(alloc.assignments.begin(), alloc.assignments.end(),
                                         [&](const Assignment& a) { return a.harq_id == r.harq_id && a.flow == r.flow; });
      if (scheduled) continue;
      const int total = retx_symbols[r.flow] + new_symbols[r.flow];
      if (r.symbols <= free_left && (!iab[r.flow] || total + r.symbols <= cap)) ++checks.work_conservation;
    }

    if (cfg.mac.scheduler_kind == SchedulerKind::rr) {
      for (const auto& [got_f, want_f] : grant_need) {
        if (got_f >= want_f) continue;
        for (const auto& [got_g, want_g] : grant_need) {
          if (got_g > got_f + 1) ++checks.rr_fairness;
        }
      }
    }
    (void)gnb;
  }

  void schedule_gnb(NodeId g, std::int64_t k) {
    const auto& node = dep.tree.node(g);
    const int eta = node.lookahead_depth;
    const std::int64_t target = k + eta;
    std::vector<FlowDemand> demands;
    std::vector<HarqRetxRequest> retx;
    demands.reserve(node.children.size());
    for (NodeId c : node.children) {
      const Bearer& b = *bearers[c];
      demands.push_back(b.demand());
      auto r = b.harq_ready(target);
      retx.insert(retx.end(), r.begin(), r.end());
    }
    GnbScheduler& sched = *schedulers[g];
    const BusyMask busy = sched.busy_mask(target);
    ScheduleResult res = sched.schedule(k, target, demands, retx);
    check_allocation(g, k, eta, busy, res, demands, retx);

    for (const auto& a : res.allocation.assignments) {
      Bearer& b = *bearers[a.flow];
      if (a.harq_id) {
        b.mark_harq_scheduled(*a.harq_id);
      } else {
        b.add_granted(a.tb_bits / 8);
      }
    }
    for (auto& dci : res.dcis) dcis.push_back({k + cfg.mac.dci_delay, std::move(dci)});
    if (cfg.record_allocations) result.allocations.push_back({g, eta, res.allocation});
    allocations[g].emplace(target, std::move(res.allocation));
  }

  void execute_gnb(NodeId g, std::int64_t k) {
    const int eta = dep.tree.node(g).lookahead_depth;
    auto& pending = allocations[g];
    auto it = pending.find(k);
    if (it == pending.end()) {
      if (k >= eta) ++result.checks.allocation_timing;
      return;
    }
    if (it->second.computed_at != k - eta) ++result.checks.allocation_timing;
    const SimTime rx_time = (k + 1) * sf;
    for (const auto& a : it->second.assignments) {
      auto tb = serve_allocation(*bearers[a.flow], a, cfg.radio.model, harq_rng, k);
      if (!tb) continue;
      const std::uint64_t id = next_inflight++;
      inflight.emplace(id, InFlight{a.flow, std::move(*tb)});
      queue.push(rx_time, EventKind::tb_reception, a.flow, id);
    }
    pending.erase(pending.begin(), std::next(it));
  }

  void check_buffers() {
    auto& checks = result.checks;
    for (const auto& b : bearers) {
      if (!b) continue;
      const auto occ = b->tx().occupancy_bytes();
      if (occ > b->tx().capacity_bytes() || occ < 0) ++checks.buffer_overflow;
      auto& peak = b->is_backhaul() ? checks.peak_iab_buffer : checks.peak_ue_buffer;
      peak = std::max(peak, occ);
    }
  }

  // Packets that reached the donor are delivered, dropped, or still inside
  // some bearer. A packet is counted on the hop whose receiver has not yet
  // released it upward.
  void audit() {
    auto& checks = result.checks;
    ++checks.audits;
    std::vector<std::uint64_t> in_network(flows.size(), 0);
    for (const auto& b : bearers) {
      if (!b) continue;
      const RlcAmTx& tx = b->tx();
      const std::uint32_t from = b->rx().next_expected();
      if (from < tx.base_sn() || from > tx.next_sn()) {
        ++checks.conservation;
        continue;
      }
      for (std::uint32_t sn = from; sn < tx.next_sn(); ++sn) {
        const std::uint32_t tv = tx.packet(sn).tunnel.value;
        if (tv >= flow_by_tunnel_value.size() || flow_by_tunnel_value[tv] < 0) {
          ++checks.conservation;
          continue;
        }
        ++in_network[static_cast<std::size_t>(flow_by_tunnel_value[tv])];
      }
    }
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto& r = flows[i].result;
      if (r.arrived != r.delivered + r.dropped + in_network[i] || r.arrived > r.generated) ++checks.conservation;
    }
  }

  void on_tick(std::int64_t k, SimTime now) {
    for (auto it = dcis.begin(); it != dcis.end();) {
      if (it->deliver_at > k) {
        ++it;
        continue;
      }
      ++result.checks.dcis_checked;
      if (it->deliver_at < k || it->dci.subframe <= k) ++result.checks.dci_causality;
      schedulers[it->dci.to]->ingest_parent_dci(it->dci, k);
      it = dcis.erase(it);
    }
    for (NodeId g : gnb_order) schedule_gnb(g, k);
    for (NodeId g : gnb_order) execute_gnb(g, k);
    check_buffers();
    if (cfg.audit_interval > 0 && k % cfg.audit_interval == 0) audit();
    const SimTime next = now + sf;
    if (next < cfg.sim_duration) queue.push(next, EventKind::subframe_tick, 0, static_cast<std::uint64_t>(k + 1));
  }

  RunResult run() {
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto& fc = flows[i].schedule.flow();
      const auto idx = static_cast<std::uint32_t>(i);
      queue.push(fc.start, EventKind::flow_start, idx);
      queue.push(fc.stop, EventKind::flow_stop, idx);
    }
    queue.push(SimTime{0}, EventKind::subframe_tick, 0, 0);

    SimTime last{0};
    while (!queue.empty()) {
      const Event ev = queue.pop();
      if (ev.time >= cfg.sim_duration) break;
      if (ev.time < last) ++result.checks.event_order;
      last = ev.time;
      ++result.events_processed;
      switch (ev.kind) {
        case EventKind::tb_reception: on_tb_reception(ev.payload, ev.time); break;
        case EventKind::harq_feedback: on_harq_feedback(ev.payload, ev.time); break;
        case EventKind::status_report: on_status_report(ev.payload); break;
        case EventKind::timer_expiry: on_timer_expiry(ev.target, ev.time); break;
        case EventKind::flow_start: {
          const auto& f = flows[ev.target];
          if (f.schedule.count() > 0) {
            const SimTime first = f.schedule.donor_arrival(0, cfg.core);
            if (first < cfg.sim_duration) queue.push(first, EventKind::packet_arrival, ev.target);
          }
          break;
        }
        case EventKind::flow_stop: break;
        case EventKind::packet_arrival: on_packet_arrival(ev.target, ev.time); break;
        case EventKind::subframe_tick: on_tick(static_cast<std::int64_t>(ev.payload), ev.time); break;
      }
    }
    audit();

    for (auto& f : flows) result.flows.push_back(f.result);
    result.metrics = compute_metrics(result, dep.tree);
    return std::move(result);
  }
};

Simulation::Simulation(const SimConfig& config, Deployment deployment)
    : impl_(std::make_unique<Impl>(config, std::move(deployment))) {}

Simulation::~Simulation() = default;

RunResult Simulation::run() { return impl_->run(); }

RunResult run_once(const SimConfig& config) {
  Simulation sim(config, build_deployment(config));
  return sim.run();
}

std::vector<RunResult> run_campaign(const SimConfig& config, int n_runs, unsigned threads) {
  if (n_runs < 1) throw ConfigError("n_runs must be at least 1");
  std::vector<RunResult> results(static_cast<std::size_t>(n_runs));
  auto run_index = [&](std::size_t i) {
    SimConfig c = config;
    c.seed = config.seed + i;
    results[i] = run_once(c);
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n_runs)));
  if (threads == 1) {
    for (std::size_t i = 0; i < results.size(); ++i) run_index(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < results.size(); i = next++) {
        try {
          run_index(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace iabsim
