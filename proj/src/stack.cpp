#include "iabsim/stack.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

void StackConfig::validate() const {
  if (ue_buffer_bytes <= 0 || iab_buffer_bytes <= 0) throw ConfigError("RLC buffer sizes must be positive");
  if (reordering_timer < SimTime{0}) throw ConfigError("reordering timer must be non-negative");
  if (max_harq_retx < 0) throw ConfigError("max_harq_retx must be non-negative");
  if (harq_retx_delay < 1) throw ConfigError("harq_retx_delay must be at least one subframe");
}

void HopTrace::push(NodeId id) {
  if (size_ == kCapacity) throw StructuralError("packet exceeded the maximum hop count");
  hops_[size_++] = id;
}

bool HopTrace::operator==(std::span<const NodeId> path) const {
  return std::equal(path.begin(), path.end(), hops_.begin(), hops_.begin() + static_cast<std::ptrdiff_t>(size_));
}

// ---------------------------------------------------------------------------
// RlcAmTx

RlcAmTx::RlcAmTx(std::int64_t capacity_bytes, std::uint32_t overhead_bytes, std::uint32_t header_bytes)
    : capacity_(capacity_bytes), overhead_(overhead_bytes), header_(header_bytes) {}

RlcAmTx::Sdu& RlcAmTx::at(std::uint32_t sn) { return sdus_[sn - base_sn_]; }
const RlcAmTx::Sdu& RlcAmTx::at(std::uint32_t sn) const { return sdus_[sn - base_sn_]; }

bool RlcAmTx::holds(std::uint32_t sn) const { return sn >= base_sn_ && sn < next_sn_ && at(sn).acked < at(sn).size; }

bool RlcAmTx::enqueue(const Packet& packet) {
  const std::uint32_t size = packet.payload_bytes + overhead_;
  if (occupancy_ + size > capacity_) {
    ++drops_;
    return false;
  }
  sdus_.push_back(Sdu{packet, size, 0});
  ++next_sn_;
  occupancy_ += size;
  unsent_bytes_ += size;
  return true;
}

std::vector<Segment> RlcAmTx::pull(std::int64_t tb_bytes) {
  std::vector<Segment> out;
  std::int64_t space = tb_bytes;
  while (space > header_ && !retx_.empty()) {
    Segment& front = retx_.front();
    const auto room = static_cast<std::uint32_t>(std::min<std::int64_t>(space - header_, front.length));
    out.push_back({front.sn, front.offset, room});
    space -= header_ + room;
    retx_bytes_ -= room;
    if (room == front.length) {
      retx_.pop_front();
    } else {
      front.offset += room;
      front.length -= room;
    }
  }
  while (space > header_ && send_sn_ < next_sn_) {
    const Sdu& sdu = at(send_sn_);
    const std::uint32_t remaining = sdu.size - send_offset_;
    const auto room = static_cast<std::uint32_t>(std::min<std::int64_t>(space - header_, remaining));
    out.push_back({send_sn_, send_offset_, room});
    space -= header_ + room;
    unsent_bytes_ -= room;
    send_offset_ += room;
    if (send_offset_ == sdu.size) {
      ++send_sn_;
      send_offset_ = 0;
    }
  }
  return out;
}

void RlcAmTx::ack(std::span<const Segment> segments) {
  for (const auto& seg : segments) {
    if (!holds(seg.sn)) continue;
    Sdu& sdu = at(seg.sn);
    sdu.acked = std::min(sdu.size, sdu.acked + seg.length);
    if (sdu.acked == sdu.size) occupancy_ -= sdu.size;
  }
  while (!sdus_.empty() && sdus_.front().acked == sdus_.front().size && base_sn_ < send_sn_) {
    sdus_.pop_front();
    ++base_sn_;
  }
}

void RlcAmTx::nack(std::span<const Segment> segments) {
  for (const auto& seg : segments) {
    if (!holds(seg.sn) || seg.length == 0) continue;
    retx_.push_back(seg);
    retx_bytes_ += seg.length;
  }
}

const Packet& RlcAmTx::packet(std::uint32_t sn) const {
  if (sn < base_sn_ || sn >= next_sn_) throw StructuralError(fmt::format("RLC SN {} is not buffered", sn));
  return at(sn).packet;
}

std::uint32_t RlcAmTx::sdu_size(std::uint32_t sn) const {
  if (sn < base_sn_ || sn >= next_sn_) throw StructuralError(fmt::format("RLC SN {} is not buffered", sn));
  return at(sn).size;
}

std::int64_t RlcAmTx::backlog_bytes() const {
  const std::int64_t headers =
      static_cast<std::int64_t>(header_) * (static_cast<std::int64_t>(retx_.size()) + (next_sn_ - send_sn_));
  return retx_bytes_ + unsent_bytes_ + headers;
}

// ---------------------------------------------------------------------------
// RlcAmRx

RlcAmRx::RlcAmRx(SimTime reordering_timer) : reordering_timer_(reordering_timer) {}

void RlcAmRx::add_interval(Pending& p, std::uint32_t begin, std::uint32_t end) {
  auto& iv = p.intervals;
  iv.insert(std::lower_bound(iv.begin(), iv.end(), std::pair{begin, end}), {begin, end});
  std::size_t w = 0;
  for (std::size_t r = 1; r < iv.size(); ++r) {
    if (iv[r].first <= iv[w].second) {
      iv[w].second = std::max(iv[w].second, iv[r].second);
    } else {
      iv[++w] = iv[r];
    }
  }
  iv.resize(w + 1);
  std::uint32_t total = 0;
  for (const auto& r : iv) total += r.second - r.first;
  p.received = total;
}

void RlcAmRx::deliver(std::span<const Segment> segments, const RlcAmTx& peer, std::vector<Packet>& out) {
  for (const auto& seg : segments) {
    if (seg.sn < next_expected_ || seg.length == 0) continue;
    // Whole SDU arriving in order with nothing held for it.
    if (seg.sn == next_expected_ && seg.offset == 0 && seg.length == peer.sdu_size(seg.sn) &&
        (pending_.empty() || pending_.begin()->first != seg.sn)) {
      out.push_back(peer.packet(seg.sn));
      ++next_expected_;
      continue;
    }
    auto [it, inserted] = pending_.try_emplace(seg.sn);
    if (inserted) {
      it->second.packet = peer.packet(seg.sn);
      it->second.size = peer.sdu_size(seg.sn);
    }
    add_interval(it->second, seg.offset, seg.offset + seg.length);
  }
  while (!pending_.empty()) {
    auto it = pending_.begin();
    if (it->first < next_expected_) {
      pending_.erase(it);
      continue;
    }
    if (it->first != next_expected_ || it->second.received < it->second.size) break;
    out.push_back(std::move(it->second.packet));
    pending_.erase(it);
    ++next_expected_;
  }
}

std::optional<SimTime> RlcAmRx::mark_lost(std::span<const Segment> segments, SimTime now) {
  for (const auto& seg : segments) {
    if (std::find(missing_.begin(), missing_.end(), seg) == missing_.end()) missing_.push_back(seg);
  }
  if (timer_) return std::nullopt;
  timer_ = now + reordering_timer_;
  return timer_;
}

std::vector<Segment> RlcAmRx::uncovered(const Segment& seg) const {
  if (seg.sn < next_expected_) return {};
  auto it = pending_.find(seg.sn);
  if (it == pending_.end()) return {seg};
  std::vector<Segment> out;
  std::uint32_t cur = seg.offset;
  const std::uint32_t end = seg.offset + seg.length;
  for (const auto& [b, e] : it->second.intervals) {
    if (e <= cur) continue;
    if (b >= end) break;
    if (b > cur) out.push_back({seg.sn, cur, b - cur});
    cur = std::max(cur, e);
    if (cur >= end) break;
  }
  if (cur < end) out.push_back({seg.sn, cur, end - cur});
  return out;
}

std::vector<Segment> RlcAmRx::expire_timer(SimTime now) {
  if (!timer_ || *timer_ > now) return {};
  timer_.reset();
  std::vector<Segment> report;
  for (const auto& seg : missing_) {
    auto parts = uncovered(seg);
    report.insert(report.end(), parts.begin(), parts.end());
  }
  missing_.clear();
  return report;
}

std::vector<std::uint32_t> RlcAmRx::held_sns() const {
  std::vector<std::uint32_t> out;
  out.reserve(pending_.size());
  for (const auto& [sn, p] : pending_) out.push_back(sn);
  return out;
}

// ---------------------------------------------------------------------------
// Bearer

Bearer::Bearer(NodeId parent, NodeId child, bool backhaul, const LinkState& link, const StackConfig& config)
    : parent_(parent),
      child_(child),
      backhaul_(backhaul),
      link_(link),
      max_harq_retx_(config.max_harq_retx),
      harq_retx_delay_(config.harq_retx_delay),
      tx_(backhaul ? config.iab_buffer_bytes : config.ue_buffer_bytes,
          backhaul ? config.tunnel_overhead_bytes : 0, config.rlc_header_bytes),
      rx_(config.reordering_timer) {}

std::int64_t Bearer::reported_backlog() const { return std::max<std::int64_t>(0, tx_.backlog_bytes() - granted_bytes_); }

void Bearer::consume_granted(std::int64_t bytes) { granted_bytes_ = std::max<std::int64_t>(0, granted_bytes_ - bytes); }

const FlowDemand Bearer::demand() const {
  return FlowDemand{child_, reported_backlog(), link_.per_symbol_capacity, link_.spectral_efficiency, backhaul_};
}

HarqVerdict Bearer::on_harq_failure(TransportBlock tb, SimTime now, std::optional<SimTime>* timer_started) {
  if (tb.transmissions <= max_harq_retx_) {
    const std::int64_t ready = tb.last_tx_subframe + harq_retx_delay_;
    const auto id = tb.harq_id;
    harq_.emplace(id, HarqSlot{std::move(tb), ready, false});
    return HarqVerdict::retransmit;
  }
  auto started = rx_.mark_lost(tb.segments, now);
  if (timer_started) *timer_started = started;
  return HarqVerdict::rlc_recovery;
}

std::vector<HarqRetxRequest> Bearer::harq_ready(std::int64_t target_subframe) const {
  std::vector<HarqRetxRequest> out;
  for (const auto& [id, slot] : harq_) {
    if (slot.scheduled || slot.ready_subframe > target_subframe) continue;
    out.push_back({child_, id, slot.tb.symbols, slot.tb.tb_bits, slot.tb.spectral_efficiency});
  }
  return out;
}

void Bearer::mark_harq_scheduled(std::uint64_t harq_id) {
  auto it = harq_.find(harq_id);
  if (it == harq_.end()) throw StructuralError(fmt::format("unknown HARQ process {}", harq_id));
  it->second.scheduled = true;
}

TransportBlock Bearer::take_harq(std::uint64_t harq_id) {
  auto it = harq_.find(harq_id);
  if (it == harq_.end()) throw StructuralError(fmt::format("unknown HARQ process {}", harq_id));
  TransportBlock tb = std::move(it->second.tb);
  harq_.erase(it);
  return tb;
}

std::optional<TransmittedTb> serve_allocation(Bearer& bearer, const Assignment& assignment,
                                              const LinkModel& model, std::mt19937_64& rng,
                                              std::int64_t subframe) {
  if (assignment.flow != bearer.child()) {
    throw StructuralError(fmt::format("assignment for flow {} served on bearer {}->{}", assignment.flow,
                                      bearer.parent(), bearer.child()));
  }
  TransportBlock tb;
  if (assignment.harq_id) {
    tb = bearer.take_harq(*assignment.harq_id);
  } else {
    const std::int64_t bytes = assignment.tb_bits / 8;
    bearer.consume_granted(bytes);
    auto segments = bearer.tx().pull(bytes);
    if (segments.empty()) return std::nullopt;
    tb.harq_id = bearer.next_harq_id();
    tb.flow = assignment.flow;
    tb.segments = std::move(segments);
    tb.tb_bits = assignment.tb_bits;
    tb.symbols = assignment.symbols;
    tb.spectral_efficiency = assignment.spectral_efficiency;
  }
  ++tb.transmissions;
  tb.last_tx_subframe = subframe;
  const double p = tb_error_prob(model, bearer.link().snr_db, tb.spectral_efficiency);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return TransmittedTb{std::move(tb), u >= p};
}

RouteDecision route_at_node(const RoutingTable& table, TunnelId tunnel) {
  if (auto it = table.local.find(tunnel); it != table.local.end()) return {RouteKind::deliver_local, it->second};
  if (auto it = table.next_hop.find(tunnel); it != table.next_hop.end()) return {RouteKind::forward, it->second};
  throw RoutingError(fmt::format("node {} has no route for tunnel {}", table.owner, tunnel.value));
}

}  // namespace iabsim
