#include "iabsim/topology.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

const char* to_string(NodeRole role) {
  switch (role) {
    case NodeRole::donor:
      return "donor";
    case NodeRole::iab:
      return "iab";
    case NodeRole::ue:
      return "ue";
  }
  return "?";
}

const char* to_string(AttachPolicy policy) {
  return policy == AttachPolicy::closest_wired ? "closest_wired" : "best_hqf";
}

IabTree::IabTree(NodeId donor, Position position) : donor_(donor) {
  TopologyNode n;
  n.id = donor;
  n.role = NodeRole::donor;
  n.position = position;
  nodes_.emplace(donor, std::move(n));
}

const TopologyNode& IabTree::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw StructuralError(fmt::format("node {} is not in the tree", id));
  return it->second;
}

TopologyNode& IabTree::node(NodeId id) {
  return const_cast<TopologyNode&>(static_cast<const IabTree&>(*this).node(id));
}

void IabTree::link(NodeId child, NodeId parent) {
  auto& p = node(parent);
  if (!p.is_gnb()) throw StructuralError(fmt::format("node {} is a UE and cannot have children", parent));
  auto pos = std::lower_bound(p.children.begin(), p.children.end(), child);
  p.children.insert(pos, child);
}

void IabTree::add_iab(NodeId id, Position position, NodeId parent) {
  if (contains(id)) throw StructuralError(fmt::format("node {} already in the tree", id));
  TopologyNode n;
  n.id = id;
  n.role = NodeRole::iab;
  n.position = position;
  n.parent = parent;
  link(id, parent);
  nodes_.emplace(id, std::move(n));
}

void IabTree::add_ue(NodeId id, Position position, NodeId parent, TunnelId tunnel, SimTime attach_time) {
  if (contains(id)) throw StructuralError(fmt::format("node {} already in the tree", id));
  TopologyNode n;
  n.id = id;
  n.role = NodeRole::ue;
  n.position = position;
  n.parent = parent;
  n.tunnel = tunnel;
  n.attach_time = attach_time;
  link(id, parent);
  nodes_.emplace(id, std::move(n));
}

std::vector<NodeId> IabTree::gnbs() const {
  std::vector<NodeId> out;
  for (const auto& [id, n] : nodes_)
    if (n.is_gnb()) out.push_back(id);
  return out;
}

std::vector<NodeId> IabTree::iab_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [id, n] : nodes_)
    if (n.role == NodeRole::iab) out.push_back(id);
  return out;
}

std::vector<NodeId> IabTree::ues() const {
  std::vector<NodeId> out;
  for (const auto& [id, n] : nodes_)
    if (n.role == NodeRole::ue) out.push_back(id);
  return out;
}

std::vector<NodeId> IabTree::path_from_donor(NodeId id) const {
  std::vector<NodeId> path;
  std::optional<NodeId> cur = id;
  while (cur) {
    if (path.size() > nodes_.size()) throw StructuralError("cycle in parent links");
    path.push_back(*cur);
    cur = node(*cur).parent;
  }
  if (path.back() != donor_) throw StructuralError(fmt::format("node {} is not connected to the donor", id));
  std::reverse(path.begin(), path.end());
  return path;
}

int IabTree::hops_from_donor(NodeId id) const { return static_cast<int>(path_from_donor(id).size()) - 1; }

void IabTree::validate() const {
  if (!contains(donor_) || node(donor_).parent) throw StructuralError("donor missing or has a parent");
  std::set<NodeId> seen;
  std::vector<NodeId> stack{donor_};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) throw StructuralError(fmt::format("node {} reached twice", id));
    const auto& n = node(id);
    if (n.role == NodeRole::ue && !n.children.empty())
      throw StructuralError(fmt::format("UE {} has children", id));
    for (NodeId c : n.children) {
      if (node(c).parent != id) throw StructuralError(fmt::format("node {} parent mismatch", c));
      stack.push_back(c);
    }
  }
  if (seen.size() != nodes_.size()) throw StructuralError("tree has nodes unreachable from the donor");
}

IabTree attach_iab_nodes(std::span<const GnbSite> sites, const LinkTable& links, AttachPolicy policy,
                         double outage_snr_db) {
  std::vector<GnbSite> donors;
  std::vector<GnbSite> relays;
  for (const auto& s : sites) {
    if (s.role == NodeRole::donor) {
      donors.push_back(s);
    } else if (s.role == NodeRole::iab) {
      relays.push_back(s);
    } else {
      throw ConfigError(fmt::format("node {} is a UE, not a gNB site", s.id));
    }
  }
  if (donors.size() != 1) throw ConfigError(fmt::format("expected one donor, got {}", donors.size()));
  std::sort(relays.begin(), relays.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  const GnbSite& donor = donors.front();
  IabTree tree(donor.id, donor.position);

  auto usable_snr = [&](NodeId a, NodeId b) -> std::optional<double> {
    const LinkState* l = links.find(a, b);
    if (!l || l->snr_db < outage_snr_db) return std::nullopt;
    return l->snr_db;
  };

  if (policy == AttachPolicy::closest_wired) {
    for (const auto& r : relays) {
      if (!usable_snr(donor.id, r.id)) {
        throw StructuralError(fmt::format("IAB node {} has no wired donor above the outage SNR", r.id));
      }
      tree.add_iab(r.id, r.position, donor.id);
    }
    return tree;
  }

  std::vector<GnbSite> attached{donor};
  std::vector<GnbSite> pending = relays;
  while (!pending.empty()) {
    // Best (candidate, parent) pair over everything still unattached:
    // highest SNR, then lower candidate id, then lower parent id.
    std::size_t best_idx = pending.size();
    NodeId best_parent = 0;
    double best_snr = 0.0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      for (const auto& p : attached) {
        const auto snr = usable_snr(p.id, pending[i].id);
        if (!snr) continue;
        bool take = best_idx == pending.size() || *snr > best_snr;
        if (!take && *snr == best_snr) {
          const NodeId cur = pending[best_idx].id;
          take = pending[i].id < cur || (pending[i].id == cur && p.id < best_parent);
        }
        if (take) {
          best_idx = i;
          best_parent = p.id;
          best_snr = *snr;
        }
      }
    }
    if (best_idx == pending.size()) {
      throw StructuralError(
          fmt::format("IAB node {} has no candidate parent above the outage SNR", pending.front().id));
    }
    tree.add_iab(pending[best_idx].id, pending[best_idx].position, best_parent);
    attached.push_back(pending[best_idx]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best_idx));
  }
  return tree;
}

void attach_ues(IabTree& tree, std::span<const UeSite> ues, SimTime attach_delay, std::uint32_t first_tunnel) {
  std::vector<UeSite> sorted(ues.begin(), ues.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const auto gnbs = tree.gnbs();  // ascending id, so strict < keeps the lower id on ties
  std::uint32_t tunnel = first_tunnel;
  for (const auto& ue : sorted) {
    NodeId best = gnbs.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (NodeId g : gnbs) {
      const double d = distance_3d(tree.node(g).position, ue.position);
      if (d < best_d) {
        best_d = d;
        best = g;
      }
    }
    tree.add_ue(ue.id, ue.position, best, TunnelId{tunnel++}, attach_delay);
  }
}

namespace {

int longest_gnb_path(IabTree& tree, NodeId id, std::set<NodeId>& on_stack) {
  if (!on_stack.insert(id).second) throw StructuralError(fmt::format("cycle through node {}", id));
  auto& n = tree.node(id);
  int hops = 0;
  for (NodeId c : n.children) {
    if (!tree.node(c).is_gnb()) continue;
    hops = std::max(hops, 1 + longest_gnb_path(tree, c, on_stack));
  }
  n.max_downstream_hops = hops;
  n.lookahead_depth = hops + 1;
  on_stack.erase(id);
  return hops;
}

int count_ues(const IabTree& tree, NodeId id) {
  const auto& n = tree.node(id);
  if (n.role == NodeRole::ue) return 1;
  int total = 0;
  for (NodeId c : n.children) total += count_ues(tree, c);
  return total;
}

}  // namespace

void compute_lookahead(IabTree& tree) {
  std::set<NodeId> on_stack;
  longest_gnb_path(tree, tree.donor_id(), on_stack);
}

std::map<NodeId, std::map<NodeId, int>> downstream_ue_counts(const IabTree& tree) {
  std::map<NodeId, std::map<NodeId, int>> out;
  for (NodeId g : tree.gnbs()) {
    auto& per_child = out[g];
    for (NodeId c : tree.node(g).children) per_child[c] = count_ues(tree, c);
  }
  return out;
}

std::map<NodeId, RoutingTable> build_routing_tables(const IabTree& tree) {
  std::map<NodeId, RoutingTable> tables;
  for (NodeId g : tree.gnbs()) tables[g].owner = g;
  for (NodeId ue : tree.ues()) {
    const auto& n = tree.node(ue);
    if (!n.tunnel) throw StructuralError(fmt::format("UE {} has no tunnel id", ue));
    const auto path = tree.path_from_donor(ue);  // throws if unreachable
    for (std::size_t i = 0; i + 2 < path.size(); ++i) tables[path[i]].next_hop[*n.tunnel] = path[i + 1];
    tables[path[path.size() - 2]].local[*n.tunnel] = ue;
  }
  return tables;
}

SimTime setup_complete_time(const IabTree& tree, NodeId gnb, SimTime core_latency, SimTime subframe_duration) {
  const int hops = tree.hops_from_donor(gnb);
  if (hops == 0) return SimTime{0};
  return 2 * core_latency + hops * subframe_duration;
}

}  // namespace iabsim
