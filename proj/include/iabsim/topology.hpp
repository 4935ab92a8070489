#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/geometry.hpp"
#include "iabsim/types.hpp"

namespace iabsim {

enum class NodeRole { donor, iab, ue };

const char* to_string(NodeRole role);

struct TopologyNode {
  NodeId id = 0;
  NodeRole role = NodeRole::ue;
  Position position;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // ascending id
  int lookahead_depth = 1;       // eta, subframes
  int max_downstream_hops = 0;   // N
  std::optional<TunnelId> tunnel;
  SimTime attach_time{0};

  bool is_gnb() const { return role != NodeRole::ue; }
};

/// Scheduling tree rooted at the single wired donor. Nodes can only be added
/// under an existing gNB, so the structure stays acyclic.
class IabTree {
 public:
  IabTree() = default;
  explicit IabTree(NodeId donor, Position position = {});

  NodeId donor_id() const { return donor_; }
  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const TopologyNode& node(NodeId id) const;
  TopologyNode& node(NodeId id);
  const std::map<NodeId, TopologyNode>& nodes() const { return nodes_; }

  void add_iab(NodeId id, Position position, NodeId parent);
  void add_ue(NodeId id, Position position, NodeId parent, TunnelId tunnel, SimTime attach_time);

  std::vector<NodeId> gnbs() const;
  std::vector<NodeId> iab_nodes() const;
  std::vector<NodeId> ues() const;

  /// Donor first, `id` last.
  std::vector<NodeId> path_from_donor(NodeId id) const;

  /// Wireless hops between the donor and `id`.
  int hops_from_donor(NodeId id) const;

  /// Throws StructuralError unless a DFS from the donor reaches every node
  /// exactly once and parent/child links agree.
  void validate() const;

 private:
  void link(NodeId child, NodeId parent);

  std::map<NodeId, TopologyNode> nodes_;
  NodeId donor_ = 0;
};

enum class AttachPolicy { closest_wired, best_hqf };

const char* to_string(AttachPolicy policy);

struct GnbSite {
  NodeId id = 0;
  NodeRole role = NodeRole::iab;
  Position position;
};

struct UeSite {
  NodeId id = 0;
  Position position;
};

/// Builds the gNB part of the tree. With best_hqf, nodes join one at a time:
/// the unattached node whose best link to an already attached gNB is strongest
/// goes next and takes that gNB as parent. Ties go to the lower id.
IabTree attach_iab_nodes(std::span<const GnbSite> sites, const LinkTable& links, AttachPolicy policy,
                         double outage_snr_db);

/// Each UE joins its geometrically closest gNB and gets the next tunnel id.
void attach_ues(IabTree& tree, std::span<const UeSite> ues, SimTime attach_delay,
                std::uint32_t first_tunnel = 1);

/// Fills N (longest downstream gNB path) and eta = N + 1 for every gNB.
void compute_lookahead(IabTree& tree);

/// gNB -> child -> number of UEs reached through that child's bearer.
std::map<NodeId, std::map<NodeId, int>> downstream_ue_counts(const IabTree& tree);

struct RoutingTable {
  NodeId owner = 0;
  std::map<TunnelId, NodeId> next_hop;  // forwarded to an IAB child
  std::map<TunnelId, NodeId> local;     // terminated here, value is the UE
};

std::map<NodeId, RoutingTable> build_routing_tables(const IabTree& tree);

/// Time at which a gNB's backhaul bearer is usable: a request/response
/// exchange with the core plus one subframe per wireless hop.
SimTime setup_complete_time(const IabTree& tree, NodeId gnb, SimTime core_latency,
                            SimTime subframe_duration);

}  // namespace iabsim
