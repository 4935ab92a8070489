#pragma once

#include <map>
#include <utility>

#include "iabsim/types.hpp"

namespace iabsim {

/// Link budget for one transmitter/receiver pairing.
struct ChannelConfig {
  double carrier_freq_ghz = 28.0;
  double bandwidth_hz = 1e9;
  double tx_power_dbm = 30.0;
  double tx_gain_dbi = 18.0;
  double rx_gain_dbi = 12.0;
  double noise_figure_db = 5.0;
  double max_phy_rate_bps = 3.2e9;

  double max_spectral_efficiency() const { return max_phy_rate_bps / bandwidth_hz; }
  void validate() const;
};

/// Rate, outage, error-rate and shadowing abstraction shared by all links.
struct LinkModel {
  double shannon_alpha = 0.75;
  double snr_min_db = -5.0;
  double bler_target = 0.1;
  double bler_db_per_decade = 1.0;
  double shadowing_los_db = 4.0;
  double shadowing_nlos_db = 7.8;

  void validate() const;
};

/// Radio parameters of a deployment. gNB and UE arrays differ in gain, so the
/// per-link ChannelConfig is derived from the receiver type.
struct RadioConfig {
  ChannelConfig base;
  double gnb_gain_dbi = 18.0;
  double ue_gain_dbi = 12.0;
  LinkModel model;

  ChannelConfig downlink(bool rx_is_ue) const;
};

/// Urban-micro street-canyon path loss in dB; distances below 1 m clamp to 1 m.
double path_loss_db(double carrier_freq_ghz, double distance_m, bool los);

double noise_power_dbm(const ChannelConfig& config);

double compute_snr(const ChannelConfig& config, double distance_m, bool los, double shadowing_db);

struct LinkAdaptation {
  double spectral_efficiency = 0.0;  // bits/s/Hz, 0 in outage
  double per_symbol_capacity = 0.0;  // bits
};

LinkAdaptation link_adapt(const ChannelConfig& config, const LinkModel& model, double snr_db,
                          int symbols_per_subframe, SimTime subframe_duration);

/// SNR at which link_adapt would pick `spectral_efficiency` without the cap.
double required_snr_db(const LinkModel& model, double spectral_efficiency);

/// First-transmission transport block error probability. Equals the target
/// BLER at the SNR where `spectral_efficiency` would be selected and falls by
/// one decade per `bler_db_per_decade` of margin.
double tb_error_prob(const LinkModel& model, double snr_db, double spectral_efficiency);

struct LinkState {
  NodeId a = 0;  // transmitter (parent side)
  NodeId b = 0;  // receiver
  double distance_3d = 0.0;
  bool los = false;
  double shadowing_db = 0.0;
  double snr_db = 0.0;
  double spectral_efficiency = 0.0;
  double per_symbol_capacity = 0.0;

  bool in_outage() const { return per_symbol_capacity <= 0.0; }
};

/// Link states keyed by unordered node pair.
class LinkTable {
 public:
  void insert(const LinkState& link);
  const LinkState* find(NodeId a, NodeId b) const;
  const LinkState& at(NodeId a, NodeId b) const;
  std::size_t size() const { return links_.size(); }

 private:
  static std::pair<NodeId, NodeId> key(NodeId a, NodeId b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }
  std::map<std::pair<NodeId, NodeId>, LinkState> links_;
};

}  // namespace iabsim
