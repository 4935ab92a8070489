#include "iabsim/channel.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

void ChannelConfig::validate() const {
  if (!(bandwidth_hz > 0)) throw ConfigError("bandwidth must be positive");
  if (!(max_phy_rate_bps > 0)) throw ConfigError("max PHY rate must be positive");
  if (!(carrier_freq_ghz > 0)) throw ConfigError("carrier frequency must be positive");
}

void LinkModel::validate() const {
  if (!(shannon_alpha > 0 && shannon_alpha <= 1)) throw ConfigError("shannon_alpha must be in (0, 1]");
  if (!(bler_target > 0 && bler_target < 1)) throw ConfigError("bler_target must be in (0, 1)");
  if (!(bler_db_per_decade > 0)) throw ConfigError("bler_db_per_decade must be positive");
  if (shadowing_los_db < 0 || shadowing_nlos_db < 0) throw ConfigError("shadowing sigma must be >= 0");
}

ChannelConfig RadioConfig::downlink(bool rx_is_ue) const {
  ChannelConfig c = base;
  c.tx_gain_dbi = gnb_gain_dbi;
  c.rx_gain_dbi = rx_is_ue ? ue_gain_dbi : gnb_gain_dbi;
  return c;
}

double path_loss_db(double carrier_freq_ghz, double distance_m, bool los) {
  const double d = std::max(distance_m, 1.0);
  const double exponent = los ? 21.0 : 31.9;
  return 32.4 + exponent * std::log10(d) + 20.0 * std::log10(carrier_freq_ghz);
}

double noise_power_dbm(const ChannelConfig& config) {
  return -174.0 + 10.0 * std::log10(config.bandwidth_hz) + config.noise_figure_db;
}

double compute_snr(const ChannelConfig& config, double distance_m, bool los, double shadowing_db) {
  return config.tx_power_dbm + config.tx_gain_dbi + config.rx_gain_dbi -
         path_loss_db(config.carrier_freq_ghz, distance_m, los) - shadowing_db - noise_power_dbm(config);
}

LinkAdaptation link_adapt(const ChannelConfig& config, const LinkModel& model, double snr_db,
                          int symbols_per_subframe, SimTime subframe_duration) {
  if (snr_db < model.snr_min_db || symbols_per_subframe <= 0) return {};
  const double shannon = model.shannon_alpha * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
  const double se = std::min(shannon, config.max_spectral_efficiency());
  const double capacity =
      se * config.bandwidth_hz * to_seconds(subframe_duration) / symbols_per_subframe;
  return {se, capacity};
}

double required_snr_db(const LinkModel& model, double spectral_efficiency) {
  return 10.0 * std::log10(std::exp2(spectral_efficiency / model.shannon_alpha) - 1.0);
}

double tb_error_prob(const LinkModel& model, double snr_db, double spectral_efficiency) {
  if (!(spectral_efficiency > 0)) return 1.0;
  const double margin = snr_db - required_snr_db(model, spectral_efficiency);
  const double p = model.bler_target * std::pow(10.0, -margin / model.bler_db_per_decade);
  return std::clamp(p, 0.0, 1.0);
}

void LinkTable::insert(const LinkState& link) { links_[key(link.a, link.b)] = link; }

const LinkState* LinkTable::find(NodeId a, NodeId b) const {
  auto it = links_.find(key(a, b));
  return it == links_.end() ? nullptr : &it->second;
}

const LinkState& LinkTable::at(NodeId a, NodeId b) const {
  if (const auto* l = find(a, b)) return *l;
  throw StructuralError(fmt::format("no link state between nodes {} and {}", a, b));
}

}  // namespace iabsim
