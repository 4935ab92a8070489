#include "iabsim/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "iabsim/errors.hpp"

namespace iabsim {

void CampaignSpec::validate() const {
  if (relays.empty()) throw ConfigError("relay sweep is empty");
  if (rates_bps.empty()) throw ConfigError("rate sweep is empty");
  if (n_runs < 1) throw ConfigError("runs must be at least 1");
  for (int n : relays) {
    SimConfig c = base;
    c.n_relays = n;
    for (double r : rates_bps) {
      c.rate_bps = r;
      c.validate();
    }
  }
}

CampaignSpec make_preset(const std::string& name) {
  if (name == "paper-manhattan") {
    CampaignSpec spec;
    spec.name = name;
    spec.relays = {0, 1, 2, 3, 4};
    spec.rates_bps = {28e6, 224e6};
    spec.n_runs = 50;
    // At 30 dBm nearly every donor link already sits at the peak spectral
    // efficiency, which leaves relays nothing to improve.
    spec.base.radio.base.tx_power_dbm = 20.0;
    return spec;
  }
  throw ConfigError(fmt::format("unknown preset '{}'", name));
}

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (item.empty()) throw ConfigError(fmt::format("empty item in '{}'", text));
    out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  return v;
}

int to_int32(const std::string& key, const std::string& text) {
  const long long v = to_int(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(fmt::format("{}: {} is out of range", key, v));
  return static_cast<int>(v);
}

SimTime millis(const std::string& key, const std::string& text) {
  return from_seconds(to_double(key, text) * 1e-3);
}

SimTime seconds(const std::string& key, const std::string& text) { return from_seconds(to_double(key, text)); }

}  // namespace

double parse_rate(const std::string& raw) {
  std::string text = trim(raw);
  if (text.empty()) throw ConfigError("empty rate");
  double scale = 1e6;
  switch (text.back()) {
    case 'k': case 'K': scale = 1e3; text.pop_back(); break;
    case 'm': case 'M': scale = 1e6; text.pop_back(); break;
    case 'g': case 'G': scale = 1e9; text.pop_back(); break;
    default: break;
  }
  const double v = to_double("rate", text) * scale;
  if (!(v > 0)) throw ConfigError(fmt::format("rate '{}' must be positive", raw));
  return v;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) out.push_back(to_int32("list", item));
  if (out.empty()) throw ConfigError(fmt::format("empty list '{}'", text));
  return out;
}

std::vector<double> parse_rate_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_rate(item));
  if (out.empty()) throw ConfigError(fmt::format("empty list '{}'", text));
  return out;
}

OutputFormats parse_formats(const std::string& text) {
  OutputFormats f{false, false, false};
  for (const auto& item : split(text, ',')) {
    if (item == "csv") {
      f.csv = true;
    } else if (item == "json") {
      f.json = true;
    } else if (item == "plot") {
      f.plot = true;
    } else {
      throw ConfigError(fmt::format("unknown output format '{}'", item));
    }
  }
  return f;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_key_values(CampaignSpec& spec, const std::map<std::string, std::string>& values) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  SimConfig& c = spec.base;
  const std::map<std::string, Setter> setters = {
      {"relays", [&](auto&, auto& v) { spec.relays = parse_int_list(v); }},
      {"rates", [&](auto&, auto& v) { spec.rates_bps = parse_rate_list(v); }},
      {"runs", [&](auto& k, auto& v) { spec.n_runs = to_int32(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"out", [&](auto&, auto& v) { spec.out_dir = v; }},
      {"formats", [&](auto&, auto& v) { spec.formats = parse_formats(v); }},
      {"n_ues", [&](auto& k, auto& v) { c.n_ues = to_int32(k, v); }},
      {"packet_size", [&](auto& k, auto& v) { c.packet_size = static_cast<std::uint32_t>(to_int32(k, v)); }},
      {"sim_duration_s", [&](auto& k, auto& v) { c.sim_duration = seconds(k, v); }},
      {"attach_delay_s", [&](auto& k, auto& v) { c.attach_delay = seconds(k, v); }},
      {"warmup_s", [&](auto& k, auto& v) { c.warmup = seconds(k, v); }},
      {"attach_policy",
       [&](auto& k, auto& v) {
         if (v == "closest_wired") {
           c.attach_policy = AttachPolicy::closest_wired;
         } else if (v == "best_hqf") {
           c.attach_policy = AttachPolicy::best_hqf;
         } else {
           throw ConfigError(fmt::format("{}: unknown policy '{}'", k, v));
         }
       }},
      {"scheduler",
       [&](auto& k, auto& v) {
         if (v == "rr") {
           c.mac.scheduler_kind = SchedulerKind::rr;
         } else if (v == "pf") {
           c.mac.scheduler_kind = SchedulerKind::pf;
         } else {
           throw ConfigError(fmt::format("{}: unknown scheduler '{}'", k, v));
         }
       }},
      {"symbols_per_subframe", [&](auto& k, auto& v) { c.mac.symbols_per_subframe = to_int32(k, v); }},
      {"subframe_ms", [&](auto& k, auto& v) { c.mac.subframe_duration = millis(k, v); }},
      {"dci_delay", [&](auto& k, auto& v) { c.mac.dci_delay = to_int32(k, v); }},
      {"iab_cap_fraction", [&](auto& k, auto& v) { c.mac.iab_cap_fraction = to_double(k, v); }},
      {"pf_window", [&](auto& k, auto& v) { c.mac.pf_window = to_int32(k, v); }},
      {"carrier_ghz", [&](auto& k, auto& v) { c.radio.base.carrier_freq_ghz = to_double(k, v); }},
      {"bandwidth_hz", [&](auto& k, auto& v) { c.radio.base.bandwidth_hz = to_double(k, v); }},
      {"tx_power_dbm", [&](auto& k, auto& v) { c.radio.base.tx_power_dbm = to_double(k, v); }},
      {"gnb_gain_dbi", [&](auto& k, auto& v) { c.radio.gnb_gain_dbi = to_double(k, v); }},
      {"ue_gain_dbi", [&](auto& k, auto& v) { c.radio.ue_gain_dbi = to_double(k, v); }},
      {"noise_figure_db", [&](auto& k, auto& v) { c.radio.base.noise_figure_db = to_double(k, v); }},
      {"max_phy_rate_bps", [&](auto& k, auto& v) { c.radio.base.max_phy_rate_bps = to_double(k, v); }},
      {"shannon_alpha", [&](auto& k, auto& v) { c.radio.model.shannon_alpha = to_double(k, v); }},
      {"snr_min_db", [&](auto& k, auto& v) { c.radio.model.snr_min_db = to_double(k, v); }},
      {"bler_target", [&](auto& k, auto& v) { c.radio.model.bler_target = to_double(k, v); }},
      {"bler_db_per_decade", [&](auto& k, auto& v) { c.radio.model.bler_db_per_decade = to_double(k, v); }},
      {"shadowing_los_db", [&](auto& k, auto& v) { c.radio.model.shadowing_los_db = to_double(k, v); }},
      {"shadowing_nlos_db", [&](auto& k, auto& v) { c.radio.model.shadowing_nlos_db = to_double(k, v); }},
      {"block_side_m", [&](auto& k, auto& v) { c.geometry.block_side = to_double(k, v); }},
      {"street_width_m", [&](auto& k, auto& v) { c.geometry.street_width = to_double(k, v); }},
      {"grid_rows", [&](auto& k, auto& v) { c.geometry.rows = to_int32(k, v); }},
      {"grid_cols", [&](auto& k, auto& v) { c.geometry.cols = to_int32(k, v); }},
      {"building_height_m", [&](auto& k, auto& v) { c.geometry.building_height = to_double(k, v); }},
      {"relay_distance_m", [&](auto& k, auto& v) { c.geometry.relay_distance = to_double(k, v); }},
      {"gnb_height_m", [&](auto& k, auto& v) { c.geometry.heights.gnb = to_double(k, v); }},
      {"ue_height_m", [&](auto& k, auto& v) { c.geometry.heights.ue = to_double(k, v); }},
      {"ue_buffer_bytes", [&](auto& k, auto& v) { c.stack.ue_buffer_bytes = to_int(k, v); }},
      {"iab_buffer_bytes", [&](auto& k, auto& v) { c.stack.iab_buffer_bytes = to_int(k, v); }},
      {"reordering_timer_ms", [&](auto& k, auto& v) { c.stack.reordering_timer = millis(k, v); }},
      {"max_harq_retx", [&](auto& k, auto& v) { c.stack.max_harq_retx = to_int32(k, v); }},
      {"harq_retx_delay", [&](auto& k, auto& v) { c.stack.harq_retx_delay = to_int32(k, v); }},
      {"tunnel_overhead_bytes",
       [&](auto& k, auto& v) { c.stack.tunnel_overhead_bytes = static_cast<std::uint32_t>(to_int32(k, v)); }},
      {"core_latency_ms", [&](auto& k, auto& v) { c.core.server_to_donor_latency = millis(k, v); }},
      {"audit_interval", [&](auto& k, auto& v) { c.audit_interval = to_int32(k, v); }},
  };
  for (const auto& [key, value] : values) {
    if (key == "preset") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    it->second(key, value);
  }
}

}  // namespace iabsim
