#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iabsim/engine.hpp"

namespace iabsim {

struct OutputFormats {
  bool csv = true;
  bool json = false;
  bool plot = false;
};

/// A sweep over relay counts and rates, each cell replicated n_runs times.
struct CampaignSpec {
  std::string name = "custom";
  SimConfig base;
  std::vector<int> relays{4};
  std::vector<double> rates_bps{224e6};
  int n_runs = 1;
  std::filesystem::path out_dir = "results";
  OutputFormats formats;

  void validate() const;
};

/// Known presets: "paper-manhattan" (relays 0..4, 28 and 224 Mbit/s, 50 runs).
CampaignSpec make_preset(const std::string& name);

/// Accepts "224M", "28m", "1.5G", "500k", or a bare number of Mbit/s.
double parse_rate(const std::string& text);

/// Comma-separated list, e.g. "0,1,2" or "28M,224M".
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_rate_list(const std::string& text);

OutputFormats parse_formats(const std::string& text);

/// Flat "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies entries to the spec. Unknown keys and malformed values throw ConfigError.
void apply_key_values(CampaignSpec& spec, const std::map<std::string, std::string>& values);

}  // namespace iabsim
