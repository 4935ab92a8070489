#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iabsim/engine.hpp"
#include "iabsim/metrics.hpp"

namespace iabsim {

inline constexpr const char* kSummaryCsvHeader =
    "runs,rate_mbps,n_relays,group,sum_throughput_mbps,mean_latency_ms,ci_throughput,ci_latency";

/// One row per (run, group present in the run).
std::string format_runs_csv(std::span<const RunResult> results);

/// One row per cell that had UEs in at least one run.
std::string format_summary_csv(const CampaignSummary& summary);

/// Every cell, with null statistics where a group had no UEs.
std::string format_summary_json(const CampaignSummary& summary);

/// Line plot of one metric against the relay count, one series per group.
std::string format_plot_svg(const CampaignSummary& summary, double rate_bps, bool latency);

/// Fixed-width table for the terminal.
std::string format_summary_table(const CampaignSummary& summary);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace iabsim
