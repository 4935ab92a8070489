#include "iabsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include "json.hpp"

#include "iabsim/errors.hpp"

namespace iabsim {

namespace {

std::string num(double v) { return fmt::format("{:.6f}", v); }

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

double mbps(double bps) { return bps / 1e6; }

}  // namespace

std::string format_runs_csv(std::span<const RunResult> results) {
  std::string out =
      "seed,rate_mbps,n_relays,group,ue_count,sum_throughput_mbps,mean_latency_ms,delivered_packets,dropped_packets\n";
  for (const auto& r : results) {
    for (const auto& m : r.metrics) {
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.seed, num(mbps(r.rate_bps)), r.n_relays, to_string(m.group),
                         m.ue_count, num(m.sum_throughput_mbps), opt(m.mean_latency_ms), m.delivered_packets,
                         m.dropped_packets);
    }
  }
  return out;
}

std::string format_summary_csv(const CampaignSummary& summary) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& [key, cell] : summary.cells) {
    if (cell.runs == 0) continue;
    const auto lat = cell.latency_ms ? std::optional(cell.latency_ms->mean) : std::nullopt;
    const auto lat_ci = cell.latency_ms ? std::optional(cell.latency_ms->ci95) : std::nullopt;
    out += fmt::format("{},{},{},{},{},{},{},{}\n", cell.runs, num(mbps(key.rate_bps)), key.n_relays,
                       to_string(key.group), num(cell.throughput_mbps.mean), opt(lat),
                       num(cell.throughput_mbps.ci95), opt(lat_ci));
  }
  return out;
}

std::string format_summary_json(const CampaignSummary& summary) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& [key, cell] : summary.cells) {
    nlohmann::ordered_json j;
    j["rate_mbps"] = mbps(key.rate_bps);
    j["n_relays"] = key.n_relays;
    j["group"] = to_string(key.group);
    j["runs"] = cell.runs;
    if (cell.runs > 0) {
      j["sum_throughput_mbps"] = cell.throughput_mbps.mean;
      j["ci_throughput"] = cell.throughput_mbps.ci95;
    } else {
      j["sum_throughput_mbps"] = nullptr;
      j["ci_throughput"] = nullptr;
    }
    if (cell.latency_ms) {
      j["mean_latency_ms"] = cell.latency_ms->mean;
      j["ci_latency"] = cell.latency_ms->ci95;
    } else {
      j["mean_latency_ms"] = nullptr;
      j["ci_latency"] = nullptr;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::ordered_json root;
  root["cells"] = std::move(cells);
  return root.dump(2) + "\n";
}

std::string format_plot_svg(const CampaignSummary& summary, double rate_bps, bool latency) {
  constexpr double kW = 640;
  constexpr double kH = 420;
  constexpr double kLeft = 70;
  constexpr double kRight = 150;
  constexpr double kTop = 40;
  constexpr double kBottom = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};

  struct Point {
    int x;
    double y;
  };
  std::vector<Point> series[3];
  std::set<int> xs;
  double y_max = 0;
  for (const auto& [key, cell] : summary.cells) {
    if (key.rate_bps != rate_bps) continue;
    xs.insert(key.n_relays);
    std::optional<double> y;
    if (latency && cell.latency_ms) y = cell.latency_ms->mean;
    if (!latency && cell.runs > 0) y = cell.throughput_mbps.mean;
    if (!y) continue;
    series[static_cast<int>(key.group)].push_back({key.n_relays, *y});
    y_max = std::max(y_max, *y);
  }
  if (xs.empty()) throw Error(fmt::format("no results for rate {} Mbit/s", mbps(rate_bps)));
  const int x_lo = *xs.begin();
  const int x_hi = std::max(*xs.rbegin(), x_lo + 1);
  y_max = y_max > 0 ? y_max * 1.1 : 1.0;

  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - y / y_max * (kH - kTop - kBottom); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n",
      kW, kH);
  svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kW, kH);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{} at R = {} Mbit/s</text>\n",
                     (kW - kRight + kLeft) / 2, latency ? "Average end-to-end latency" : "Sum end-to-end throughput",
                     fmt::format("{:g}", mbps(rate_bps)));
  svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", kLeft,
                     kH - kBottom, kW - kRight);
  svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", kLeft,
                     kTop, kH - kBottom);
  for (int x : xs) {
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", px(x), kH - kBottom + 18, x);
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = y_max * i / 5;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.0f}</text>\n", kLeft - 6, py(y) + 4, y);
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", kLeft,
                       py(y), kW - kRight, py(y));
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">Number of IAB nodes</text>\n",
                     (kW - kRight + kLeft) / 2, kH - 12);
  svg += fmt::format("<text transform=\"translate(18,{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     (kH - kBottom + kTop) / 2, latency ? "Latency [ms]" : "Throughput [Mbit/s]");

  const char* labels[] = {"Donor gNB UEs", "IAB node UEs", "All UEs"};
  for (int g = 0; g < 3; ++g) {
    const auto& pts = series[g];
    if (!pts.empty()) {
      std::string path;
      for (const auto& p : pts) path += fmt::format("{}{:.1f},{:.1f}", path.empty() ? "" : " ", px(p.x), py(p.y));
      svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colors[g], path);
      for (const auto& p : pts)
        svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px(p.x), py(p.y), colors[g]);
    }
    const double ly = kTop + 20 + g * 20;
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       kW - kRight + 12, ly, kW - kRight + 32, colors[g]);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", kW - kRight + 38, ly + 4, labels[g]);
  }
  svg += "</svg>\n";
  return svg;
}

std::string format_summary_table(const CampaignSummary& summary) {
  std::string out = fmt::format("{:>9} {:>7} {:<10} {:>5} {:>18} {:>18}\n", "rate", "relays", "group", "runs",
                                "throughput Mbit/s", "latency ms");
  for (const auto& [key, cell] : summary.cells) {
    if (cell.runs == 0) continue;
    const std::string lat =
        cell.latency_ms ? fmt::format("{:.2f} ± {:.2f}", cell.latency_ms->mean, cell.latency_ms->ci95) : "-";
    out += fmt::format("{:>9} {:>7} {:<10} {:>5} {:>18} {:>18}\n", fmt::format("{:g}M", mbps(key.rate_bps)),
                       key.n_relays, to_string(key.group), cell.runs,
                       fmt::format("{:.1f} ± {:.1f}", cell.throughput_mbps.mean, cell.throughput_mbps.ci95), lat);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace iabsim
