#include "iabsim/cli.hpp"

#include <cstdlib>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "iabsim/config.hpp"
#include "iabsim/errors.hpp"
#include "iabsim/report.hpp"

namespace iabsim {

namespace {

unsigned thread_budget() {
  unsigned threads = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("IABSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError(fmt::format("IABSIM_THREADS='{}' is not a positive integer", env));
    threads = static_cast<unsigned>(v);
  }
  return threads;
}

std::string rate_tag(double rate_bps) { return fmt::format("{:g}M", rate_bps / 1e6); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-event simulator for mmWave integrated access and backhaul networks", "iabsim"};
  std::string preset;
  std::string config_file;
  std::string relays;
  std::string rates;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string sched;
  std::string out_dir;
  std::string formats;
  bool quiet = false;
  app.add_option("--preset", preset, "Named campaign (paper-manhattan)");
  app.add_option("--config", config_file, "Flat key = value file; flags override it");
  app.add_option("--relays", relays, "Relay counts, e.g. 4 or 0,1,2,3,4");
  app.add_option("--rate", rates, "Per-UE rates, e.g. 224M or 28M,224M (bare numbers are Mbit/s)");
  app.add_option("--runs", runs, "Independent runs per cell");
  app.add_option("--seed", seed, "Seed of the first run");
  app.add_option("--sched", sched, "Scheduler")->check(CLI::IsMember({"rr", "pf"}));
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--formats", formats, "Comma-separated subset of csv,json,plot");
  app.add_flag("-q,--quiet", quiet, "Do not print the summary table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CampaignSpec spec;
  unsigned threads = 1;
  try {
    std::map<std::string, std::string> file_values;
    if (!config_file.empty()) file_values = read_key_values(config_file);
    if (preset.empty()) {
      if (auto it = file_values.find("preset"); it != file_values.end()) preset = it->second;
    }
    if (!preset.empty()) spec = make_preset(preset);
    apply_key_values(spec, file_values);

    std::map<std::string, std::string> flags;
    if (!relays.empty()) flags["relays"] = relays;
    if (!rates.empty()) flags["rates"] = rates;
    if (runs) flags["runs"] = std::to_string(*runs);
    if (seed) flags["seed"] = std::to_string(*seed);
    if (!sched.empty()) flags["scheduler"] = sched;
    if (!out_dir.empty()) flags["out"] = out_dir;
    if (!formats.empty()) flags["formats"] = formats;
    apply_key_values(spec, flags);
    spec.validate();
    threads = thread_budget();
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::vector<RunResult> all;
    for (double rate : spec.rates_bps) {
      for (int n : spec.relays) {
        SimConfig c = spec.base;
        c.rate_bps = rate;
        c.n_relays = n;
        auto results = run_campaign(c, spec.n_runs, threads);
        for (auto& r : results) {
          if (const auto v = describe_violations(r.checks); !v.empty()) {
            throw Error(fmt::format("invariant violations in run seed={} relays={} rate={}: {}", r.seed, n,
                                    rate_tag(rate), v));
          }
          all.push_back(std::move(r));
        }
      }
    }
    const CampaignSummary summary = aggregate_runs(all);
    if (spec.formats.csv) {
      write_text_file(spec.out_dir / "runs.csv", format_runs_csv(all));
      write_text_file(spec.out_dir / "summary.csv", format_summary_csv(summary));
    }
    if (spec.formats.json) write_text_file(spec.out_dir / "summary.json", format_summary_json(summary));
    if (spec.formats.plot) {
      for (double rate : spec.rates_bps) {
        write_text_file(spec.out_dir / fmt::format("throughput_{}.svg", rate_tag(rate)),
                        format_plot_svg(summary, rate, false));
        write_text_file(spec.out_dir / fmt::format("latency_{}.svg", rate_tag(rate)),
                        format_plot_svg(summary, rate, true));
      }
    }
    if (!quiet) out << format_summary_table(summary);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace iabsim
