#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "iabsim/cli.hpp"
#include "iabsim/config.hpp"
#include "iabsim/errors.hpp"
#include "iabsim/report.hpp"
#include "json.hpp"

using namespace iabsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("iabsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "iabsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunResult fake_run(std::uint64_t seed, int relays, double rate, double donor_tp, std::optional<double> iab_tp) {
  RunResult r;
  r.seed = seed;
  r.n_relays = relays;
  r.rate_bps = rate;
  GroupMetrics donor{UeGroup::donor_ues, 20, donor_tp, 100.0};
  double total = donor_tp;
  int ues = 20;
  r.metrics.push_back(donor);
  if (iab_tp) {
    r.metrics.push_back(GroupMetrics{UeGroup::iab_ues, 20, *iab_tp, 200.0});
    total += *iab_tp;
    ues += 20;
  }
  r.metrics.insert(r.metrics.begin(), GroupMetrics{UeGroup::all_ues, ues, total, 150.0});
  return r;
}

}  // namespace

TEST_CASE("rate parsing") {
  CHECK(parse_rate("224M") == 224e6);
  CHECK(parse_rate("28m") == 28e6);
  CHECK(parse_rate("1.5G") == 1.5e9);
  CHECK(parse_rate("500k") == 500e3);
  CHECK(parse_rate("28") == 28e6);
  CHECK_THROWS_AS(parse_rate(""), ConfigError);
  CHECK_THROWS_AS(parse_rate("fast"), ConfigError);
  CHECK_THROWS_AS(parse_rate("-3M"), ConfigError);
  CHECK_THROWS_AS(parse_rate("3X"), ConfigError);
}

TEST_CASE("list and format parsing") {
  CHECK(parse_int_list("0,1,2,3,4") == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(parse_int_list(" 4 ") == std::vector<int>{4});
  CHECK(parse_rate_list("28M,224M") == std::vector<double>{28e6, 224e6});
  CHECK_THROWS_AS(parse_int_list("1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_int_list("one"), ConfigError);
  const auto f = parse_formats("json,plot");
  CHECK_FALSE(f.csv);
  CHECK(f.json);
  CHECK(f.plot);
  CHECK_THROWS_AS(parse_formats("csv,xml"), ConfigError);
}

TEST_CASE("key-value files") {
  const auto kv = parse_key_values("# comment\nrelays = 0,4\n\n  rate=28M  # trailing\nruns = 3\n");
  CHECK(kv.at("relays") == "0,4");
  CHECK(kv.at("rate") == "28M");
  CHECK(kv.at("runs") == "3");
  CHECK(kv.size() == 3);
  CHECK_THROWS_AS(parse_key_values("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(read_key_values("/nonexistent/iabsim.conf"), ConfigError);
}

TEST_CASE("applying key-values") {
  CampaignSpec spec;
  apply_key_values(spec, {{"relays", "0,2"}, {"rates", "28M"}, {"runs", "5"}, {"seed", "11"},
                          {"scheduler", "pf"}, {"tx_power_dbm", "23.5"}, {"sim_duration_s", "2.5"}});
  CHECK(spec.relays == std::vector<int>{0, 2});
  CHECK(spec.rates_bps == std::vector<double>{28e6});
  CHECK(spec.n_runs == 5);
  CHECK(spec.base.seed == 11);
  CHECK(spec.base.mac.scheduler_kind == SchedulerKind::pf);
  CHECK(spec.base.radio.base.tx_power_dbm == 23.5);
  CHECK(spec.base.sim_duration == std::chrono::milliseconds(2500));
  CHECK_THROWS_AS(apply_key_values(spec, {{"relay", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_key_values(spec, {{"runs", "many"}}), ConfigError);
  CHECK_THROWS_AS(apply_key_values(spec, {{"scheduler", "fifo"}}), ConfigError);
}

TEST_CASE("paper preset grid") {
  const CampaignSpec p = make_preset("paper-manhattan");
  CHECK(p.relays == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(p.rates_bps == std::vector<double>{28e6, 224e6});
  CHECK(p.n_runs == 50);
  CHECK(p.base.n_ues == 40);
  CHECK(p.base.mac.symbols_per_subframe == 24);
  CHECK(p.base.mac.scheduler_kind == SchedulerKind::rr);
  CHECK(p.base.sim_duration - p.base.window_start() == std::chrono::seconds(10));
  CHECK_NOTHROW(p.validate());
  CHECK_THROWS_AS(make_preset("nope"), ConfigError);
  CampaignSpec bad = p;
  bad.relays = {5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("summary outputs") {
  std::vector<RunResult> runs{fake_run(1, 0, 28e6, 500, std::nullopt), fake_run(2, 0, 28e6, 520, std::nullopt),
                              fake_run(1, 4, 28e6, 300, 250), fake_run(2, 4, 28e6, 310, 260)};
  const CampaignSummary s = aggregate_runs(runs);

  const auto csv = lines_of(format_summary_csv(s));
  REQUIRE(!csv.empty());
  CHECK(csv[0] == kSummaryCsvHeader);
  CHECK(csv.size() == 1 + 2 + 3);  // no IAB row without relays
  for (const auto& l : csv) CHECK(l.find("0,iab_ues") == std::string::npos);
  CHECK(csv[1].rfind("2,28.000000,0,", 0) == 0);

  const auto runs_csv = lines_of(format_runs_csv(runs));
  CHECK(runs_csv[0] == "seed,rate_mbps,n_relays,group,ue_count,sum_throughput_mbps,mean_latency_ms,"
                       "delivered_packets,dropped_packets");
  CHECK(runs_csv.size() == 1 + 2 + 2 + 3 + 3);

  const auto j = nlohmann::json::parse(format_summary_json(s));
  REQUIRE(j.contains("cells"));
  CHECK(j["cells"].size() == 6);
  int nulls = 0;
  for (const auto& c : j["cells"])
    if (c["sum_throughput_mbps"].is_null()) ++nulls;
  CHECK(nulls == 1);

  const std::string svg = format_plot_svg(s, 28e6, false);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(format_summary_table(s).find("donor_ues") != std::string::npos);
}

TEST_CASE("cli exit codes and outputs") {
  const fs::path dir = scratch_dir("cli");
  const fs::path conf = dir / "short.conf";
  {
    std::ofstream f(conf);
    f << "sim_duration_s = 0.9\nwarmup_s = 0.2\nn_ues = 8\n";
  }
  std::string out;
  std::string err;
  CHECK(cli({"--config", conf.string(), "--relays", "0", "--rate", "28M", "--runs", "1", "--out",
             (dir / "a").string(), "--formats", "csv,json,plot"},
            &out, &err) == 0);
  INFO(err);
  const auto summary = lines_of(slurp(dir / "a" / "summary.csv"));
  CHECK(summary.size() == 3);  // header, all, donor
  CHECK(slurp(dir / "a" / "summary.csv").find("iab_ues") == std::string::npos);
  CHECK(fs::exists(dir / "a" / "runs.csv"));
  CHECK(fs::exists(dir / "a" / "summary.json"));
  CHECK(fs::exists(dir / "a" / "throughput_28M.svg"));
  CHECK(fs::exists(dir / "a" / "latency_28M.svg"));
  CHECK(out.find("donor_ues") != std::string::npos);

  CHECK(cli({"--config", conf.string(), "--relays", "1", "--rate", "28M", "--runs", "1", "-q", "--out",
             (dir / "b").string()},
            &out) == 0);
  CHECK(out.empty());
  CHECK(slurp(dir / "b" / "summary.csv").find("iab_ues") != std::string::npos);

  CHECK(cli({"--relays", "9", "--out", (dir / "c").string()}, nullptr, &err) == 2);
  CHECK_FALSE(err.empty());
  CHECK(cli({"--rate", "fast"}, nullptr, &err) == 2);
  CHECK(cli({"--preset", "unknown"}, nullptr, &err) == 2);
  CHECK(cli({"--config", (dir / "missing.conf").string()}, nullptr, &err) == 2);
  CHECK(cli({"--sched", "fifo"}, nullptr, &err) == 2);
  CHECK(cli({"--bogus"}, nullptr, &err) == 2);
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(out.find("--relays") != std::string::npos);
  fs::remove_all(dir);
}
