#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmosim/simharness.hpp"

using namespace mmosim;

namespace {

const char* kSmall = R"([workload]
O_num = 200
P_max = 120
lambda = 6
aoi_radius = 250
[manager]
epoch_steps = 30
[sam]
vs_count = 16
peer_count = 4
[run]
windows = 12
window_steps = 30
load_stride = 5
seed = 4
)";

SimConfig small(const std::string& extra = {}) { return SimConfig::from_config(Config::parse(std::string(kSmall) + extra)); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("summaries of simple series") {
  std::vector<MetricsRow> rows(4);
  for (auto& r : rows) {
    r.cost_per_minute = 2.0;
    r.availability = 0.9;
    r.players = 10;
  }
  const auto s = summarize(rows);
  CHECK(s.mean_cost_per_minute == 2.0);
  CHECK(s.peak_cost_per_minute == 2.0);
  CHECK(s.mean_availability == doctest::Approx(0.9));
  CHECK(s.peak_cost_per_minute_mean == 2.0);
  CHECK_THROWS_AS(summarize({}), std::invalid_argument);
  CHECK(percent_gap(120.0, 100.0) == doctest::Approx(20.0));
}

TEST_CASE("peak and off-peak windows") {
  std::vector<MetricsRow> rows(3);
  rows[0].players = 100;
  rows[0].cost_per_minute = 5.0;
  rows[1].players = 50;
  rows[1].cost_per_minute = 3.0;
  rows[2].players = 10;
  rows[2].cost_per_minute = 1.0;
  rows[2].availability = 0.5;
  const auto s = summarize(rows);
  CHECK(s.peak_cost_per_minute_mean == 5.0);
  CHECK(s.offpeak_cost_per_minute_mean == 1.0);
  CHECK(s.offpeak_availability == 0.5);
}

TEST_CASE("sweep parsing and expansion") {
  const auto s = parse_sweep("pam.T_s=0.25,0.5,1");
  CHECK(s.key == "pam.T_s");
  CHECK(s.values == std::vector<std::string>{"0.25", "0.5", "1"});
  CHECK_THROWS_AS(parse_sweep("novalues="), ConfigError);
  CHECK_THROWS_AS(parse_sweep("a=1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("a=1,"), ConfigError);
  const std::vector<SweepSpec> specs{parse_sweep("a=1,2"), parse_sweep("b=x,y,z")};
  const auto runs = expand_sweeps(specs);
  REQUIRE(runs.size() == 6);
  CHECK(runs[0] == std::vector<std::string>{"a=1", "b=x"});
  CHECK(runs[5] == std::vector<std::string>{"a=2", "b=z"});
  CHECK(expand_sweeps({}).size() == 1);
}

TEST_CASE("every preset parses into a valid configuration") {
  for (const auto& p : presets()) {
    CAPTURE(p.name);
    const auto cfg = Config::parse(p.text);
    CHECK_NOTHROW(SimConfig::from_config(cfg));
    std::vector<SweepSpec> specs;
    for (const auto& s : p.sweeps) specs.push_back(parse_sweep(s));
    for (const auto& run : expand_sweeps(specs)) {
      auto c = cfg;
      for (const auto& o : run) c.apply_override(o);
      CHECK_NOTHROW(SimConfig::from_config(c));
    }
  }
  CHECK_THROWS_AS(find_preset("nope"), ConfigError);
  CHECK(find_preset("thesis_workload").sweeps.empty());
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(small("[run]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(small("[run]\nsubsystems = all\n"), ConfigError);
  CHECK_THROWS_AS(small("[workload]\np_hot = 2\n"), ConfigError);
  const auto c = small("[sam]\npeers_per_player = 0.05\n");
  CHECK(c.total_peers() == 4 + 6);
}

TEST_CASE("a run is a pure function of config and seed") {
  const auto c = small();
  const auto a = run(c);
  const auto b = run(c);
  REQUIRE(a.rows.size() == 12);
  std::string ca, cb;
  for (const auto& r : a.rows) ca += metrics_csv_row(r) + "\n";
  for (const auto& r : b.rows) cb += metrics_csv_row(r) + "\n";
  CHECK(ca == cb);
  auto d = c;
  d.seed = 5;
  std::string cd;
  for (const auto& r : run(d).rows) cd += metrics_csv_row(r) + "\n";
  CHECK(cd != ca);
}

TEST_CASE("players follow the season each window") {
  const auto c = small();
  const auto r = run(c);
  // The busiest sample of window w is at most the peak population.
  for (const auto& row : r.rows) {
    CHECK(row.players <= 120);
    CHECK(row.availability >= 0.0);
    CHECK(row.availability <= 1.0);
    CHECK(row.cost_per_minute > 0.0);
  }
  CHECK(r.summary.peak_cost_per_minute >= r.summary.mean_cost_per_minute);
}

TEST_CASE("zero windows give an empty series") {
  auto c = small();
  c.windows = 0;
  const auto r = run(c);
  CHECK(r.rows.empty());
}

TEST_CASE("subsystems do not disturb each other") {
  const auto sam_only = small();
  const auto both = small("[run]\nsubsystems = both\n[pam]\npeers = 30\nsteps = 40\n");
  const auto a = run(sam_only);
  const auto b = run(both);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].cost_per_minute == b.rows[i].cost_per_minute);
    CHECK(a.rows[i].availability == b.rows[i].availability);
  }
  CHECK(!b.pam_steps.empty());

  const auto pam_only = small("[run]\nsubsystems = pam\n[pam]\npeers = 30\n");
  const auto p1 = run(pam_only);
  REQUIRE(p1.pam_steps.size() <= b.pam_steps.size());
  for (std::size_t i = 0; i < p1.pam_steps.size(); ++i) CHECK(p1.pam_steps[i].mean_jc == b.pam_steps[i].mean_jc);
}

TEST_CASE("outputs are written with a manifest") {
  const auto cfg = Config::parse(kSmall);
  const auto c = SimConfig::from_config(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "mmosim_harness_test";
  std::filesystem::remove_all(dir);
  write_outputs(dir, cfg, c, run(c));
  const auto metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind(metrics_csv_header() + "\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "migrations.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "pam_steps.csv"));
  const auto manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find("seed = 4") != std::string::npos);
  CHECK(manifest.find(kVersion) != std::string::npos);
  std::filesystem::remove_all(dir);
}
