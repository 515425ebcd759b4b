#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "mmosim/simharness.hpp"

namespace mmosim {

SweepSpec parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("sweep must look like key=v1,v2,... (got '" + std::string(text) + "')");
  }
  SweepSpec s;
  s.key = std::string(text.substr(0, eq));
  std::string_view rest = text.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    if (item.empty()) throw ConfigError("empty value in sweep '" + std::string(text) + "'");
    s.values.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
    if (rest.empty()) throw ConfigError("trailing comma in sweep '" + std::string(text) + "'");
  }
  return s;
}

std::vector<std::vector<std::string>> expand_sweeps(std::span<const SweepSpec> sweeps) {
  std::vector<std::vector<std::string>> runs{{}};
  for (const auto& s : sweeps) {
    if (s.values.empty()) throw ConfigError("sweep '" + s.key + "' has no values");
    std::vector<std::vector<std::string>> next;
    next.reserve(runs.size() * s.values.size());
    for (const auto& base : runs) {
      for (const auto& v : s.values) {
        auto r = base;
        r.push_back(s.key + "=" + v);
        next.push_back(std::move(r));
      }
    }
    runs = std::move(next);
  }
  return runs;
}

namespace {

constexpr const char* kSamBase = R"([workload]
width = 5000
height = 5000
H_num = 5
p_hot = 0.3
p_den = 0.8
p_obj = 0.7
O_num = 1000
P_max = 1000
lambda = 200
seasonal = true
M_len = 100
delta_t = 0.2
aoi_radius = 250

[manager]
risk_limit = 0.1
LF_up = 0.8
LF_bot = 0.2
P_size = 5
xi_est = 0.05
epoch_steps = 300
peer_capacity = 2e6
peer_fail_prob = 0.01

[sam]
vs_count = 100
peer_count = 0
peers_per_player = 0.0015

[run]
subsystems = sam
windows = 400
window_steps = 300
load_stride = 10
seed = 1
)";

constexpr const char* kPamBase = R"([pam]
peers = 500
O_num = 1000
width = 1000
height = 1000
aoi_radius = 30
speed = 5
step_seconds = 0.25
T_s = 1
overlay = true
d = 10
stale_threshold = 20
heuristic = greedy
resolution = 32
steps = 120
warmup_steps = 40
ac_every = 4

[run]
subsystems = pam
seed = 1
)";

constexpr const char* kPeak2000 = "\n[workload]\nP_max = 2000\n";

std::string with(const char* base, const std::string& extra = {}) { return std::string(base) + extra; }

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"thesis_workload", "SAM on the seasonal hotspot workload, 1000 players, 100 VSs, risk 0.1",
       with(kSamBase), {}},
      {"thesis_cost_risk", "Cost per minute against the risk limit at 2000 players, three seeds",
       with(kSamBase, kPeak2000),
       {"manager.risk_limit=0.1,0.5,0.9", "run.seed=1,2,3"}},
      {"thesis_players", "Cost against peak population for the loosest and tightest risk limits",
       with(kSamBase), {"workload.P_max=1000,2000,4000,6000,8000,10000", "manager.risk_limit=0.1,0.9"}},
      {"thesis_xi", "Availability and cost against the prediction error threshold at 2000 players",
       with(kSamBase, kPeak2000),
       {"manager.xi_est=0.05,1.0"}},
      {"pam_heuristics", "JC and AC against the server update period for both heuristics", with(kPamBase),
       {"pam.T_s=1,1.5,2,2.5,3", "pam.heuristic=score,greedy"}},
      {"pam_server_only", "JC against the server update period without the overlay",
       with(kPamBase, "\n[pam]\noverlay = false\n"), {"pam.T_s=1,1.5,2,2.5,3"}},
      {"pam_tiles", "AC against the tile resolution for both heuristics", with(kPamBase),
       {"pam.resolution=8,16,32,48,64", "pam.heuristic=score,greedy"}},
      {"pam_bandwidth", "Server upload rate for 1000 clients without the overlay",
       with(kPamBase, "\n[pam]\npeers = 1000\naoi_radius = 40\noverlay = false\nsteps = 160\nac_every = 1000000\n"),
       {"pam.T_s=0.25,1"}},
  };
  return all;
}

const Preset& find_preset(const std::string& name) {
  const auto& all = presets();
  auto it = std::find_if(all.begin(), all.end(), [&](const Preset& p) { return p.name == name; });
  if (it == all.end()) throw ConfigError("unknown preset '" + name + "'");
  return *it;
}

}  // namespace mmosim
