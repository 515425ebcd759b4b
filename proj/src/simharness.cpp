#include "mmosim/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mmosim {

int SimConfig::total_peers() const {
  return sam.peer_count + static_cast<int>(std::lround(peers_per_player * world.max_players));
}

void SimConfig::validate() const {
  world.validate();
  if (!sam_enabled && !pam_enabled) throw ConfigError("at least one of SAM and PAM must be enabled");
  if (sam_enabled) {
    sam.manager.validate();
    if (sam.vs_count < 1) throw ConfigError("vs_count must be at least 1");
    if (sam.peer_count < 0) throw ConfigError("peer_count must be nonnegative");
    if (peers_per_player < 0.0) throw ConfigError("peers_per_player must be nonnegative");
    if (sam.request_prob < 0.0 || sam.request_prob > 1.0) throw ConfigError("request_prob must lie in [0, 1]");
  }
  if (pam_enabled) pam.validate();
  if (windows < 0) throw ConfigError("windows must be nonnegative");
  if (window_steps < 1) throw ConfigError("window_steps must be at least 1");
  if (load_stride < 1) throw ConfigError("load_stride must be at least 1");
}

SimConfig SimConfig::from_config(const Config& cfg) {
  SimConfig c;
  c.world = WorldConfig::from_config(cfg, "workload.");
  c.sam.manager = ManagerConfig::from_config(cfg, "manager.");
  c.sam.step_seconds = c.world.step_seconds;
  c.sam.vs_count = static_cast<std::uint32_t>(cfg.get_int("sam.vs_count", c.sam.vs_count));
  c.sam.peer_count = static_cast<int>(cfg.get_int("sam.peer_count", c.sam.peer_count));
  c.peers_per_player = cfg.get_double("sam.peers_per_player", c.peers_per_player);
  c.sam.request_prob = cfg.get_double("sam.request_prob", c.sam.request_prob);
  c.sam.detection_delay_steps = static_cast<int>(cfg.get_int("sam.detection_delay_steps", c.sam.detection_delay_steps));
  c.sam.sync_seconds = cfg.get_double("sam.sync_seconds", c.sam.sync_seconds);
  c.sam.failures = cfg.get_bool("sam.failures", c.sam.failures);
  const double loss = cfg.get_double("sam.loss_prob", RttModel::kDefaultLoss);
  const std::string rtt_file = cfg.get_string("sam.rtt_file", "");
  if (!rtt_file.empty()) {
    try {
      c.sam.rtt = RttModel::from_file(rtt_file, loss);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("sam.rtt_file: ") + e.what());
    }
  } else {
    c.sam.rtt = RttModel::lognormal(cfg.get_double("sam.rtt_mu", RttModel::kDefaultMu),
                                    cfg.get_double("sam.rtt_sigma", RttModel::kDefaultSigma), loss);
  }
  c.sam.tcp.mss = static_cast<std::uint32_t>(cfg.get_int("sam.mss", c.sam.tcp.mss));
  c.sam.tcp.initial_window = static_cast<std::uint32_t>(cfg.get_int("sam.initial_window", c.sam.tcp.initial_window));
  c.sam.tcp.uplink_bytes_per_sec = cfg.get_double("sam.uplink_bytes_per_sec", c.sam.tcp.uplink_bytes_per_sec);

  c.pam = PamConfig::from_config(cfg);

  const std::string subsystems = cfg.get_string("run.subsystems", "sam");
  if (subsystems == "sam") {
    c.sam_enabled = true;
    c.pam_enabled = false;
  } else if (subsystems == "pam") {
    c.sam_enabled = false;
    c.pam_enabled = true;
  } else if (subsystems == "both") {
    c.sam_enabled = c.pam_enabled = true;
  } else {
    throw ConfigError("run.subsystems must be sam, pam or both, got '" + subsystems + "'");
  }
  c.windows = cfg.get_int("run.windows", c.windows);
  c.window_steps = static_cast<int>(cfg.get_int("run.window_steps", c.window_steps));
  c.load_stride = static_cast<int>(cfg.get_int("run.load_stride", c.load_stride));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", static_cast<std::int64_t>(c.seed)));
  c.output_dir = cfg.get_string("run.output_dir", c.output_dir);

  const auto unused = cfg.unused_keys();
  if (!unused.empty()) {
    std::string msg = "unknown configuration key";
    msg += unused.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unused.size(); ++i) msg += (i ? ", " : "") + unused[i];
    throw ConfigError(msg);
  }
  c.validate();
  return c;
}

namespace {

struct WindowAccumulator {
  double cost{0.0};
  double gamma_sum{0.0};
  std::uint64_t requests{0};
  std::uint64_t unavailable{0};
  int overloaded_max{0};
  int migrations{0};
  int clouds{0};
  std::int64_t sam_steps{0};
  double jc_sum{0.0};
  std::int64_t jc_n{0};
  double ac_sum{0.0};
  std::int64_t ac_n{0};
  double server_bytes{0.0};
  std::int64_t server_steps{0};
  int players{0};
  std::int64_t events{0};
};

// Per-VS broadcast load and request demand from the current population.
void vs_loads(const SamSystem& sam, const WorkloadSimulator& wl, std::int64_t step, std::vector<double>& loads,
              std::vector<std::uint64_t>& demand) {
  const auto& cfg = wl.config();
  const auto sample = compute_load(wl.objects(), wl.avatars(), cfg.aoi_radius, cfg.message_length, step);
  std::fill(loads.begin(), loads.end(), 0.0);
  std::fill(demand.begin(), demand.end(), 0);
  const double per_client = static_cast<double>(cfg.message_length) / cfg.step_seconds;
  for (std::size_t i = 0; i < sample.uids.size(); ++i) {
    const auto v = sam.vs_of_entity(sample.uids[i]);
    loads[v] += sample.aoi_counts[i] * per_client;
    demand[v] += sample.aoi_counts[i];
  }
}

}  // namespace

RunResult run(const SimConfig& config) {
  config.validate();
  RunResult out;
  const Rng master(config.seed);

  std::optional<WorkloadSimulator> wl;
  std::optional<SamSystem> sam;
  std::optional<PamSimulation> pam;
  std::vector<double> loads;
  std::vector<std::uint64_t> demand;

  if (config.sam_enabled) {
    WorldConfig wc = config.world;
    wl.emplace(wc, master.child("workload"));
    SamConfig sc = config.sam;
    sc.step_seconds = config.world.step_seconds;
    sc.peer_count = config.total_peers();
    sam.emplace(sc, wl->objects(), master.child("sam"), master.child("failures"));
    loads.assign(sam->vs_count(), 0.0);
    demand.assign(sam->vs_count(), 0);
  }
  if (config.pam_enabled) pam.emplace(config.pam, master.child("pam"));

  // Clock in microseconds so that the SAM and PAM cadences interleave exactly.
  const auto us = [](double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e6)); };
  const std::int64_t sam_dt = us(config.world.step_seconds);
  const std::int64_t pam_dt = us(config.pam.step_seconds);
  const std::int64_t window_us = sam_dt * config.window_steps;
  const std::int64_t horizon = config.sam_enabled ? config.windows * window_us : config.pam.steps * pam_dt;
  const double window_seconds = static_cast<double>(window_us) / 1e6;

  WindowAccumulator acc;
  std::int64_t window = 0;
  std::int64_t sam_step = 0;
  std::int64_t pam_step = 0;
  auto flush = [&](std::int64_t w, double seconds) {
    MetricsRow row;
    row.window = w;
    row.players = acc.players;
    row.cost_per_minute = acc.cost * 60.0 / seconds;
    row.gamma_r = acc.sam_steps ? acc.gamma_sum / static_cast<double>(acc.sam_steps) : 0.0;
    row.availability = acc.requests ? 1.0 - static_cast<double>(acc.unavailable) / acc.requests : 1.0;
    row.overloaded_nodes = acc.overloaded_max;
    row.migrations = acc.migrations;
    row.mean_jc = acc.jc_n ? acc.jc_sum / static_cast<double>(acc.jc_n) : -1.0;
    row.mean_ac = acc.ac_n ? acc.ac_sum / static_cast<double>(acc.ac_n) : -1.0;
    row.server_bytes_per_s =
        acc.server_steps ? acc.server_bytes / (static_cast<double>(acc.server_steps) * config.pam.step_seconds) : 0.0;
    row.clouds = acc.clouds;
    out.rows.push_back(row);
    acc = WindowAccumulator{};
  };

  std::int64_t now = 0;
  while (true) {
    const std::int64_t next_sam = config.sam_enabled ? sam_step * sam_dt : horizon;
    const std::int64_t next_pam = config.pam_enabled ? pam_step * pam_dt : horizon;
    now = std::min(next_sam, next_pam);
    if (now >= horizon) break;
    while (now >= (window + 1) * window_us) flush(window++, window_seconds);

    if (config.sam_enabled && now == next_sam) {
      if (sam_step % config.load_stride == 0) {
        const double t = static_cast<double>(sam_step) / config.window_steps;
        const int target = config.world.seasonal ? player_count(t, config.world.lambda, config.world.max_players)
                                                 : config.world.max_players;
        if (sam_step > 0) wl->step();
        wl->set_population(static_cast<std::size_t>(target));
        vs_loads(*sam, *wl, sam_step, loads, demand);
        sam->set_loads(loads, demand);
      }
      const auto st = sam->step(sam_step);
      acc.cost += st.cost;
      acc.gamma_sum += st.gamma_r;
      acc.requests += st.requests;
      acc.unavailable += st.unavailable;
      acc.overloaded_max = std::max(acc.overloaded_max, st.overloaded_nodes);
      acc.migrations += st.migrations_started;
      acc.clouds = st.cloud_count;
      acc.players = std::max(acc.players, static_cast<int>(wl->avatars().size()));
      ++acc.sam_steps;
      ++acc.events;
      ++sam_step;
    }
    if (config.pam_enabled && now == next_pam) {
      const auto m = pam->step();
      if (m.step > config.pam.warmup_steps) {
        acc.jc_sum += m.mean_jc;
        ++acc.jc_n;
        if (m.mean_ac >= 0.0) {
          acc.ac_sum += m.mean_ac;
          ++acc.ac_n;
        }
        acc.server_bytes += static_cast<double>(m.server_bytes);
        ++acc.server_steps;
      }
      if (!config.sam_enabled) acc.players = config.pam.peers;
      out.pam_steps.push_back(m);
      ++acc.events;
      ++pam_step;
    }
  }
  if (acc.events > 0) {
    // The last window may be partial.
    const auto tail_us = std::min(horizon, (window + 1) * window_us) - window * window_us;
    flush(window, static_cast<double>(tail_us) / 1e6);
  }

  if (sam) {
    out.migrations = sam->migrations().log();
    out.epochs = sam->epochs();
  }
  if (!out.rows.empty()) out.summary = summarize(out.rows);
  return out;
}

Summary summarize(std::span<const MetricsRow> rows) {
  if (rows.empty()) throw std::invalid_argument("cannot summarise an empty series");
  Summary s;
  s.windows = rows.size();
  int busiest = 0;
  for (const auto& r : rows) busiest = std::max(busiest, r.players);
  double jc = 0.0, ac = 0.0;
  int njc = 0, nac = 0;
  double peak_cost = 0.0, off_cost = 0.0;
  double peak_av = 0.0, off_av = 0.0;
  int npeak = 0, noff = 0;
  s.mean_availability = 0.0;
  s.min_availability = 1.0;
  for (const auto& r : rows) {
    s.mean_cost_per_minute += r.cost_per_minute;
    s.peak_cost_per_minute = std::max(s.peak_cost_per_minute, r.cost_per_minute);
    s.mean_availability += r.availability;
    s.min_availability = std::min(s.min_availability, r.availability);
    s.mean_gamma_r += r.gamma_r;
    s.total_migrations += r.migrations;
    s.mean_server_bytes_per_s += r.server_bytes_per_s;
    if (r.mean_jc >= 0.0) {
      jc += r.mean_jc;
      ++njc;
    }
    if (r.mean_ac >= 0.0) {
      ac += r.mean_ac;
      ++nac;
    }
    if (r.players >= 0.8 * busiest) {
      peak_cost += r.cost_per_minute;
      peak_av += r.availability;
      ++npeak;
    }
    if (r.players <= 0.2 * busiest) {
      off_cost += r.cost_per_minute;
      off_av += r.availability;
      ++noff;
    }
  }
  const auto n = static_cast<double>(rows.size());
  s.mean_cost_per_minute /= n;
  s.mean_availability /= n;
  s.mean_gamma_r /= n;
  s.mean_server_bytes_per_s /= n;
  s.mean_jc = njc ? jc / njc : -1.0;
  s.mean_ac = nac ? ac / nac : -1.0;
  s.peak_cost_per_minute_mean = npeak ? peak_cost / npeak : 0.0;
  s.peak_availability = npeak ? peak_av / npeak : 1.0;
  s.offpeak_cost_per_minute_mean = noff ? off_cost / noff : 0.0;
  s.offpeak_availability = noff ? off_av / noff : 1.0;
  return s;
}

double percent_gap(double a, double b) {
  if (b == 0.0) throw std::invalid_argument("percent gap against zero");
  return 100.0 * (a - b) / b;
}

std::string metrics_csv_header() {
  return "window,players,cost_per_minute,gamma_r,availability,overloaded_nodes,migrations,mean_jc,mean_ac,"
         "server_bytes_per_s,clouds";
}

std::string metrics_csv_row(const MetricsRow& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.window << ',' << r.players << ',' << r.cost_per_minute << ',' << r.gamma_r << ','
     << r.availability << ',' << r.overloaded_nodes << ',' << r.migrations << ',' << r.mean_jc << ',' << r.mean_ac
     << ',' << r.server_bytes_per_s << ',' << r.clouds;
  return os.str();
}

std::string pam_csv_header() { return "step,mean_jc,mean_ac,server_bytes,overlay_msgs"; }

std::string pam_csv_row(const PamStepMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(10) << m.step << ',' << m.mean_jc << ',' << m.mean_ac << ',' << m.server_bytes << ','
     << m.overlay_msgs;
  return os.str();
}

std::string summary_text(const Summary& s) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "windows = " << s.windows << '\n'
     << "mean_cost_per_minute = " << s.mean_cost_per_minute << '\n'
     << "peak_cost_per_minute = " << s.peak_cost_per_minute << '\n'
     << "peak_window_cost_per_minute = " << s.peak_cost_per_minute_mean << '\n'
     << "offpeak_window_cost_per_minute = " << s.offpeak_cost_per_minute_mean << '\n'
     << "mean_availability = " << s.mean_availability << '\n'
     << "min_availability = " << s.min_availability << '\n'
     << "peak_availability = " << s.peak_availability << '\n'
     << "offpeak_availability = " << s.offpeak_availability << '\n'
     << "mean_gamma_r = " << s.mean_gamma_r << '\n'
     << "total_migrations = " << s.total_migrations << '\n'
     << "mean_jc = " << s.mean_jc << '\n'
     << "mean_ac = " << s.mean_ac << '\n'
     << "mean_server_bytes_per_s = " << s.mean_server_bytes_per_s << '\n';
  return os.str();
}

std::string manifest_text(const Config& cfg, const SimConfig& config) {
  std::ostringstream os;
  os << "mmosim_version = " << kVersion << '\n';
  os << "compiler = " << __VERSION__ << '\n';
  os << "cxx_standard = " << __cplusplus << '\n';
  os << "config_hash = " << std::hex << std::setw(16) << std::setfill('0') << cfg.content_hash() << std::dec << '\n';
  os << "seed = " << config.seed << '\n';
  os << "subsystems = " << (config.sam_enabled && config.pam_enabled ? "both" : config.sam_enabled ? "sam" : "pam")
     << '\n';
  return os.str();
}

void write_outputs(const std::filesystem::path& dir, const Config& cfg, const SimConfig& config,
                   const RunResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("metrics.csv");
    f << metrics_csv_header() << '\n';
    for (const auto& r : result.rows) f << metrics_csv_row(r) << '\n';
  }
  if (config.pam_enabled) {
    auto f = open("pam_steps.csv");
    f << pam_csv_header() << '\n';
    for (const auto& m : result.pam_steps) f << pam_csv_row(m) << '\n';
  }
  if (config.sam_enabled) {
    auto f = open("migrations.csv");
    f << migration_csv_header() << '\n';
    for (const auto& m : result.migrations) f << migration_csv_row(m) << '\n';
  }
  {
    auto f = open("summary.txt");
    if (!result.rows.empty()) f << summary_text(result.summary);
  }
  {
    auto f = open("manifest.txt");
    f << manifest_text(cfg, config);
    f << "\n# effective configuration\n" << cfg.to_string();
  }
}

}  // namespace mmosim
