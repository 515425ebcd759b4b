#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmosim/config.hpp"
#include "mmosim/pam.hpp"
#include "mmosim/sam_manager.hpp"
#include "mmosim/workload.hpp"

namespace mmosim {

inline constexpr const char* kVersion = "0.1.0";

struct SimConfig {
  WorldConfig world;
  SamConfig sam;
  PamConfig pam;
  bool sam_enabled{true};
  bool pam_enabled{false};
  // Peers available to the manager: peer_count + peers_per_player * P_max.
  double peers_per_player{0.0};
  std::int64_t windows{400};
  int window_steps{300};
  // The workload (population, mobility, loads) advances once every load_stride steps.
  int load_stride{10};
  std::uint64_t seed{1};
  std::string output_dir{"out"};

  int total_peers() const;
  void validate() const;
  // Every key in `cfg` must be recognised; unknown keys raise ConfigError.
  static SimConfig from_config(const Config& cfg);
};

struct MetricsRow {
  std::int64_t window{0};
  int players{0};
  double cost_per_minute{0.0};
  double gamma_r{0.0};
  double availability{1.0};
  int overloaded_nodes{0};
  int migrations{0};
  double mean_jc{-1.0};
  double mean_ac{-1.0};
  double server_bytes_per_s{0.0};
  int clouds{0};
};

struct Summary {
  std::size_t windows{0};
  double mean_cost_per_minute{0.0};
  double peak_cost_per_minute{0.0};
  double mean_availability{1.0};
  double min_availability{1.0};
  double mean_gamma_r{0.0};
  long total_migrations{0};
  double mean_jc{-1.0};
  double mean_ac{-1.0};
  double mean_server_bytes_per_s{0.0};
  // Windows with at least 80% (peak) or at most 20% (off-peak) of the busiest window's players.
  double peak_cost_per_minute_mean{0.0};
  double offpeak_cost_per_minute_mean{0.0};
  double peak_availability{1.0};
  double offpeak_availability{1.0};
};

struct RunResult {
  std::vector<MetricsRow> rows;
  std::vector<PamStepMetrics> pam_steps;
  std::vector<MigrationRecord> migrations;
  std::vector<EpochLog> epochs;
  Summary summary;
};

RunResult run(const SimConfig& config);

// Throws std::invalid_argument on an empty series.
Summary summarize(std::span<const MetricsRow> rows);

// (a - b) / b, in percent.
double percent_gap(double a, double b);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& r);
std::string pam_csv_header();
std::string pam_csv_row(const PamStepMetrics& m);
std::string summary_text(const Summary& s);

// Writes metrics.csv, pam_steps.csv (when PAM ran), migrations.csv and manifest.txt.
void write_outputs(const std::filesystem::path& dir, const Config& cfg, const SimConfig& config,
                   const RunResult& result);
std::string manifest_text(const Config& cfg, const SimConfig& config);

// `key=v1,v2,...`
struct SweepSpec {
  std::string key;
  std::vector<std::string> values;
};

// Throws ConfigError when malformed.
SweepSpec parse_sweep(std::string_view text);

// Cartesian product of the sweeps, as override lists (one entry per run).
std::vector<std::vector<std::string>> expand_sweeps(std::span<const SweepSpec> sweeps);

// A named scenario: configuration text plus optional sweeps.
struct Preset {
  std::string name;
  std::string description;
  std::string text;
  std::vector<std::string> sweeps;
};

const std::vector<Preset>& presets();
// Throws ConfigError for an unknown name.
const Preset& find_preset(const std::string& name);

}  // namespace mmosim
