#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmosim/config.hpp"
#include "mmosim/rng.hpp"
#include "mmosim/vsdht.hpp"

namespace mmosim {

// Per-VS exponential smoothing run by the hosting node.
struct LoadPredictor {
  std::uint32_t vs{0};
  double alpha{0.5};
  double level{0.0};
  double previous_level{0.0};
  double last_sent{0.0};
  double last_sent_slope{0.0};
  bool initialized{false};
};

struct PredictionMessage {
  std::uint32_t vs{0};
  double level{0.0};
  double slope{0.0};  // bytes/s per second
};

// One estimation cycle. A message is produced when nothing was sent yet or
// when the error against the last sent level reaches xi * last_sent.
std::optional<PredictionMessage> update_local_prediction(LoadPredictor& p, double measured, double xi,
                                                         double cycle_seconds);

struct Forecast {
  double level{0.0};
  double slope{0.0};
  bool known{false};
};

// Manager-side store. Returns the number of rejected messages (unknown VS).
std::size_t apply_prediction_updates(std::vector<Forecast>& store, std::span<const PredictionMessage> messages);

struct RiskReport {
  double gamma{0.0};
  double gamma_max{0.0};
  double gamma_r{0.0};
};

// host[v] is a node id (index into nodes) or -1 when unplaced.
using Assignment = std::vector<int>;

RiskReport risk(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> vs_objects,
                double peer_fail_prob);

double load_factor(int node, std::span<const int> host, std::span<const NodeSpec> nodes,
                   std::span<const double> loads);

// Dollars per epoch: bandwidth of every VS at its host plus rent of every
// cloud in `rented` (node ids).
double cost(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> loads,
            double epoch_seconds, std::span<const int> rented);

// Same, renting exactly the clouds that host at least one VS.
double placement_cost(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> loads,
                      double epoch_seconds);

struct ManagerConfig {
  double risk_limit{0.5};
  double lf_up{0.8};
  double lf_bot{0.2};
  int pool_size{5};
  double xi_est{0.05};
  int epoch_steps{300};
  double alpha{0.5};
  double cloud_capacity{12.5e6};
  double cloud_rent_per_hour{0.26};
  double cloud_price_per_gb{0.12};
  double peer_capacity{0.5e6};
  double peer_fail_prob{0.01};

  void validate() const;
  static ManagerConfig from_config(const Config& cfg, const std::string& prefix = "manager.");

  NodeSpec make_cloud(int id, double epoch_seconds) const;
  NodeSpec make_peer(int id) const;
};

// Snapshot the balancing algorithms work on. Indexed by node id / VS index.
struct SystemView {
  std::vector<NodeSpec> nodes;
  std::vector<char> active;
  Assignment host;
  std::vector<double> predicted;
  std::vector<double> slope;
  std::vector<double> current;
  std::vector<double> objects;
  std::vector<char> backed_up;
  // Node holding backups; never a destination and never released.
  int backup_cloud{-1};
  double peer_fail_prob{0.01};

  double predicted_load(int node) const;
  double current_load(int node) const;
};

struct Migration {
  std::uint32_t vs{0};
  int dst{-1};
};

struct EpochPlan {
  std::int64_t epoch{0};
  std::vector<Migration> migrations;
  std::vector<NodeSpec> recruits;
  std::vector<int> releases;
  Assignment projected;
  double projected_risk{0.0};
};

std::vector<std::uint32_t> select_vs(const SystemView& view, double lf_up, double lf_bot, int pool_size, Rng& rng);

EpochPlan select_destination(std::span<const std::uint32_t> pool, const SystemView& view, double risk_limit,
                             double lf_up, double epoch_seconds, const NodeSpec& cloud_template);

struct PlacementInstance {
  std::vector<NodeSpec> nodes;  // node_id == index
  std::vector<double> loads;
  std::vector<double> objects;
  double risk_limit{0.5};
  double peer_fail_prob{0.01};
  double epoch_seconds{60.0};
  double lf_up{0.8};
  // When set, any number of fresh clouds built from this template may be added.
  std::optional<NodeSpec> fresh_cloud;
};

struct PlacementResult {
  bool feasible{false};
  Assignment host;
  std::vector<NodeSpec> nodes;
  double cost{0.0};
};

inline constexpr std::size_t kOptimalMaxVs = 12;
inline constexpr std::size_t kOptimalMaxNodes = 6;

// Exhaustive search: capacity load <= n_cap, relative risk below the limit
// (or zero), rent only on used clouds. Throws std::invalid_argument if too large.
PlacementResult optimal_assignment(const PlacementInstance& inst);

// The balancer applied from scratch with every VS in the pool, in index order.
PlacementResult greedy_assignment(const PlacementInstance& inst, bool allow_peers = true);

struct SamConfig {
  ManagerConfig manager;
  std::uint32_t vs_count{100};
  int peer_count{10};
  double request_prob{0.1};
  int detection_delay_steps{5};
  double sync_seconds{30.0};
  double step_seconds{0.2};
  RttModel rtt{RttModel::lognormal()};
  TcpModel tcp;
  bool failures{true};
};

struct SamStepStats {
  std::uint64_t requests{0};
  std::uint64_t unavailable{0};
  double cost{0.0};
  int overloaded_nodes{0};
  int migrations_started{0};
  int cloud_count{0};
  double gamma_r{0.0};
};

struct EpochLog {
  std::int64_t epoch{0};
  int migrations{0};
  int recruits{0};
  int releases{0};
  double cost{0.0};
  double gamma_r{0.0};
  double availability{1.0};
  int clouds{0};
};

// Hosts the virtual servers on clouds and peers and runs the manager loop.
class SamSystem {
 public:
  SamSystem(SamConfig config, std::span<const EntityDescriptor> entities, Rng rng, Rng failure_rng);

  std::size_t vs_count() const { return servers_.size(); }
  const std::vector<VirtualServer>& servers() const { return servers_; }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  bool node_active(int id) const { return active_[id] != 0; }
  bool node_failed(int id) const { return failed_[id] != 0; }
  const std::vector<EpochLog>& epochs() const { return epoch_log_; }
  const MigrationEngine& migrations() const { return engine_; }
  const BackupMap& backups() const { return backups_; }
  const std::vector<Forecast>& forecasts() const { return store_; }
  int backup_cloud() const { return 0; }
  // entity uid -> VS index
  std::size_t vs_of_entity(std::uint32_t uid) const;

  // Per-VS load (bytes/s) and request demand (sum of AOI counts).
  void set_loads(std::vector<double> loads, std::vector<std::uint64_t> demand);
  SamStepStats step(std::int64_t step);

  // Forces a peer failure at the given step (scripted scenarios).
  void fail_peer(int node, std::int64_t step);
  // Current assignment, with in-flight VSs at their source.
  Assignment assignment() const;
  RiskReport current_risk() const;
  int cloud_count() const;
  // Throws CorruptionError if a VS lacks a host or a peer-hosted VS lacks a backup.
  void check_invariants() const;

 private:
  void run_epoch(std::int64_t epoch, std::int64_t step);
  void apply_plan(const EpochPlan& plan, std::int64_t step);
  void schedule_failures(std::int64_t step);
  void handle_failure(int node, std::int64_t step);
  void refresh_backups(std::int64_t step);
  SystemView make_view() const;
  double epoch_seconds() const { return config_.manager.epoch_steps * config_.step_seconds; }

  SamConfig config_;
  Rng rng_;
  Rng failure_rng_;
  std::vector<VirtualServer> servers_;
  std::vector<std::uint32_t> entity_uids_;
  std::vector<std::uint32_t> entity_vs_;
  std::vector<double> objects_;
  std::vector<NodeSpec> nodes_;
  std::vector<char> active_;
  std::vector<char> failed_;
  std::vector<char> pending_release_;
  std::vector<std::int64_t> promote_at_;  // per node, -1 when not pending
  MigrationEngine engine_;
  BackupMap backups_;
  std::vector<LoadPredictor> predictors_;
  std::vector<Forecast> store_;
  std::vector<PredictionMessage> inbox_;
  std::vector<double> loads_;
  std::vector<std::uint64_t> demand_;
  std::vector<double> epoch_load_sum_;
  std::int64_t epoch_load_samples_{0};
  std::optional<EpochPlan> pending_plan_;
  std::vector<std::pair<std::int64_t, int>> scheduled_failures_;
  std::vector<EpochLog> epoch_log_;
  EpochLog current_epoch_;
  std::uint64_t epoch_requests_{0};
  std::uint64_t epoch_unavailable_{0};
  int started_in_step_{0};
};

}  // namespace mmosim
