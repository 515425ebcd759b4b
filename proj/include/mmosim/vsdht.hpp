#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmosim/dht_id.hpp"
#include "mmosim/entity.hpp"
#include "mmosim/rng.hpp"

namespace mmosim {

// Half-open arc [start, end) of the ring; start == end is the whole ring.
struct DhtRange {
  DhtId start;
  DhtId end;

  bool contains(const DhtId& id) const {
    if (start == end) return true;
    if (start < end) return start <= id && id < end;
    return id >= start || id < end;
  }
};

enum class NodeKind : std::uint8_t { Cloud, Peer };

const char* to_string(NodeKind k);

struct NodeSpec {
  int node_id{0};
  NodeKind kind{NodeKind::Cloud};
  double capacity{0.0};        // bytes per second
  double bandwidth_cost{0.0};  // dollars per byte
  double rent_cost{0.0};       // dollars per epoch
  double fail_prob{0.0};       // per epoch

  bool is_cloud() const { return kind == NodeKind::Cloud; }
  bool is_peer() const { return kind == NodeKind::Peer; }
  // Throws std::invalid_argument if the kind-specific price/failure rules are broken.
  void validate() const;
};

struct RoutingEntry {
  DhtId id;
  std::uint32_t address{0};
};

struct AccessEntry {
  std::uint32_t client_uid{0};
  std::uint32_t ip{0};
  std::uint32_t port{0};
};

inline constexpr std::uint64_t kAccessEntryBytes = 12;
inline constexpr std::uint64_t kRoutingEntryBytes = 24;

struct VirtualServer {
  std::uint32_t index{0};
  DhtId vs_id;
  DhtRange range;
  std::vector<std::uint32_t> entities;
  std::vector<RoutingEntry> routing_table;
  std::vector<AccessEntry> access_list;
  int host{-1};
  std::uint64_t state_version{0};
  bool backed_up{false};
};

// ceil(log2(n)), zero for n <= 1.
std::uint32_t routing_table_length(std::uint64_t n);

// N equal contiguous ranges; VS i starts at floor(i * 2^160 / N).
std::vector<VirtualServer> partition_ring(std::uint32_t vs_count);

// Index of the VS owning id. The set must come from partition_ring (sorted by start).
std::size_t lookup_index(const DhtId& id, std::span<const VirtualServer> servers);
const VirtualServer& lookup(const DhtId& id, std::span<const VirtualServer> servers);

// Fills entity lists by hashing each descriptor's dht id onto the ring.
void assign_entities(std::span<VirtualServer> servers, std::span<const EntityDescriptor> entities);

// Finger-style table: entry k points at the VS 2^k positions ahead.
void build_routing_tables(std::span<VirtualServer> servers);

std::uint64_t vs_size_bytes(std::uint64_t entities, std::uint64_t access_entries, std::uint64_t vs_total);
std::uint64_t vs_size_bytes(const VirtualServer& vs, std::uint64_t vs_total);

class RttModel {
 public:
  // Log-normal parameters of RTT in milliseconds.
  static constexpr double kDefaultMu = 4.914;
  static constexpr double kDefaultSigma = 0.389;
  static constexpr double kDefaultLoss = 0.001;

  static RttModel lognormal(double mu = kDefaultMu, double sigma = kDefaultSigma,
                            double loss_prob = kDefaultLoss);
  static RttModel empirical(std::vector<double> samples_ms, double loss_prob = kDefaultLoss);
  // One RTT in milliseconds per line; blank lines and `#` comments ignored.
  static RttModel from_file(const std::filesystem::path& path, double loss_prob = kDefaultLoss);

  double sample_ms(Rng& rng) const;
  double loss_prob() const { return loss_prob_; }
  bool is_empirical() const { return !samples_.empty(); }
  std::size_t sample_count() const { return samples_.size(); }

 private:
  double mu_{kDefaultMu};
  double sigma_{kDefaultSigma};
  double loss_prob_{kDefaultLoss};
  std::vector<double> samples_;
};

struct TcpModel {
  std::uint32_t mss{1460};
  std::uint32_t initial_window{2};
  // Sender uplink used for the serialisation term; zero disables it.
  double uplink_bytes_per_sec{512'000.0};
};

// Slow-start rounds needed to deliver payload_bytes (window doubles each round).
std::uint32_t slow_start_rounds(std::uint64_t payload_bytes, const TcpModel& tcp = {});

// Handshake and transfer time, in seconds, for a fixed RTT.
double migration_time_for_rtt(std::uint64_t payload_bytes, double rtt_seconds, double loss_prob,
                              const TcpModel& tcp = {});

double sample_migration_time(std::uint64_t payload_bytes, const RttModel& rtt, Rng& rng,
                             const TcpModel& tcp = {});

struct MigrationRecord {
  std::uint32_t vs{0};
  DhtId vs_id;
  int src{-1};
  int dst{-1};
  std::uint64_t payload_bytes{0};
  double mt_seconds{0.0};
  std::int64_t step_started{0};
  std::int64_t step_completed{0};
  bool aborted{false};
};

// Tracks in-flight migrations. A VS is inaccessible for steps in
// [step_started, step_completed); at completion its host becomes dst.
class MigrationEngine {
 public:
  MigrationEngine(RttModel rtt, TcpModel tcp, double step_seconds, std::uint64_t vs_total);

  MigrationRecord start(VirtualServer& vs, int dst, std::int64_t step, Rng& rng);
  // Completes due migrations; returns those that finished at `step`.
  std::vector<MigrationRecord> advance(std::span<VirtualServer> servers, std::int64_t step);
  // Drops migrations heading to a failed node; the VS stays at its source.
  std::vector<MigrationRecord> abort_to(int failed_node);
  // Drops migrations leaving a failed node.
  std::vector<MigrationRecord> abort_from(int failed_node);

  bool in_flight(std::uint32_t vs) const { return active_.count(vs) != 0; }
  std::optional<int> pending_destination(std::uint32_t vs) const;
  std::size_t active_count() const { return active_.size(); }
  const std::vector<MigrationRecord>& log() const { return log_; }

 private:
  RttModel rtt_;
  TcpModel tcp_;
  double step_seconds_;
  std::uint64_t vs_total_;
  std::map<std::uint32_t, MigrationRecord> active_;
  std::vector<MigrationRecord> log_;
};

// Standalone single-migration form: samples the duration and applies the move at once.
MigrationRecord migrate_vs(VirtualServer& vs, const NodeSpec& src, const NodeSpec& dst, std::int64_t step,
                           double step_seconds, std::uint64_t vs_total, const RttModel& rtt, Rng& rng,
                           const TcpModel& tcp = {});

class CorruptionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct BackupSnapshot {
  int cloud{-1};
  std::uint64_t state_version{0};
  std::int64_t synced_step{0};
};

// Backup replicas of peer-hosted VSs, kept on cloud nodes.
class BackupMap {
 public:
  void ensure(std::uint32_t vs, int cloud, std::uint64_t version, std::int64_t step);
  void erase(std::uint32_t vs) { map_.erase(vs); }
  bool has(std::uint32_t vs) const { return map_.count(vs) != 0; }
  const BackupSnapshot& at(std::uint32_t vs) const { return map_.at(vs); }
  // Refreshes every snapshot from the live primaries.
  void sync(std::span<const VirtualServer> servers, std::int64_t step);
  std::size_t size() const { return map_.size(); }
  const std::map<std::uint32_t, BackupSnapshot>& entries() const { return map_; }

 private:
  std::map<std::uint32_t, BackupSnapshot> map_;
};

struct HostReassignment {
  std::uint32_t vs{0};
  int from{-1};
  int to{-1};
  std::uint64_t restored_version{0};
  std::int64_t snapshot_step{0};
};

// Promotes the backups of every VS hosted on failed_peer. Throws
// std::invalid_argument for a cloud node and CorruptionError for a missing backup.
std::vector<HostReassignment> promote_backup(const NodeSpec& failed_peer, std::span<VirtualServer> servers,
                                             BackupMap& backups);

std::string migration_csv_header();
std::string migration_csv_row(const MigrationRecord& r);

}  // namespace mmosim
