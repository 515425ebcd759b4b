#include "mmosim/vsdht.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmosim/config.hpp"

namespace mmosim {

const char* to_string(NodeKind k) { return k == NodeKind::Cloud ? "cloud" : "peer"; }

void NodeSpec::validate() const {
  if (!(capacity > 0.0)) throw std::invalid_argument("node capacity must be positive");
  if (fail_prob < 0.0 || fail_prob > 1.0) throw std::invalid_argument("fail_prob must lie in [0, 1]");
  if (is_cloud() && fail_prob != 0.0) throw std::invalid_argument("cloud nodes never fail");
  if (is_peer() && (bandwidth_cost != 0.0 || rent_cost != 0.0)) {
    throw std::invalid_argument("peer resources carry no bandwidth or rent cost");
  }
}

std::uint32_t routing_table_length(std::uint64_t n) {
  if (n <= 1) return 0;
  return static_cast<std::uint32_t>(std::bit_width(n - 1));
}

std::vector<VirtualServer> partition_ring(std::uint32_t vs_count) {
  if (vs_count == 0) throw std::invalid_argument("partition_ring needs at least one virtual server");
  std::vector<VirtualServer> out(vs_count);
  for (std::uint32_t i = 0; i < vs_count; ++i) {
    out[i].index = i;
    out[i].range.start = DhtId::fraction(i, vs_count);
    out[i].range.end = DhtId::fraction(i + 1ULL, vs_count);
    out[i].vs_id = out[i].range.start;
  }
  build_routing_tables(out);
  return out;
}

std::size_t lookup_index(const DhtId& id, std::span<const VirtualServer> servers) {
  auto it = std::upper_bound(servers.begin(), servers.end(), id,
                             [](const DhtId& v, const VirtualServer& s) { return v < s.range.start; });
  if (it == servers.begin()) return servers.size() - 1;  // wraps to the last arc
  return static_cast<std::size_t>(it - servers.begin()) - 1;
}

const VirtualServer& lookup(const DhtId& id, std::span<const VirtualServer> servers) {
  return servers[lookup_index(id, servers)];
}

void assign_entities(std::span<VirtualServer> servers, std::span<const EntityDescriptor> entities) {
  for (auto& s : servers) s.entities.clear();
  for (const auto& e : entities) servers[lookup_index(e.dht_id, servers)].entities.push_back(e.uid);
}

void build_routing_tables(std::span<VirtualServer> servers) {
  const auto n = servers.size();
  const auto len = routing_table_length(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& table = servers[i].routing_table;
    table.clear();
    for (std::uint32_t k = 0; k < len; ++k) {
      const auto& target = servers[(i + (std::size_t{1} << k)) % n];
      table.push_back({target.vs_id, static_cast<std::uint32_t>(std::max(target.host, 0))});
    }
  }
}

std::uint64_t vs_size_bytes(std::uint64_t entities, std::uint64_t access_entries, std::uint64_t vs_total) {
  return kEntityDescriptorBytes * entities + kAccessEntryBytes * access_entries +
         kRoutingEntryBytes * routing_table_length(vs_total);
}

std::uint64_t vs_size_bytes(const VirtualServer& vs, std::uint64_t vs_total) {
  return vs_size_bytes(vs.entities.size(), vs.access_list.size(), vs_total);
}

RttModel RttModel::lognormal(double mu, double sigma, double loss_prob) {
  if (!(sigma > 0.0)) throw ConfigError("log-normal sigma must be positive");
  if (!(loss_prob >= 0.0 && loss_prob < 1.0)) throw ConfigError("loss probability must lie in [0, 1)");
  RttModel m;
  m.mu_ = mu;
  m.sigma_ = sigma;
  m.loss_prob_ = loss_prob;
  return m;
}

RttModel RttModel::empirical(std::vector<double> samples_ms, double loss_prob) {
  if (samples_ms.empty()) throw ConfigError("RTT sample set is empty");
  for (double v : samples_ms) {
    if (!(v > 0.0)) throw ConfigError("RTT samples must be positive");
  }
  if (!(loss_prob >= 0.0 && loss_prob < 1.0)) throw ConfigError("loss probability must lie in [0, 1)");
  RttModel m;
  m.samples_ = std::move(samples_ms);
  m.loss_prob_ = loss_prob;
  return m;
}

RttModel RttModel::from_file(const std::filesystem::path& path, double loss_prob) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open RTT file: " + path.string());
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double ms;
    if (ss >> ms) v.push_back(ms);
  }
  return empirical(std::move(v), loss_prob);
}

double RttModel::sample_ms(Rng& rng) const {
  if (!samples_.empty()) return samples_[rng.index(samples_.size())];
  return std::exp(rng.normal(mu_, sigma_));
}

std::uint32_t slow_start_rounds(std::uint64_t payload_bytes, const TcpModel& tcp) {
  if (payload_bytes == 0) return 0;
  const std::uint64_t segments = (payload_bytes + tcp.mss - 1) / tcp.mss;
  std::uint64_t sent = 0;
  std::uint64_t window = std::max<std::uint32_t>(tcp.initial_window, 1);
  std::uint32_t rounds = 0;
  while (sent < segments) {
    sent += window;
    window *= 2;
    ++rounds;
  }
  return rounds;
}

double migration_time_for_rtt(std::uint64_t payload_bytes, double rtt_seconds, double loss_prob,
                              const TcpModel& tcp) {
  double t = 1.5 * rtt_seconds;
  if (payload_bytes == 0) return t;
  t += slow_start_rounds(payload_bytes, tcp) * rtt_seconds / (1.0 - loss_prob);
  if (tcp.uplink_bytes_per_sec > 0.0) t += static_cast<double>(payload_bytes) / tcp.uplink_bytes_per_sec;
  return t;
}

double sample_migration_time(std::uint64_t payload_bytes, const RttModel& rtt, Rng& rng, const TcpModel& tcp) {
  return migration_time_for_rtt(payload_bytes, rtt.sample_ms(rng) / 1000.0, rtt.loss_prob(), tcp);
}

MigrationEngine::MigrationEngine(RttModel rtt, TcpModel tcp, double step_seconds, std::uint64_t vs_total)
    : rtt_(std::move(rtt)), tcp_(tcp), step_seconds_(step_seconds), vs_total_(vs_total) {}

MigrationRecord MigrationEngine::start(VirtualServer& vs, int dst, std::int64_t step, Rng& rng) {
  MigrationRecord r;
  r.vs = vs.index;
  r.vs_id = vs.vs_id;
  r.src = vs.host;
  r.dst = dst;
  r.payload_bytes = vs_size_bytes(vs, vs_total_);
  r.step_started = step;
  r.step_completed = step;
  if (dst == vs.host) {
    log_.push_back(r);
    return r;
  }
  r.mt_seconds = sample_migration_time(r.payload_bytes, rtt_, rng, tcp_);
  const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r.mt_seconds / step_seconds_)));
  r.step_completed = step + steps;
  active_[vs.index] = r;
  return r;
}

std::vector<MigrationRecord> MigrationEngine::advance(std::span<VirtualServer> servers, std::int64_t step) {
  std::vector<MigrationRecord> done;
  for (auto it = active_.begin(); it != active_.end();) {
    if (it->second.step_completed <= step) {
      auto& vs = servers[it->first];
      vs.host = it->second.dst;
      vs.backed_up = false;
      done.push_back(it->second);
      log_.push_back(it->second);
      it = active_.erase(it);
    } else {
      ++it;
    }
  }
  return done;
}

std::vector<MigrationRecord> MigrationEngine::abort_to(int failed_node) {
  std::vector<MigrationRecord> out;
  for (auto it = active_.begin(); it != active_.end();) {
    if (it->second.dst == failed_node) {
      it->second.aborted = true;
      out.push_back(it->second);
      log_.push_back(it->second);
      it = active_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::vector<MigrationRecord> MigrationEngine::abort_from(int failed_node) {
  std::vector<MigrationRecord> out;
  for (auto it = active_.begin(); it != active_.end();) {
    if (it->second.src == failed_node) {
      it->second.aborted = true;
      out.push_back(it->second);
      log_.push_back(it->second);
      it = active_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::optional<int> MigrationEngine::pending_destination(std::uint32_t vs) const {
  auto it = active_.find(vs);
  if (it == active_.end()) return std::nullopt;
  return it->second.dst;
}

MigrationRecord migrate_vs(VirtualServer& vs, const NodeSpec& src, const NodeSpec& dst, std::int64_t step,
                           double step_seconds, std::uint64_t vs_total, const RttModel& rtt, Rng& rng,
                           const TcpModel& tcp) {
  if (vs.host != src.node_id) throw std::invalid_argument("virtual server is not hosted on the source node");
  MigrationRecord r;
  r.vs = vs.index;
  r.vs_id = vs.vs_id;
  r.src = src.node_id;
  r.dst = dst.node_id;
  r.payload_bytes = vs_size_bytes(vs, vs_total);
  r.step_started = r.step_completed = step;
  if (src.node_id == dst.node_id) return r;
  r.mt_seconds = sample_migration_time(r.payload_bytes, rtt, rng, tcp);
  r.step_completed =
      step + std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r.mt_seconds / step_seconds)));
  vs.host = dst.node_id;
  vs.backed_up = false;
  return r;
}

void BackupMap::ensure(std::uint32_t vs, int cloud, std::uint64_t version, std::int64_t step) {
  auto it = map_.find(vs);
  if (it == map_.end()) map_[vs] = {cloud, version, step};
}

void BackupMap::sync(std::span<const VirtualServer> servers, std::int64_t step) {
  for (auto& [vs, snap] : map_) {
    snap.state_version = servers[vs].state_version;
    snap.synced_step = step;
  }
}

std::vector<HostReassignment> promote_backup(const NodeSpec& failed_peer, std::span<VirtualServer> servers,
                                             BackupMap& backups) {
  if (!failed_peer.is_peer()) throw std::invalid_argument("cloud nodes do not fail");
  std::vector<HostReassignment> out;
  for (auto& vs : servers) {
    if (vs.host != failed_peer.node_id) continue;
    if (!backups.has(vs.index)) {
      throw CorruptionError("virtual server " + std::to_string(vs.index) + " on peer " +
                            std::to_string(failed_peer.node_id) + " has no backup");
    }
    const auto snap = backups.at(vs.index);
    out.push_back({vs.index, vs.host, snap.cloud, snap.state_version, snap.synced_step});
    vs.host = snap.cloud;
    vs.state_version = snap.state_version;
    vs.backed_up = true;
    backups.erase(vs.index);
  }
  return out;
}

std::string migration_csv_header() { return "step_started,vs_id,src,dst,bytes,mt_seconds"; }

std::string migration_csv_row(const MigrationRecord& r) {
  std::ostringstream os;
  os.precision(6);
  os << r.step_started << ',' << r.vs_id.hex() << ',' << r.src << ',' << r.dst << ',' << r.payload_bytes << ','
     << std::fixed << r.mt_seconds;
  return os.str();
}

}  // namespace mmosim
