#include <algorithm>
#include <cmath>

#include "mmosim/pam.hpp"
#include "mmosim/spatial_index.hpp"

namespace mmosim {

void PamConfig::validate() const {
  world.validate();
  gossip.validate();
  if (peers < 1) throw ConfigError("PAM needs at least one peer");
  if (!(step_seconds > 0.0)) throw ConfigError("PAM step length must be positive");
  if (!(ts >= step_seconds)) throw ConfigError("T_s must be at least one PAM step");
  const double ratio = ts / step_seconds;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("T_s must be a multiple of the PAM step");
  if (steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be nonnegative");
  if (ac_every < 1) throw ConfigError("ac_every must be at least 1");
  if (ac_resolution < 0) throw ConfigError("ac_resolution must be non-negative");
}

PamConfig PamConfig::from_config(const Config& cfg) {
  PamConfig p;
  p.world = WorldConfig::from_config(cfg, "pam.", pam_default_world());
  p.world.seasonal = false;
  p.peers = static_cast<int>(cfg.get_int("pam.peers", p.peers));
  p.world.max_players = p.peers;
  p.step_seconds = cfg.get_double("pam.step_seconds", p.step_seconds);
  p.ts = cfg.get_double("pam.T_s", p.ts);
  p.overlay = cfg.get_bool("pam.overlay", p.overlay);
  p.gossip.d = static_cast<std::size_t>(cfg.get_int("pam.d", static_cast<std::int64_t>(p.gossip.d)));
  p.gossip.random_view =
      static_cast<std::size_t>(cfg.get_int("pam.random_view", static_cast<std::int64_t>(p.gossip.random_view)));
  p.gossip.stale_threshold = cfg.get_int("pam.stale_threshold", p.gossip.stale_threshold);
  p.gossip.random_period = static_cast<int>(cfg.get_int("pam.random_period", p.gossip.random_period));
  p.gossip.coverage_period = static_cast<int>(cfg.get_int("pam.coverage_period", p.gossip.coverage_period));
  p.gossip.heuristic = parse_heuristic(cfg.get_string("pam.heuristic", to_string(p.gossip.heuristic)));
  p.gossip.resolution = static_cast<int>(cfg.get_int("pam.resolution", p.gossip.resolution));
  p.gossip.aoi_radius = p.world.aoi_radius;
  p.message.header_bytes = static_cast<std::uint32_t>(cfg.get_int("pam.header_bytes", p.message.header_bytes));
  p.message.record_bytes = static_cast<std::uint32_t>(cfg.get_int("pam.record_bytes", p.message.record_bytes));
  p.steps = cfg.get_int("pam.steps", p.steps);
  p.warmup_steps = cfg.get_int("pam.warmup_steps", p.warmup_steps);
  p.ac_every = static_cast<int>(cfg.get_int("pam.ac_every", p.ac_every));
  p.ac_exact_limit = cfg.get_double("pam.ac_exact_limit", p.ac_exact_limit);
  p.ac_resolution = static_cast<int>(cfg.get_int("pam.ac_resolution", p.ac_resolution));
  p.validate();
  return p;
}

namespace {

WorldConfig pam_world(const PamConfig& c) {
  WorldConfig w = c.world;
  w.seasonal = false;
  w.max_players = c.peers;
  w.step_seconds = c.step_seconds;
  return w;
}

}  // namespace

PamSimulation::PamSimulation(PamConfig config, Rng rng)
    : config_(std::move(config)), rng_(std::move(rng)), workload_(pam_world(config_), rng_.child("mobility")) {
  config_.gossip.aoi_radius = config_.world.aoi_radius;
  config_.validate();
  const auto n = static_cast<std::size_t>(config_.peers);
  positions_.resize(n);
  sync_positions();
  alive_.assign(n, 1);
  views_.resize(n);
  replicas_.resize(n);
  update_every_ = std::max<std::int64_t>(1, std::llround(config_.ts / config_.step_seconds));
  phase_.resize(n);
  for (auto& ph : phase_) ph = static_cast<int>(rng_.index(static_cast<std::size_t>(update_every_)));
  // Bootstrap: each peer knows a handful of random others.
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto k = std::min<std::size_t>(config_.gossip.random_view, n - 1);
    while (views_[i].random_layer.size() < k) {
      const auto j = static_cast<std::uint32_t>(rng_.index(n));
      if (j == i) continue;
      auto& rl = views_[i].random_layer;
      if (std::none_of(rl.begin(), rl.end(), [&](const PeerDescriptor& d) { return d.peer_id == j; })) {
        rl.push_back({j, positions_[j], 0});
      }
    }
    views_[i].arrivals = views_[i].random_layer;
  }
  // Joining clients receive a full state update.
  const auto state = authoritative();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<ReplicaEntry> entries;
    for (const auto& e : entities_in_aoi(state, Disk{positions_[i], config_.world.aoi_radius}, i)) {
      entries.push_back({e.uid, e.position, 0, ReplicaSource::Server});
    }
    replicas_[i].assign_from_server(std::move(entries), 0, Disk{positions_[i], config_.world.aoi_radius});
  }
}

void PamSimulation::sync_positions() {
  const auto& avatars = workload_.avatars();
  for (std::size_t i = 0; i < positions_.size(); ++i) positions_[i] = avatars[i].position;
}

void PamSimulation::teleport(std::size_t peer, Point to) {
  workload_.teleport(peer, to);
  sync_positions();
}

std::vector<AuthoritativeEntity> PamSimulation::authoritative() const {
  std::vector<AuthoritativeEntity> out;
  out.reserve(positions_.size() + workload_.objects().size());
  for (std::uint32_t i = 0; i < positions_.size(); ++i) out.push_back({i, positions_[i]});
  for (const auto& o : workload_.objects()) out.push_back({o.uid, o.position()});
  return out;
}

namespace {

struct StateIndex {
  std::vector<AuthoritativeEntity> state;
  PointGrid grid;

  StateIndex(std::vector<AuthoritativeEntity> s, double cell) : state(std::move(s)) {
    std::vector<Point> pts;
    pts.reserve(state.size());
    for (const auto& e : state) pts.push_back(e.position);
    grid.rebuild(pts, cell);
  }

  std::vector<AuthoritativeEntity> query(Point c, double r, std::uint32_t self) const {
    std::vector<AuthoritativeEntity> out;
    grid.for_each_in_disk(c, r, [&](std::size_t i) {
      if (state[i].uid != self) out.push_back(state[i]);
    });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.uid < b.uid; });
    return out;
  }
};

}  // namespace

void PamSimulation::server_phase(PamStepMetrics& m) {
  const double r = config_.world.aoi_radius;
  const StateIndex index(authoritative(), r);
  for (std::uint32_t i = 0; i < positions_.size(); ++i) {
    if (!alive_[i] || (step_ + phase_[i]) % update_every_ != 0) continue;
    const auto set = index.query(positions_[i], r, i);
    std::vector<ReplicaEntry> entries;
    entries.reserve(set.size());
    for (const auto& e : set) entries.push_back({e.uid, e.position, step_, ReplicaSource::Server});
    replicas_[i].assign_from_server(std::move(entries), step_, Disk{positions_[i], r});
    m.server_bytes += config_.message.header_bytes + config_.message.record_bytes * set.size();
  }
}

void PamSimulation::overlay_phase(PamStepMetrics& m) {
  GossipNetwork net{views_, positions_, alive_};
  for (std::uint32_t i = 0; i < positions_.size(); ++i) {
    m.overlay_msgs += static_cast<std::uint64_t>(gossip_cycle(i, net, step_, config_.gossip, rng_));
  }
  const std::vector<LocalReplica> snapshot = replicas_;
  std::vector<OverlayNeighbor> nbrs;
  for (std::uint32_t i = 0; i < positions_.size(); ++i) {
    if (!alive_[i]) continue;
    nbrs.clear();
    for (const auto& d : views_[i].coverage_layer) {
      if (alive_[d.peer_id]) nbrs.push_back({d.peer_id, positions_[d.peer_id], &snapshot[d.peer_id]});
    }
    query_overlay(Aoi{positions_[i], config_.world.aoi_radius}, i, nbrs, step_, replicas_[i]);
    m.overlay_msgs += 2 * nbrs.size();
  }
}

double PamSimulation::ac_of(std::size_t peer, bool* exact) const {
  const double r = config_.world.aoi_radius;
  const Aoi p{positions_[peer], r};
  std::vector<Aoi> all;
  for (std::size_t j = 0; j < positions_.size(); ++j) {
    if (j == peer || !alive_[j]) continue;
    if (distance_sq(positions_[j], p.center) < 4.0 * r * r) all.push_back({positions_[j], r});
  }
  std::vector<Aoi> mine;
  for (const auto& d : views_[peer].coverage_layer) {
    if (alive_[d.peer_id]) mine.push_back({positions_[d.peer_id], r});
  }
  const int res = config_.ac_resolution > 0 ? config_.ac_resolution : config_.gossip.resolution;
  const CoverageModel own(p, mine, res);
  std::vector<std::size_t> idx(mine.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  const int num = own.covered(idx);
  const CoverageModel best(p, all, res);
  const auto d = config_.gossip.d;
  int den = 0;
  const bool use_exact = binomial_coefficient(all.size(), std::min(d, all.size())) <= config_.ac_exact_limit;
  if (use_exact) {
    den = brute_force_select(best, d, config_.ac_exact_limit).covered_tiles;
  } else {
    den = best.covered(greedy_select(best, d));
  }
  if (exact) *exact = use_exact;
  den = std::max(den, num);
  return den == 0 ? 1.0 : static_cast<double>(num) / den;
}

PamStepMetrics PamSimulation::step() {
  PamStepMetrics m;
  ++step_;
  m.step = step_;
  workload_.step();
  sync_positions();
  server_phase(m);
  if (config_.overlay) overlay_phase(m);
  const double r = config_.world.aoi_radius;
  for (std::size_t i = 0; i < positions_.size(); ++i) replicas_[i].prune_outside(Disk{positions_[i], r});

  const StateIndex index(authoritative(), r);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::uint32_t i = 0; i < positions_.size(); ++i) {
    if (!alive_[i]) continue;
    sum += jc(replicas_[i], index.query(positions_[i], r, i), 2.0 * r);
    ++counted;
  }
  m.mean_jc = counted ? sum / counted : 1.0;

  m.mean_ac = -1.0;
  if (step_ % config_.ac_every == 0) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      if (!alive_[i]) continue;
      bool exact = false;
      acc += ac_of(i, &exact);
      (exact ? m.ac_exact : m.ac_approx) += 1;
      ++n;
    }
    m.mean_ac = n ? acc / n : 1.0;
  }
  return m;
}

}  // namespace mmosim
