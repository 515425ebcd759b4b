#include <algorithm>
#include <cmath>

#include "mmosim/pam.hpp"
#include "mmosim/spatial_index.hpp"

namespace mmosim {

const char* to_string(Heuristic h) { return h == Heuristic::Score ? "score" : "greedy"; }

Heuristic parse_heuristic(const std::string& name) {
  if (name == "score") return Heuristic::Score;
  if (name == "greedy") return Heuristic::Greedy;
  throw ConfigError("unknown heuristic `" + name + "` (expected score or greedy)");
}

void GossipConfig::validate() const {
  if (random_view < 1) throw ConfigError("random view must hold at least one entry");
  if (stale_threshold < 0) throw ConfigError("stale threshold must be nonnegative");
  if (random_period < 1 || coverage_period < 1) throw ConfigError("gossip periods must be at least 1");
  if (resolution < 1) throw ConfigError("grid resolution must be at least 1");
  if (!(aoi_radius > 0.0)) throw ConfigError("aoi_radius must be positive");
}

std::vector<PeerDescriptor> rank_candidates(std::uint32_t self, Point self_position,
                                            std::vector<PeerDescriptor> candidates, std::int64_t iteration,
                                            const GossipConfig& cfg) {
  std::erase_if(candidates, [&](const PeerDescriptor& c) {
    return c.peer_id == self || iteration - c.timestamp > cfg.stale_threshold;
  });
  std::sort(candidates.begin(), candidates.end(), [](const PeerDescriptor& a, const PeerDescriptor& b) {
    return a.peer_id < b.peer_id || (a.peer_id == b.peer_id && a.timestamp > b.timestamp);
  });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const PeerDescriptor& a, const PeerDescriptor& b) { return a.peer_id == b.peer_id; }),
                   candidates.end());
  // Fresher first, then nearer, so that equal heuristic ranks favour recent close observations.
  std::stable_sort(candidates.begin(), candidates.end(), [&](const PeerDescriptor& a, const PeerDescriptor& b) {
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    return distance_sq(a.position, self_position) < distance_sq(b.position, self_position);
  });
  if (candidates.size() <= cfg.d) return candidates;
  std::vector<Aoi> aois;
  aois.reserve(candidates.size());
  for (const auto& c : candidates) aois.push_back({c.position, cfg.aoi_radius});
  const CoverageModel model(Aoi{self_position, cfg.aoi_radius}, aois, cfg.resolution);
  const auto pick = cfg.heuristic == Heuristic::Score ? score_select(model, cfg.d) : greedy_select(model, cfg.d);
  std::vector<PeerDescriptor> out;
  out.reserve(pick.size());
  for (auto i : pick) out.push_back(candidates[i]);
  return out;
}

namespace {

std::vector<PeerDescriptor> sample_half(const std::vector<PeerDescriptor>& view, Rng& rng) {
  std::vector<PeerDescriptor> copy = view;
  const std::size_t k = (copy.size() + 1) / 2;
  for (std::size_t i = 0; i < k; ++i) std::swap(copy[i], copy[i + rng.index(copy.size() - i)]);
  copy.resize(k);
  return copy;
}

void merge_random(PeerView& view, std::uint32_t owner, const std::vector<PeerDescriptor>& incoming,
                  std::size_t capacity) {
  for (const auto& d : incoming) {
    if (d.peer_id == owner) continue;
    auto it = std::find_if(view.random_layer.begin(), view.random_layer.end(),
                           [&](const PeerDescriptor& x) { return x.peer_id == d.peer_id; });
    if (it == view.random_layer.end()) {
      view.random_layer.push_back(d);
      view.arrivals.push_back(d);
    } else if (d.timestamp > it->timestamp) {
      *it = d;
    }
  }
  if (view.random_layer.size() > capacity) {
    std::sort(view.random_layer.begin(), view.random_layer.end(), [](const PeerDescriptor& a, const PeerDescriptor& b) {
      return a.timestamp > b.timestamp || (a.timestamp == b.timestamp && a.peer_id < b.peer_id);
    });
    view.random_layer.resize(capacity);
  }
}

}  // namespace

int gossip_cycle(std::uint32_t self, GossipNetwork& net, std::int64_t iteration, const GossipConfig& cfg, Rng& rng) {
  auto& me = net.views[self];
  me.iteration = iteration;
  if (!net.alive[self]) return 0;
  int messages = 0;
  const PeerDescriptor self_desc{self, net.positions[self], iteration};

  if (iteration % cfg.random_period == 0 && !me.random_layer.empty()) {
    const auto pos = rng.index(me.random_layer.size());
    const auto partner = me.random_layer[pos].peer_id;
    if (!net.alive[partner]) {
      me.random_layer.erase(me.random_layer.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      auto& other = net.views[partner];
      auto offer = sample_half(me.random_layer, rng);
      offer.push_back(self_desc);
      auto reply = sample_half(other.random_layer, rng);
      reply.push_back({partner, net.positions[partner], iteration});
      merge_random(me, self, reply, cfg.random_view);
      merge_random(other, partner, offer, cfg.random_view);
      messages += 2;
    }
  }

  if (iteration % cfg.coverage_period == 0) {
    std::vector<std::uint32_t> live;
    for (const auto& d : me.coverage_layer) {
      if (net.alive[d.peer_id]) live.push_back(d.peer_id);
    }
    if (live.empty()) {
      for (const auto& d : me.random_layer) {
        if (net.alive[d.peer_id]) live.push_back(d.peer_id);
      }
    }
    std::vector<PeerDescriptor> candidates = me.coverage_layer;
    candidates.insert(candidates.end(), me.arrivals.begin(), me.arrivals.end());
    me.arrivals.clear();
    if (!live.empty()) {
      const auto partner = live[rng.index(live.size())];
      auto& other = net.views[partner];
      candidates.insert(candidates.end(), other.coverage_layer.begin(), other.coverage_layer.end());
      candidates.push_back({partner, net.positions[partner], iteration});
      // The partner receives our view and folds it in on its own next cycle.
      other.arrivals.insert(other.arrivals.end(), me.coverage_layer.begin(), me.coverage_layer.end());
      other.arrivals.push_back(self_desc);
      messages += 2;
    }
    std::erase_if(candidates, [&](const PeerDescriptor& d) { return !net.alive[d.peer_id]; });
    me.coverage_layer = rank_candidates(self, net.positions[self], std::move(candidates), iteration, cfg);
  }
  return messages;
}

void LocalReplica::upsert(const ReplicaEntry& e) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), e.uid,
                             [](const ReplicaEntry& x, std::uint32_t uid) { return x.uid < uid; });
  if (it == entries_.end() || it->uid != e.uid) {
    entries_.insert(it, e);
  } else if (e.timestamp > it->timestamp) {
    *it = e;
  }
}

const ReplicaEntry* LocalReplica::find(std::uint32_t uid) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), uid,
                             [](const ReplicaEntry& x, std::uint32_t u) { return x.uid < u; });
  return it != entries_.end() && it->uid == uid ? &*it : nullptr;
}

void LocalReplica::assign_from_server(std::vector<ReplicaEntry> entries, std::int64_t t, const Disk& area) {
  entries_ = std::move(entries);
  server_time_ = t;
  server_area_ = area;
}

bool LocalReplica::superseded(const ReplicaEntry& e) const {
  return server_time_ >= 0 && e.timestamp <= server_time_ && server_area_.contains(e.position);
}

void LocalReplica::prune_outside(const Disk& aoi) {
  std::erase_if(entries_, [&](const ReplicaEntry& e) { return !aoi.contains(e.position); });
}

void query_overlay(const Aoi& p, std::uint32_t self_uid, std::span<const OverlayNeighbor> neighbors,
                   std::int64_t now, LocalReplica& replica) {
  const Disk disk = p.disk();
  std::vector<ReplicaEntry> incoming;
  for (const auto& q : neighbors) {
    if (q.uid != self_uid && disk.contains(q.position)) {
      incoming.push_back({q.uid, q.position, now, ReplicaSource::Overlay});
    }
    if (!q.replica) continue;
    for (const auto& e : q.replica->entries()) {
      if (e.uid != self_uid && disk.contains(e.position) && !replica.superseded(e)) {
        incoming.push_back({e.uid, e.position, e.timestamp, ReplicaSource::Overlay});
      }
    }
  }
  if (incoming.empty()) return;
  // Freshest per uid; equal timestamps keep the smallest position for order independence.
  std::sort(incoming.begin(), incoming.end(), [](const ReplicaEntry& a, const ReplicaEntry& b) {
    if (a.uid != b.uid) return a.uid < b.uid;
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    if (a.position.x != b.position.x) return a.position.x < b.position.x;
    return a.position.y < b.position.y;
  });
  std::vector<ReplicaEntry> merged;
  merged.reserve(replica.size() + incoming.size());
  const auto& cur = replica.entries();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < cur.size() || j < incoming.size()) {
    if (j < incoming.size() && j > 0 && incoming[j].uid == incoming[j - 1].uid) {
      ++j;
      continue;
    }
    if (j >= incoming.size() || (i < cur.size() && cur[i].uid < incoming[j].uid)) {
      merged.push_back(cur[i++]);
    } else if (i >= cur.size() || incoming[j].uid < cur[i].uid) {
      merged.push_back(incoming[j++]);
    } else {
      merged.push_back(incoming[j].timestamp > cur[i].timestamp ? incoming[j] : cur[i]);
      ++i;
      ++j;
    }
  }
  replica.assign_sorted(std::move(merged));
}

std::vector<AuthoritativeEntity> entities_in_aoi(std::span<const AuthoritativeEntity> state, const Disk& aoi,
                                                 std::uint32_t self_uid) {
  std::vector<AuthoritativeEntity> out;
  for (const auto& e : state) {
    if (e.uid != self_uid && aoi.contains(e.position)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.uid < b.uid; });
  return out;
}

double jc(const LocalReplica& client, std::span<const AuthoritativeEntity> server, double d_max) {
  const auto& c = client.entries();
  if (c.empty() && server.empty()) return 1.0;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t uni = 0;
  double sum = 0.0;
  while (i < c.size() || j < server.size()) {
    ++uni;
    if (j >= server.size() || (i < c.size() && c[i].uid < server[j].uid)) {
      ++i;
    } else if (i >= c.size() || server[j].uid < c[i].uid) {
      ++j;
    } else {
      sum += std::max(0.0, 1.0 - distance(c[i].position, server[j].position) / d_max);
      ++i;
      ++j;
    }
  }
  return sum / static_cast<double>(uni);
}

}  // namespace mmosim
