#include "mmosim/sam_manager.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mmosim {

std::optional<PredictionMessage> update_local_prediction(LoadPredictor& p, double measured, double xi,
                                                         double cycle_seconds) {
  measured = std::max(0.0, measured);
  bool send = false;
  if (!p.initialized) {
    p.initialized = true;
    p.previous_level = p.level = measured;
    send = true;
  } else {
    const double err = std::abs(p.last_sent - measured);
    p.previous_level = p.level;
    if (err > 0.0 && err >= xi * p.last_sent) {
      p.level = measured;
      send = true;
    } else {
      p.level = p.alpha * measured + (1.0 - p.alpha) * p.level;
    }
  }
  if (!send) return std::nullopt;
  p.last_sent = p.level;
  p.last_sent_slope = cycle_seconds > 0.0 ? (p.level - p.previous_level) / cycle_seconds : 0.0;
  return PredictionMessage{p.vs, p.last_sent, p.last_sent_slope};
}

std::size_t apply_prediction_updates(std::vector<Forecast>& store, std::span<const PredictionMessage> messages) {
  std::size_t rejected = 0;
  for (const auto& m : messages) {
    if (m.vs >= store.size()) {
      ++rejected;
      continue;
    }
    store[m.vs] = {m.level, m.slope, true};
  }
  return rejected;
}

RiskReport risk(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> vs_objects,
                double peer_fail_prob) {
  RiskReport r;
  for (std::size_t v = 0; v < host.size(); ++v) {
    r.gamma_max += vs_objects[v] * peer_fail_prob;
    if (host[v] >= 0) r.gamma += vs_objects[v] * nodes[host[v]].fail_prob;
  }
  r.gamma_r = r.gamma_max > 0.0 ? r.gamma / r.gamma_max : 0.0;
  return r;
}

double load_factor(int node, std::span<const int> host, std::span<const NodeSpec> nodes,
                   std::span<const double> loads) {
  double sum = 0.0;
  for (std::size_t v = 0; v < host.size(); ++v) {
    if (host[v] == node) sum += loads[v];
  }
  return sum / nodes[node].capacity;
}

double cost(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> loads,
            double epoch_seconds, std::span<const int> rented) {
  double beta = 0.0;
  for (std::size_t v = 0; v < host.size(); ++v) {
    if (host[v] >= 0) beta += loads[v] * epoch_seconds * nodes[host[v]].bandwidth_cost;
  }
  for (int n : rented) beta += nodes[n].rent_cost;
  return beta;
}

double placement_cost(std::span<const int> host, std::span<const NodeSpec> nodes, std::span<const double> loads,
                      double epoch_seconds) {
  std::vector<int> used;
  for (int h : host) {
    if (h >= 0 && nodes[h].is_cloud() && std::find(used.begin(), used.end(), h) == used.end()) used.push_back(h);
  }
  return cost(host, nodes, loads, epoch_seconds, used);
}

void ManagerConfig::validate() const {
  if (risk_limit < 0.0 || risk_limit > 1.0) throw ConfigError("risk_limit must lie in [0, 1]");
  if (!(lf_bot > 0.0 && lf_bot < lf_up && lf_up <= 1.0)) throw ConfigError("need 0 < LF_bot < LF_up <= 1");
  if (pool_size < 0) throw ConfigError("P_size must be nonnegative");
  if (!(xi_est >= 0.0)) throw ConfigError("xi_est must be nonnegative");
  if (epoch_steps < 1) throw ConfigError("epoch length must be at least one step");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(cloud_capacity > 0.0) || !(peer_capacity > 0.0)) throw ConfigError("capacities must be positive");
  if (cloud_rent_per_hour < 0.0 || cloud_price_per_gb < 0.0) throw ConfigError("prices must be nonnegative");
  if (peer_fail_prob < 0.0 || peer_fail_prob > 1.0) throw ConfigError("peer fail_prob must lie in [0, 1]");
}

ManagerConfig ManagerConfig::from_config(const Config& cfg, const std::string& prefix) {
  ManagerConfig m;
  auto key = [&](const char* k) { return prefix + k; };
  m.risk_limit = cfg.get_double(key("risk_limit"), m.risk_limit);
  m.lf_up = cfg.get_double(key("LF_up"), m.lf_up);
  m.lf_bot = cfg.get_double(key("LF_bot"), m.lf_bot);
  m.pool_size = static_cast<int>(cfg.get_int(key("P_size"), m.pool_size));
  m.xi_est = cfg.get_double(key("xi_est"), m.xi_est);
  m.epoch_steps = static_cast<int>(cfg.get_int(key("epoch_steps"), m.epoch_steps));
  m.alpha = cfg.get_double(key("alpha"), m.alpha);
  m.cloud_capacity = cfg.get_double(key("cloud_capacity"), m.cloud_capacity);
  m.cloud_rent_per_hour = cfg.get_double(key("cloud_rent_per_hour"), m.cloud_rent_per_hour);
  m.cloud_price_per_gb = cfg.get_double(key("cloud_price_per_gb"), m.cloud_price_per_gb);
  m.peer_capacity = cfg.get_double(key("peer_capacity"), m.peer_capacity);
  m.peer_fail_prob = cfg.get_double(key("peer_fail_prob"), m.peer_fail_prob);
  m.validate();
  return m;
}

NodeSpec ManagerConfig::make_cloud(int id, double epoch_seconds) const {
  return {id, NodeKind::Cloud, cloud_capacity, cloud_price_per_gb / 1e9, cloud_rent_per_hour * epoch_seconds / 3600.0,
          0.0};
}

NodeSpec ManagerConfig::make_peer(int id) const { return {id, NodeKind::Peer, peer_capacity, 0.0, 0.0, peer_fail_prob}; }

double SystemView::predicted_load(int node) const {
  double s = 0.0;
  for (std::size_t v = 0; v < host.size(); ++v) {
    if (host[v] == node) s += predicted[v];
  }
  return s;
}

double SystemView::current_load(int node) const {
  double s = 0.0;
  for (std::size_t v = 0; v < host.size(); ++v) {
    if (host[v] == node) s += current[v];
  }
  return s;
}

std::vector<std::uint32_t> select_vs(const SystemView& view, double lf_up, double lf_bot, int pool_size, Rng& rng) {
  const auto nvs = view.host.size();
  std::vector<std::uint32_t> pool;
  std::vector<char> in_pool(nvs, 0);
  auto add = [&](std::uint32_t v) {
    if (!in_pool[v]) {
      in_pool[v] = 1;
      pool.push_back(v);
    }
  };
  std::vector<std::vector<std::uint32_t>> hosted(view.nodes.size());
  for (std::uint32_t v = 0; v < nvs; ++v) {
    if (view.host[v] >= 0) hosted[view.host[v]].push_back(v);
  }

  // Overloaded nodes shed their fastest-growing VSs first.
  for (std::size_t n = 0; n < view.nodes.size(); ++n) {
    if (!view.active[n]) continue;
    double pl = 0.0;
    for (auto v : hosted[n]) pl += view.predicted[v];
    const double cap = view.nodes[n].capacity;
    if (pl / cap <= lf_up) continue;
    auto order = hosted[n];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return view.slope[a] > view.slope[b]; });
    for (auto v : order) {
      if (pl / cap <= lf_up) break;
      add(v);
      pl -= view.predicted[v];
    }
  }

  for (std::uint32_t v = 0; v < nvs; ++v) {
    if (view.backed_up[v]) add(v);
  }

  for (std::size_t n = 0; n < view.nodes.size() && static_cast<int>(pool.size()) < pool_size; ++n) {
    if (!view.active[n] || hosted[n].empty()) continue;
    double cl = 0.0;
    for (auto v : hosted[n]) cl += view.current[v];
    if (cl / view.nodes[n].capacity < lf_bot) {
      for (auto v : hosted[n]) add(v);
    }
  }

  if (static_cast<int>(pool.size()) < pool_size) {
    std::vector<std::uint32_t> rest;
    for (std::uint32_t v = 0; v < nvs; ++v) {
      if (!in_pool[v]) rest.push_back(v);
    }
    while (static_cast<int>(pool.size()) < pool_size && !rest.empty()) {
      const auto i = rng.index(rest.size());
      add(rest[i]);
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  return pool;
}

EpochPlan select_destination(std::span<const std::uint32_t> pool, const SystemView& view, double risk_limit,
                             double lf_up, double epoch_seconds, const NodeSpec& cloud_template) {
  EpochPlan plan;
  std::vector<NodeSpec> nodes = view.nodes;
  std::vector<char> active = view.active;
  Assignment work = view.host;
  for (auto v : pool) work[v] = -1;

  std::vector<double> pl(nodes.size(), 0.0);
  std::vector<int> count(nodes.size(), 0);
  double gamma = 0.0;
  double gamma_max = 0.0;
  for (std::size_t v = 0; v < work.size(); ++v) {
    gamma_max += view.objects[v] * view.peer_fail_prob;
    if (work[v] < 0) continue;
    pl[work[v]] += view.predicted[v];
    ++count[work[v]];
    gamma += view.objects[v] * nodes[work[v]].fail_prob;
  }

  auto place = [&](std::uint32_t v, int n) {
    work[v] = n;
    pl[n] += view.predicted[v];
    ++count[n];
    gamma += view.objects[v] * nodes[n].fail_prob;
  };
  auto recruit = [&]() {
    NodeSpec fresh = cloud_template;
    fresh.node_id = static_cast<int>(nodes.size());
    nodes.push_back(fresh);
    active.push_back(1);
    pl.push_back(0.0);
    count.push_back(0);
    plan.recruits.push_back(fresh);
    return fresh.node_id;
  };

  for (auto v : pool) {
    const double load = view.predicted[v];
    std::vector<int> candidates;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      if (!active[n] || static_cast<int>(n) == view.backup_cloud) continue;
      if ((pl[n] + load) / nodes[n].capacity < lf_up) candidates.push_back(static_cast<int>(n));
    }
    std::vector<int> safe;
    for (int n : candidates) {
      if (nodes[n].fail_prob == 0.0) {
        safe.push_back(n);
        continue;
      }
      const double g = gamma + view.objects[v] * nodes[n].fail_prob;
      const double gr = gamma_max > 0.0 ? g / gamma_max : 0.0;
      if (gr < risk_limit) safe.push_back(n);
    }
    if (safe.empty()) {
      place(v, recruit());
      continue;
    }
    auto marginal = [&](int n) {
      return load * epoch_seconds * nodes[n].bandwidth_cost + (count[n] == 0 ? nodes[n].rent_cost : 0.0);
    };
    const int best = *std::min_element(safe.begin(), safe.end(), [&](int a, int b) {
      const double ca = marginal(a);
      const double cb = marginal(b);
      return ca < cb || (ca == cb && a < b);
    });
    place(v, best);
  }

  for (auto v : pool) {
    if (work[v] != view.host[v]) plan.migrations.push_back({v, work[v]});
  }
  for (std::size_t n = 0; n < view.nodes.size(); ++n) {
    if (active[n] && nodes[n].is_cloud() && static_cast<int>(n) != view.backup_cloud && count[n] == 0) {
      plan.releases.push_back(static_cast<int>(n));
    }
  }
  plan.projected_risk = gamma_max > 0.0 ? gamma / gamma_max : 0.0;
  plan.projected = std::move(work);
  return plan;
}

PlacementResult optimal_assignment(const PlacementInstance& inst) {
  const std::size_t nvs = inst.loads.size();
  const std::size_t base = inst.nodes.size();
  if (nvs > kOptimalMaxVs || base > kOptimalMaxNodes) {
    throw std::invalid_argument("instance too large for exhaustive search");
  }
  std::vector<NodeSpec> nodes = inst.nodes;
  std::size_t fresh_slots = 0;
  if (inst.fresh_cloud) {
    fresh_slots = nvs;
    for (std::size_t k = 0; k < nvs; ++k) {
      NodeSpec c = *inst.fresh_cloud;
      c.node_id = static_cast<int>(base + k);
      nodes.push_back(c);
    }
  }
  const double E = inst.epoch_seconds;
  double gamma_max = 0.0;
  for (double o : inst.objects) gamma_max += o * inst.peer_fail_prob;
  double min_bcost = std::numeric_limits<double>::infinity();
  for (const auto& n : nodes) min_bcost = std::min(min_bcost, n.bandwidth_cost);
  if (nodes.empty()) min_bcost = 0.0;
  std::vector<double> suffix(nvs + 1, 0.0);
  for (std::size_t v = nvs; v-- > 0;) suffix[v] = suffix[v + 1] + inst.loads[v] * E * min_bcost;

  PlacementResult best;
  best.cost = std::numeric_limits<double>::infinity();
  Assignment host(nvs, -1);
  std::vector<double> load(nodes.size(), 0.0);
  std::vector<int> used(nodes.size(), 0);
  double gamma = 0.0;
  int peers_used = 0;

  auto risk_ok = [&]() {
    if (peers_used == 0) return true;
    const double gr = gamma_max > 0.0 ? gamma / gamma_max : 0.0;
    return gr < inst.risk_limit;
  };

  std::function<void(std::size_t, std::size_t, double)> dfs = [&](std::size_t v, std::size_t opened, double c) {
    if (c + suffix[v] >= best.cost) return;
    if (!risk_ok()) return;
    if (v == nvs) {
      best.feasible = true;
      best.cost = c;
      best.host = host;
      return;
    }
    // Fresh clouds are interchangeable: only the first unopened one is tried.
    const std::size_t limit = base + std::min(opened + 1, fresh_slots);
    for (std::size_t n = 0; n < limit; ++n) {
      const auto& node = nodes[n];
      if (load[n] + inst.loads[v] > node.capacity) continue;
      const double add = inst.loads[v] * E * node.bandwidth_cost + (used[n] == 0 ? node.rent_cost : 0.0);
      host[v] = static_cast<int>(n);
      load[n] += inst.loads[v];
      ++used[n];
      gamma += inst.objects[v] * node.fail_prob;
      const bool peer = node.fail_prob > 0.0;
      if (peer) ++peers_used;
      const std::size_t next_opened = (n >= base && n == base + opened) ? opened + 1 : opened;
      dfs(v + 1, next_opened, c + add);
      if (peer) --peers_used;
      gamma -= inst.objects[v] * node.fail_prob;
      --used[n];
      load[n] -= inst.loads[v];
      host[v] = -1;
    }
  };
  dfs(0, 0, 0.0);
  if (!best.feasible) {
    best.cost = 0.0;
    best.host.assign(nvs, -1);
    best.nodes = inst.nodes;
    return best;
  }
  std::size_t top = base;
  for (int h : best.host) top = std::max<std::size_t>(top, static_cast<std::size_t>(h) + 1);
  best.nodes.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(top));
  return best;
}

PlacementResult greedy_assignment(const PlacementInstance& inst, bool allow_peers) {
  SystemView view;
  view.nodes = inst.nodes;
  view.active.assign(inst.nodes.size(), 1);
  if (!allow_peers) {
    for (std::size_t n = 0; n < inst.nodes.size(); ++n) {
      if (inst.nodes[n].is_peer()) view.active[n] = 0;
    }
  }
  const auto nvs = inst.loads.size();
  view.host.assign(nvs, -1);
  view.predicted = inst.loads;
  view.slope.assign(nvs, 0.0);
  view.current = inst.loads;
  view.objects = inst.objects;
  view.backed_up.assign(nvs, 0);
  view.peer_fail_prob = inst.peer_fail_prob;

  std::vector<std::uint32_t> pool(nvs);
  std::iota(pool.begin(), pool.end(), 0u);
  PlacementResult r;
  if (!inst.fresh_cloud) {
    // Without a recruit template the balancer cannot grow; emulate with an
    // unusable node and report infeasible if it is ever chosen.
    NodeSpec none{0, NodeKind::Cloud, 1.0, 0.0, 0.0, 0.0};
    auto plan = select_destination(pool, view, inst.risk_limit, inst.lf_up, inst.epoch_seconds, none);
    r.feasible = plan.recruits.empty();
    r.host = plan.projected;
    r.nodes = inst.nodes;
    if (!r.feasible) {
      r.host.assign(nvs, -1);
      return r;
    }
  } else {
    auto plan = select_destination(pool, view, inst.risk_limit, inst.lf_up, inst.epoch_seconds, *inst.fresh_cloud);
    r.feasible = true;
    r.host = plan.projected;
    r.nodes = inst.nodes;
    r.nodes.insert(r.nodes.end(), plan.recruits.begin(), plan.recruits.end());
  }
  r.cost = placement_cost(r.host, r.nodes, inst.loads, inst.epoch_seconds);
  return r;
}

}  // namespace mmosim
