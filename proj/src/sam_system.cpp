#include <algorithm>
#include <cmath>

#include "mmosim/sam_manager.hpp"

namespace mmosim {

namespace {
constexpr int kBackupCloud = 0;
constexpr int kInitialCloud = 1;
}  // namespace

SamSystem::SamSystem(SamConfig config, std::span<const EntityDescriptor> entities, Rng rng, Rng failure_rng)
    : config_(std::move(config)),
      rng_(std::move(rng)),
      failure_rng_(std::move(failure_rng)),
      engine_(config_.rtt, config_.tcp, config_.step_seconds, config_.vs_count) {
  config_.manager.validate();
  if (config_.vs_count < 1) throw ConfigError("vs_count must be at least 1");
  if (config_.peer_count < 0) throw ConfigError("peer_count must be nonnegative");
  if (!(config_.step_seconds > 0.0)) throw ConfigError("step length must be positive");
  servers_ = partition_ring(config_.vs_count);
  assign_entities(servers_, entities);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> index;
  for (const auto& vs : servers_) {
    for (auto uid : vs.entities) index.emplace_back(uid, vs.index);
  }
  std::sort(index.begin(), index.end());
  for (const auto& [uid, v] : index) {
    entity_uids_.push_back(uid);
    entity_vs_.push_back(v);
  }
  objects_.resize(servers_.size());
  for (const auto& vs : servers_) objects_[vs.index] = static_cast<double>(vs.entities.size());

  const double es = epoch_seconds();
  nodes_.push_back(config_.manager.make_cloud(kBackupCloud, es));
  nodes_.push_back(config_.manager.make_cloud(kInitialCloud, es));
  for (int p = 0; p < config_.peer_count; ++p) nodes_.push_back(config_.manager.make_peer(static_cast<int>(nodes_.size())));
  active_.assign(nodes_.size(), 1);
  failed_.assign(nodes_.size(), 0);
  pending_release_.assign(nodes_.size(), 0);
  promote_at_.assign(nodes_.size(), -1);
  for (auto& vs : servers_) vs.host = kInitialCloud;
  build_routing_tables(servers_);

  predictors_.resize(servers_.size());
  for (std::uint32_t v = 0; v < predictors_.size(); ++v) {
    predictors_[v].vs = v;
    predictors_[v].alpha = config_.manager.alpha;
  }
  store_.assign(servers_.size(), Forecast{});
  loads_.assign(servers_.size(), 0.0);
  demand_.assign(servers_.size(), 0);
  epoch_load_sum_.assign(servers_.size(), 0.0);
  schedule_failures(0);
}

std::size_t SamSystem::vs_of_entity(std::uint32_t uid) const {
  auto it = std::lower_bound(entity_uids_.begin(), entity_uids_.end(), uid);
  if (it == entity_uids_.end() || *it != uid) throw std::out_of_range("unknown entity uid");
  return entity_vs_[static_cast<std::size_t>(it - entity_uids_.begin())];
}

void SamSystem::set_loads(std::vector<double> loads, std::vector<std::uint64_t> demand) {
  if (loads.size() != servers_.size() || demand.size() != servers_.size()) {
    throw std::invalid_argument("load vector size does not match the VS count");
  }
  loads_ = std::move(loads);
  demand_ = std::move(demand);
}

Assignment SamSystem::assignment() const {
  Assignment a(servers_.size());
  for (const auto& vs : servers_) a[vs.index] = vs.host;
  return a;
}

RiskReport SamSystem::current_risk() const {
  return risk(assignment(), nodes_, objects_, config_.manager.peer_fail_prob);
}

int SamSystem::cloud_count() const {
  int n = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (active_[i] && nodes_[i].is_cloud()) ++n;
  }
  return n;
}

void SamSystem::check_invariants() const {
  for (const auto& vs : servers_) {
    if (vs.host < 0 || static_cast<std::size_t>(vs.host) >= nodes_.size()) {
      throw CorruptionError("virtual server " + std::to_string(vs.index) + " has no host");
    }
    if (nodes_[vs.host].is_peer() && !backups_.has(vs.index)) {
      throw CorruptionError("peer-hosted virtual server " + std::to_string(vs.index) + " has no backup");
    }
    if (nodes_[vs.host].is_cloud() && !active_[vs.host]) {
      throw CorruptionError("virtual server " + std::to_string(vs.index) + " sits on a released cloud");
    }
  }
}

void SamSystem::fail_peer(int node, std::int64_t step) { scheduled_failures_.emplace_back(step, node); }

void SamSystem::schedule_failures(std::int64_t step) {
  if (!config_.failures) return;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (!active_[n] || failed_[n] || !nodes_[n].is_peer()) continue;
    if (failure_rng_.bernoulli(nodes_[n].fail_prob)) {
      const auto at = step + static_cast<std::int64_t>(failure_rng_.index(static_cast<std::size_t>(config_.manager.epoch_steps)));
      scheduled_failures_.emplace_back(at, static_cast<int>(n));
    }
  }
}

void SamSystem::handle_failure(int node, std::int64_t step) {
  if (node < 0 || static_cast<std::size_t>(node) >= nodes_.size()) return;
  if (!active_[node] || failed_[node] || !nodes_[node].is_peer()) return;
  failed_[node] = 1;
  active_[node] = 0;
  engine_.abort_to(node);
  engine_.abort_from(node);
  promote_at_[node] = step + config_.detection_delay_steps;
  // The peer population is kept constant: a newcomer replaces the failed peer.
  const int fresh = static_cast<int>(nodes_.size());
  nodes_.push_back(config_.manager.make_peer(fresh));
  active_.push_back(1);
  failed_.push_back(0);
  pending_release_.push_back(0);
  promote_at_.push_back(-1);
}

void SamSystem::refresh_backups(std::int64_t step) {
  for (const auto& vs : servers_) {
    if (nodes_[vs.host].is_peer()) {
      backups_.ensure(vs.index, kBackupCloud, vs.state_version, step);
    } else {
      backups_.erase(vs.index);
    }
  }
}

SystemView SamSystem::make_view() const {
  SystemView view;
  view.nodes = nodes_;
  view.active.resize(nodes_.size());
  for (std::size_t n = 0; n < nodes_.size(); ++n) view.active[n] = active_[n] && !failed_[n] && !pending_release_[n];
  view.host = assignment();
  for (const auto& vs : servers_) {
    if (auto dst = engine_.pending_destination(vs.index)) view.host[vs.index] = *dst;
  }
  const auto nvs = servers_.size();
  view.predicted.resize(nvs);
  view.slope.resize(nvs);
  view.current.resize(nvs);
  const double horizon = epoch_seconds();
  const double samples = std::max<std::int64_t>(1, epoch_load_samples_);
  for (std::size_t v = 0; v < nvs; ++v) {
    view.current[v] = epoch_load_sum_[v] / samples;
    if (store_[v].known) {
      view.predicted[v] = std::max(0.0, store_[v].level + store_[v].slope * horizon);
      view.slope[v] = store_[v].slope;
    } else {
      view.predicted[v] = view.current[v];
      view.slope[v] = 0.0;
    }
  }
  view.objects = objects_;
  view.backed_up.resize(nvs);
  for (const auto& vs : servers_) view.backed_up[vs.index] = vs.backed_up ? 1 : 0;
  view.backup_cloud = kBackupCloud;
  view.peer_fail_prob = config_.manager.peer_fail_prob;
  return view;
}

void SamSystem::apply_plan(const EpochPlan& plan, std::int64_t step) {
  std::vector<int> remap(nodes_.size() + plan.recruits.size() + 1, -1);
  for (const auto& r : plan.recruits) {
    const int id = static_cast<int>(nodes_.size());
    if (static_cast<std::size_t>(r.node_id) >= remap.size()) remap.resize(r.node_id + 1, -1);
    remap[r.node_id] = id;
    NodeSpec spec = r;
    spec.node_id = id;
    nodes_.push_back(spec);
    active_.push_back(1);
    failed_.push_back(0);
    pending_release_.push_back(0);
    promote_at_.push_back(-1);
  }
  for (int n : plan.releases) {
    if (n >= 0 && static_cast<std::size_t>(n) < nodes_.size() && n != kBackupCloud && nodes_[n].is_cloud()) {
      pending_release_[n] = 1;
    }
  }
  for (const auto& m : plan.migrations) {
    int dst = m.dst;
    if (dst >= 0 && static_cast<std::size_t>(dst) < remap.size() && remap[dst] >= 0) dst = remap[dst];
    if (dst < 0 || static_cast<std::size_t>(dst) >= nodes_.size()) continue;
    auto& vs = servers_[m.vs];
    if (engine_.in_flight(m.vs) || vs.host == dst) continue;
    if (!active_[dst] || failed_[dst] || pending_release_[dst]) continue;
    if (failed_[vs.host]) continue;
    engine_.start(vs, dst, step, rng_);
    ++current_epoch_.migrations;
    ++started_in_step_;
  }
  current_epoch_.recruits += static_cast<int>(plan.recruits.size());
}

void SamSystem::run_epoch(std::int64_t epoch, std::int64_t step) {
  current_epoch_.epoch = epoch - 1;
  current_epoch_.availability =
      epoch_requests_ ? 1.0 - static_cast<double>(epoch_unavailable_) / static_cast<double>(epoch_requests_) : 1.0;
  current_epoch_.gamma_r = current_risk().gamma_r;
  current_epoch_.clouds = cloud_count();
  epoch_log_.push_back(current_epoch_);
  current_epoch_ = EpochLog{};
  epoch_requests_ = epoch_unavailable_ = 0;

  const double samples = std::max<std::int64_t>(1, epoch_load_samples_);
  for (std::size_t v = 0; v < servers_.size(); ++v) {
    if (auto msg = update_local_prediction(predictors_[v], epoch_load_sum_[v] / samples, config_.manager.xi_est,
                                           epoch_seconds())) {
      inbox_.push_back(*msg);
    }
  }

  if (pending_plan_) {
    apply_plan(*pending_plan_, step);
    pending_plan_.reset();
  }
  apply_prediction_updates(store_, inbox_);
  inbox_.clear();

  const auto view = make_view();
  const auto pool = select_vs(view, config_.manager.lf_up, config_.manager.lf_bot, config_.manager.pool_size, rng_);
  auto plan = select_destination(pool, view, config_.manager.risk_limit, config_.manager.lf_up, epoch_seconds(),
                                 config_.manager.make_cloud(0, epoch_seconds()));
  plan.epoch = epoch;
  pending_plan_ = std::move(plan);

  std::fill(epoch_load_sum_.begin(), epoch_load_sum_.end(), 0.0);
  epoch_load_samples_ = 0;
  schedule_failures(step);
}

SamStepStats SamSystem::step(std::int64_t s) {
  SamStepStats st;
  if (s > 0 && s % config_.manager.epoch_steps == 0) run_epoch(s / config_.manager.epoch_steps, s);

  for (auto it = scheduled_failures_.begin(); it != scheduled_failures_.end();) {
    if (it->first <= s) {
      handle_failure(it->second, s);
      it = scheduled_failures_.erase(it);
    } else {
      ++it;
    }
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (promote_at_[n] >= 0 && promote_at_[n] <= s) {
      promote_backup(nodes_[n], servers_, backups_);
      promote_at_[n] = -1;
    }
  }

  engine_.advance(servers_, s);
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (!pending_release_[n]) continue;
    bool busy = false;
    for (const auto& vs : servers_) {
      if (vs.host == static_cast<int>(n) || engine_.pending_destination(vs.index) == static_cast<int>(n)) {
        busy = true;
        break;
      }
    }
    if (!busy) {
      pending_release_[n] = 0;
      active_[n] = 0;
      ++current_epoch_.releases;
    }
  }
  refresh_backups(s);
  const auto sync_steps = std::max<std::int64_t>(1, std::llround(config_.sync_seconds / config_.step_seconds));
  if (s % sync_steps == 0) backups_.sync(servers_, s);

  std::vector<double> node_load(nodes_.size(), 0.0);
  for (const auto& vs : servers_) node_load[vs.host] += loads_[vs.index];
  std::vector<char> overloaded(nodes_.size(), 0);
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if ((active_[n] || failed_[n]) && node_load[n] / nodes_[n].capacity >= 1.0) {
      overloaded[n] = 1;
      if (active_[n]) ++st.overloaded_nodes;
    }
  }
  for (auto& vs : servers_) {
    const auto r = rng_.binomial(demand_[vs.index], config_.request_prob);
    st.requests += r;
    vs.state_version += r;
    if (engine_.in_flight(vs.index) || failed_[vs.host] || overloaded[vs.host]) st.unavailable += r;
    st.cost += loads_[vs.index] * config_.step_seconds * nodes_[vs.host].bandwidth_cost;
  }
  const double epoch_fraction = 1.0 / config_.manager.epoch_steps;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (active_[n] && nodes_[n].is_cloud()) st.cost += nodes_[n].rent_cost * epoch_fraction;
  }
  for (std::size_t v = 0; v < servers_.size(); ++v) epoch_load_sum_[v] += loads_[v];
  ++epoch_load_samples_;

  epoch_requests_ += st.requests;
  epoch_unavailable_ += st.unavailable;
  current_epoch_.cost += st.cost;
  st.migrations_started = started_in_step_;
  started_in_step_ = 0;
  st.cloud_count = cloud_count();
  st.gamma_r = current_risk().gamma_r;
  return st;
}

}  // namespace mmosim
