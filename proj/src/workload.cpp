#include "mmosim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mmosim/spatial_index.hpp"

namespace mmosim {
namespace {

Point clamp_to_world(Point p, const WorldConfig& c) {
  return {std::clamp(p.x, 0.0, c.width), std::clamp(p.y, 0.0, c.height)};
}

Point uniform_point(const WorldConfig& c, Rng& rng) {
  return {rng.uniform(0.0, c.width), rng.uniform(0.0, c.height)};
}

Point polar_offset(Point center, double dist, double angle) {
  return {center.x + dist * std::cos(angle), center.y + dist * std::sin(angle)};
}

// Inverse CDF of a continuous power law x^-a on [lo, hi].
double power_law_distance(double lo, double hi, double a, Rng& rng) {
  const double u = rng.uniform();
  if (std::abs(a - 1.0) < 1e-12) return lo * std::pow(hi / lo, u);
  const double e = 1.0 - a;
  const double l = std::pow(lo, e);
  const double h = std::pow(hi, e);
  return std::pow(l + u * (h - l), 1.0 / e);
}

MobilityMode sample_mode(const TransitionMatrix& t, MobilityMode from, Rng& rng) {
  const auto& row = t.p[static_cast<int>(from)];
  const double u = rng.uniform();
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    acc += row[k];
    if (u < acc) return static_cast<MobilityMode>(k);
  }
  // Rounding slack: fall back to the last state with positive mass.
  for (int k = 2; k >= 0; --k) {
    if (row[k] > 0.0) return static_cast<MobilityMode>(k);
  }
  return from;
}

Point travel_target(const WorldConfig& c, const HotspotLayout& layout, Rng& rng) {
  if (!layout.empty() && rng.bernoulli(c.p_den)) {
    return layout.sample_in(rng.index(layout.hotspots().size()), rng);
  }
  return uniform_point(c, rng);
}

}  // namespace

const char* to_string(MobilityMode m) {
  switch (m) {
    case MobilityMode::Halt: return "halt";
    case MobilityMode::Exploration: return "exploration";
    case MobilityMode::Travelling: return "travelling";
  }
  return "?";
}

TransitionMatrix TransitionMatrix::defaults() {
  TransitionMatrix t;
  t.p[0] = {0.85, 0.10, 0.05};
  t.p[1] = {0.15, 0.80, 0.05};
  t.p[2] = {0.05, 0.00, 0.95};
  return t;
}

void TransitionMatrix::validate() const {
  for (const auto& row : p) {
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw ConfigError("transition probabilities must be nonnegative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("transition matrix rows must sum to 1");
  }
}

void WorldConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  unit(p_hot, "p_hot");
  unit(p_den, "p_den");
  unit(p_obj, "p_obj");
  if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("world size must be positive");
  if (hotspot_count < 0 || object_count < 0 || max_players < 0) {
    throw ConfigError("counts must be nonnegative");
  }
  if (!(step_seconds > 0.0)) throw ConfigError("delta_t must be positive");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(aoi_radius > 0.0)) throw ConfigError("aoi_radius must be positive");
  if (!(speed >= 0.0)) throw ConfigError("speed must be nonnegative");
  if (!(exploration_radius >= 1.0)) throw ConfigError("exploration_radius must be at least 1");
  if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be nonnegative");
  if (p_hot > 0.0 && hotspot_count == 0) throw ConfigError("p_hot > 0 needs at least one hotspot");
  transitions.validate();
}

WorldConfig WorldConfig::from_config(const Config& cfg, const std::string& prefix) {
  return from_config(cfg, prefix, WorldConfig{});
}

WorldConfig WorldConfig::from_config(const Config& cfg, const std::string& prefix, WorldConfig base) {
  WorldConfig w = std::move(base);
  auto key = [&](const char* k) { return prefix + k; };
  w.width = cfg.get_double(key("width"), w.width);
  w.height = cfg.get_double(key("height"), w.height);
  w.hotspot_count = static_cast<int>(cfg.get_int(key("H_num"), w.hotspot_count));
  w.p_hot = cfg.get_double(key("p_hot"), w.p_hot);
  w.p_den = cfg.get_double(key("p_den"), w.p_den);
  w.p_obj = cfg.get_double(key("p_obj"), w.p_obj);
  w.object_count = static_cast<int>(cfg.get_int(key("O_num"), w.object_count));
  w.max_players = static_cast<int>(cfg.get_int(key("P_max"), w.max_players));
  w.lambda = cfg.get_double(key("lambda"), w.lambda);
  w.seasonal = cfg.get_bool(key("seasonal"), w.seasonal);
  const auto mlen = cfg.get_int(key("M_len"), w.message_length);
  if (mlen < 0) throw ConfigError("M_len must be nonnegative");
  w.message_length = static_cast<std::uint32_t>(mlen);
  w.step_seconds = cfg.get_double(key("delta_t"), w.step_seconds);
  w.aoi_radius = cfg.get_double(key("aoi_radius"), w.aoi_radius);
  w.seed = static_cast<std::uint64_t>(cfg.get_int(key("seed"), static_cast<std::int64_t>(w.seed)));
  w.speed = cfg.get_double(key("speed"), w.speed);
  w.exploration_radius = cfg.get_double(key("exploration_radius"), w.exploration_radius);
  w.exploration_exponent = cfg.get_double(key("exploration_exponent"), w.exploration_exponent);
  w.zipf_exponent = cfg.get_double(key("zipf_exponent"), w.zipf_exponent);
  if (cfg.has(key("transitions"))) {
    auto v = cfg.get_doubles(key("transitions"), {});
    if (v.size() != 9) throw ConfigError("transitions needs 9 values (row-major H, E, T)");
    for (int i = 0; i < 9; ++i) w.transitions.p[i / 3][i % 3] = v[i];
  }
  w.validate();
  return w;
}

ZipfRadialSampler::ZipfRadialSampler(double radius, double exponent) : radius_(radius) {
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(radius)));
  cdf_.resize(bins);
  double acc = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    acc += 1.0 / std::pow(static_cast<double>(b + 1), exponent);
    cdf_[b] = acc;
  }
  for (auto& v : cdf_) v /= acc;
}

double ZipfRadialSampler::sample_distance(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto b = static_cast<double>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
  const double hi = std::min(b + 1.0, radius_);
  return b + rng.uniform() * (hi - b);
}

HotspotLayout::HotspotLayout(std::vector<Hotspot> hotspots, double zipf_exponent)
    : hotspots_(std::move(hotspots)) {
  samplers_.reserve(hotspots_.size());
  for (const auto& h : hotspots_) samplers_.emplace_back(h.radius, zipf_exponent);
}

std::optional<std::size_t> HotspotLayout::find(Point p) const {
  for (std::size_t i = 0; i < hotspots_.size(); ++i) {
    if (hotspots_[i].contains(p)) return i;
  }
  return std::nullopt;
}

Point HotspotLayout::sample_in(std::size_t hotspot, Rng& rng) const {
  const double dist = samplers_[hotspot].sample_distance(rng);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return polar_offset(hotspots_[hotspot].center, dist, angle);
}

std::vector<Hotspot> place_hotspots(const WorldConfig& c, Rng& rng) {
  std::vector<Hotspot> out;
  if (c.hotspot_count == 0 || c.p_hot == 0.0) return out;
  const double r = std::sqrt(c.p_hot * c.width * c.height / (c.hotspot_count * std::numbers::pi));
  if (2.0 * r > std::min(c.width, c.height)) {
    throw ConfigError("p_hot too large: a hotspot of radius " + std::to_string(r) +
                      " does not fit in the world");
  }
  constexpr int kRestarts = 200;
  constexpr int kAttempts = 2000;
  for (int restart = 0; restart < kRestarts; ++restart) {
    out.clear();
    for (int h = 0; h < c.hotspot_count; ++h) {
      bool placed = false;
      for (int a = 0; a < kAttempts && !placed; ++a) {
        Point p{rng.uniform(r, c.width - r), rng.uniform(r, c.height - r)};
        placed = std::all_of(out.begin(), out.end(),
                             [&](const Hotspot& o) { return distance(o.center, p) >= 2.0 * r; });
        if (placed) out.push_back({p, r});
      }
      if (!placed) break;
    }
    if (static_cast<int>(out.size()) == c.hotspot_count) return out;
  }
  throw ConfigError("cannot place " + std::to_string(c.hotspot_count) +
                    " disjoint hotspots; lower p_hot or H_num");
}

Point spawn_position(const WorldConfig& c, const HotspotLayout& layout, Rng& rng) {
  if (!layout.empty() && rng.bernoulli(c.p_den)) {
    return layout.sample_in(rng.index(layout.hotspots().size()), rng);
  }
  return uniform_point(c, rng);
}

EntityDescriptor make_object(std::uint32_t uid, Point position, Rng& rng) {
  EntityDescriptor e;
  e.uid = uid;
  e.x = static_cast<float>(position.x);
  e.y = static_cast<float>(position.y);
  for (std::size_t k = 0; k < kAttributeCount; ++k) {
    e.attributes[k] = {static_cast<std::uint32_t>(k + 1), rng.next_u64()};
  }
  e.has_think = rng.bernoulli(0.1);
  e.dht_id = hash_entity(e);
  return e;
}

World init_world(const WorldConfig& c, Rng& rng) {
  c.validate();
  World w;
  w.layout = HotspotLayout(place_hotspots(c, rng), c.zipf_exponent);
  const int inside = w.layout.empty() ? 0 : static_cast<int>(std::floor(c.p_obj * c.object_count));
  w.objects.reserve(static_cast<std::size_t>(c.object_count));
  for (int j = 0; j < c.object_count; ++j) {
    Point p;
    if (j < inside) {
      p = w.layout.sample_in(rng.index(w.layout.hotspots().size()), rng);
    } else {
      do {
        p = uniform_point(c, rng);
      } while (w.layout.find(p).has_value());
    }
    w.objects.push_back(make_object(kObjectUidBase + static_cast<std::uint32_t>(j), p, rng));
    // Float storage can nudge a point across a disk boundary; re-draw if so.
    const bool want_inside = j < inside;
    if (w.layout.find(w.objects.back().position()).has_value() != want_inside) {
      w.objects.pop_back();
      --j;
    }
  }
  const int players = c.seasonal ? player_count(0.0, c.lambda, c.max_players) : c.max_players;
  for (int i = 0; i < players; ++i) {
    AvatarState a;
    a.id = static_cast<std::uint32_t>(i);
    a.position = spawn_position(c, w.layout, rng);
    a.speed = c.speed;
    w.avatars.push_back(a);
  }
  return w;
}

int player_count(double t, double lambda, int max_players) {
  return static_cast<int>(std::lround(std::abs(std::sin(std::numbers::pi * t / lambda)) * max_players));
}

AvatarState step_mobility(const AvatarState& avatar, const HotspotLayout& layout,
                          const TransitionMatrix& transitions, const WorldConfig& c, Rng& rng) {
  AvatarState next = avatar;
  next.mode = sample_mode(transitions, avatar.mode, rng);
  switch (next.mode) {
    case MobilityMode::Halt:
      next.travel_target.reset();
      break;
    case MobilityMode::Exploration: {
      next.travel_target.reset();
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double dist;
      if (layout.find(avatar.position)) {
        dist = power_law_distance(1.0, c.exploration_radius, c.exploration_exponent, rng);
      } else {
        dist = c.exploration_radius * std::sqrt(rng.uniform());
      }
      next.position = clamp_to_world(polar_offset(avatar.position, dist, angle), c);
      break;
    }
    case MobilityMode::Travelling: {
      if (!next.travel_target) next.travel_target = travel_target(c, layout, rng);
      const Point target = *next.travel_target;
      const double remaining = distance(next.position, target);
      if (remaining <= next.speed) {
        next.position = target;
        next.mode = MobilityMode::Halt;
        next.travel_target.reset();
      } else {
        const double f = next.speed / remaining;
        next.position = {next.position.x + (target.x - next.position.x) * f,
                         next.position.y + (target.y - next.position.y) * f};
      }
      break;
    }
  }
  return next;
}

std::uint32_t LoadSample::count_for(std::uint32_t uid) const {
  for (std::size_t i = 0; i < uids.size(); ++i) {
    if (uids[i] == uid) return aoi_counts[i];
  }
  return 0;
}

namespace {

void accumulate_counts(LoadSample& s, std::span<const Point> points, const PointGrid& grid,
                       double radius) {
  for (const auto& p : points) {
    std::uint32_t n = 0;
    grid.for_each_in_disk(p, radius, [&](std::size_t) { ++n; });
    s.aoi_counts.push_back(n);
  }
}

PointGrid avatar_grid(std::span<const AvatarState> avatars, double radius) {
  std::vector<Point> pos;
  pos.reserve(avatars.size());
  for (const auto& a : avatars) pos.push_back(a.position);
  return PointGrid(pos, radius);
}

std::uint64_t bandwidth(const LoadSample& s, std::uint32_t message_length) {
  std::uint64_t sum = 0;
  for (auto c : s.aoi_counts) sum += c;
  return sum * message_length;
}

}  // namespace

LoadSample compute_load(std::span<const EntityDescriptor> entities, std::span<const AvatarState> avatars,
                        double aoi_radius, std::uint32_t message_length, std::int64_t step) {
  LoadSample s;
  s.step = step;
  s.uids.reserve(entities.size());
  std::vector<Point> pts;
  pts.reserve(entities.size());
  for (const auto& e : entities) {
    s.uids.push_back(e.uid);
    pts.push_back(e.position());
  }
  accumulate_counts(s, pts, avatar_grid(avatars, aoi_radius), aoi_radius);
  s.total_bandwidth = bandwidth(s, message_length);
  return s;
}

LoadSample compute_load_with_avatars(std::span<const EntityDescriptor> entities,
                                     std::span<const AvatarState> avatars, double aoi_radius,
                                     std::uint32_t message_length, std::int64_t step,
                                     std::uint32_t avatar_uid_offset) {
  LoadSample s;
  s.step = step;
  std::vector<Point> pts;
  pts.reserve(entities.size() + avatars.size());
  for (const auto& e : entities) {
    s.uids.push_back(e.uid);
    pts.push_back(e.position());
  }
  for (const auto& a : avatars) {
    s.uids.push_back(a.id + avatar_uid_offset);
    pts.push_back(a.position);
  }
  accumulate_counts(s, pts, avatar_grid(avatars, aoi_radius), aoi_radius);
  s.total_bandwidth = bandwidth(s, message_length);
  return s;
}

ClientCountSampler::ClientCountSampler(int max_count, double alpha) : alpha_(alpha) {
  if (max_count < 1) throw ConfigError("client count support needs max_count >= 1");
  cdf_.resize(static_cast<std::size_t>(max_count));
  double acc = 0.0;
  for (int x = 1; x <= max_count; ++x) {
    acc += std::pow(static_cast<double>(x), -alpha);
    cdf_[x - 1] = acc;
  }
  for (auto& v : cdf_) v /= acc;
}

int ClientCountSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1)) + 1;
}

double ClientCountSampler::pmf(int x) const {
  if (x < 1 || x > max_count()) return 0.0;
  return x == 1 ? cdf_[0] : cdf_[x - 1] - cdf_[x - 2];
}

double ClientCountSampler::mean() const {
  double m = 0.0;
  for (int x = 1; x <= max_count(); ++x) m += x * pmf(x);
  return m;
}

int sample_client_count(Rng& rng, int max_count) {
  return ClientCountSampler(max_count).sample(rng);
}

WorkloadSimulator::WorkloadSimulator(const WorldConfig& config, Rng rng)
    : config_(config), rng_(std::move(rng)), world_(init_world(config_, rng_)) {
  next_id_ = static_cast<std::uint32_t>(world_.avatars.size());
}

void WorkloadSimulator::set_population(std::size_t target) {
  while (world_.avatars.size() > target) {
    const auto i = rng_.index(world_.avatars.size());
    world_.avatars.erase(world_.avatars.begin() + static_cast<std::ptrdiff_t>(i));
    ++leaves_;
  }
  while (world_.avatars.size() < target) {
    AvatarState a;
    a.id = next_id_++;
    a.position = spawn_position(config_, world_.layout, rng_);
    a.speed = config_.speed;
    world_.avatars.push_back(a);
    ++joins_;
  }
}

void WorkloadSimulator::step() {
  for (auto& a : world_.avatars) a = step_mobility(a, world_.layout, config_.transitions, config_, rng_);
}

void WorkloadSimulator::teleport(std::size_t index, Point to) {
  world_.avatars.at(index).position = clamp_to_world(to, config_);
}

}  // namespace mmosim
