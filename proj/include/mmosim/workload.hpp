#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmosim/config.hpp"
#include "mmosim/entity.hpp"
#include "mmosim/geometry.hpp"
#include "mmosim/rng.hpp"

namespace mmosim {

enum class MobilityMode : std::uint8_t { Halt = 0, Exploration = 1, Travelling = 2 };

const char* to_string(MobilityMode m);

// Row-stochastic 3x3 matrix over {Halt, Exploration, Travelling}.
struct TransitionMatrix {
  std::array<std::array<double, 3>, 3> p{};

  static TransitionMatrix defaults();
  double operator()(MobilityMode from, MobilityMode to) const {
    return p[static_cast<int>(from)][static_cast<int>(to)];
  }
  void validate() const;
};

struct WorldConfig {
  double width{5000.0};
  double height{5000.0};
  int hotspot_count{5};
  double p_hot{0.3};
  double p_den{0.8};
  double p_obj{0.7};
  int object_count{1000};
  int max_players{1000};
  // Season half-period, measured in aggregation windows.
  double lambda{200.0};
  bool seasonal{true};
  std::uint32_t message_length{100};
  double step_seconds{0.2};
  double aoi_radius{100.0};
  std::uint64_t seed{1};

  double speed{5.0};
  double exploration_radius{50.0};
  double exploration_exponent{1.4};
  double zipf_exponent{1.0};
  TransitionMatrix transitions{TransitionMatrix::defaults()};

  void validate() const;
  static WorldConfig from_config(const Config& cfg, const std::string& prefix = "workload.");
  // Same, with unset keys taken from `base`.
  static WorldConfig from_config(const Config& cfg, const std::string& prefix, WorldConfig base);
};

struct Hotspot {
  Point center;
  double radius{0.0};

  bool contains(Point p) const { return distance_sq(center, p) <= radius * radius; }
};

// Zipfian radial profile: the radius is cut into ceil(radius) unit bins and
// bin b is drawn with probability proportional to 1 / (b + 1)^s.
class ZipfRadialSampler {
 public:
  ZipfRadialSampler() = default;
  ZipfRadialSampler(double radius, double exponent);

  double sample_distance(Rng& rng) const;
  std::size_t bins() const { return cdf_.size(); }
  double radius() const { return radius_; }

 private:
  double radius_{0.0};
  std::vector<double> cdf_;
};

class HotspotLayout {
 public:
  HotspotLayout() = default;
  HotspotLayout(std::vector<Hotspot> hotspots, double zipf_exponent);

  const std::vector<Hotspot>& hotspots() const { return hotspots_; }
  bool empty() const { return hotspots_.empty(); }
  // Index of a hotspot containing p, if any.
  std::optional<std::size_t> find(Point p) const;
  Point sample_in(std::size_t hotspot, Rng& rng) const;

 private:
  std::vector<Hotspot> hotspots_;
  std::vector<ZipfRadialSampler> samplers_;
};

struct AvatarState {
  std::uint32_t id{0};
  Point position;
  MobilityMode mode{MobilityMode::Halt};
  std::optional<Point> travel_target;
  double speed{5.0};
};

struct World {
  HotspotLayout layout;
  std::vector<EntityDescriptor> objects;
  std::vector<AvatarState> avatars;
};

World init_world(const WorldConfig& config, Rng& rng);

// Places hotspots only; throws ConfigError when they cannot fit.
std::vector<Hotspot> place_hotspots(const WorldConfig& config, Rng& rng);

// Spawn position of a new player: a hotspot with probability p_den, else uniform.
Point spawn_position(const WorldConfig& config, const HotspotLayout& layout, Rng& rng);

EntityDescriptor make_object(std::uint32_t uid, Point position, Rng& rng);

// round(|sin(pi * t / lambda)| * max_players)
int player_count(double t, double lambda, int max_players);

AvatarState step_mobility(const AvatarState& avatar, const HotspotLayout& layout,
                          const TransitionMatrix& transitions, const WorldConfig& config, Rng& rng);

struct LoadSample {
  std::int64_t step{0};
  std::vector<std::uint32_t> uids;
  std::vector<std::uint32_t> aoi_counts;  // aligned with uids
  std::uint64_t total_bandwidth{0};       // bytes for this step

  std::uint32_t count_for(std::uint32_t uid) const;
};

// e_AOI for each entity: how many avatar AOI disks contain it (boundary inclusive).
LoadSample compute_load(std::span<const EntityDescriptor> entities, std::span<const AvatarState> avatars,
                        double aoi_radius, std::uint32_t message_length, std::int64_t step);

// Same, with avatars also acting as entities (uid = avatar id + avatar_uid_offset).
// An avatar's own AOI contains its entity and is counted.
LoadSample compute_load_with_avatars(std::span<const EntityDescriptor> entities,
                                     std::span<const AvatarState> avatars, double aoi_radius,
                                     std::uint32_t message_length, std::int64_t step,
                                     std::uint32_t avatar_uid_offset);

// Discrete power law P(x) ~ x^-alpha on {1, ..., max_count}, fitted to the
// observed clients-per-entity histogram (K = 0.5, alpha = 1.4).
class ClientCountSampler {
 public:
  static constexpr double kFitK = 0.5;
  static constexpr double kFitAlpha = 1.4;

  explicit ClientCountSampler(int max_count = 1000, double alpha = kFitAlpha);

  int sample(Rng& rng) const;
  double mean() const;
  double pmf(int x) const;
  int max_count() const { return static_cast<int>(cdf_.size()); }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  std::vector<double> cdf_;
};

int sample_client_count(Rng& rng, int max_count = 1000);

// Evolving population driven by the mobility model; joins use the spawn rule
// and leaves pick uniformly among present avatars.
class WorkloadSimulator {
 public:
  WorkloadSimulator(const WorldConfig& config, Rng rng);

  const WorldConfig& config() const { return config_; }
  const HotspotLayout& layout() const { return world_.layout; }
  const std::vector<EntityDescriptor>& objects() const { return world_.objects; }
  const std::vector<AvatarState>& avatars() const { return world_.avatars; }

  void set_population(std::size_t target);
  void step();
  // Moves one avatar to a new spot without changing its mode.
  void teleport(std::size_t index, Point to);

  std::size_t joins() const { return joins_; }
  std::size_t leaves() const { return leaves_; }

 private:
  WorldConfig config_;
  Rng rng_;
  World world_;
  std::uint32_t next_id_{0};
  std::size_t joins_{0};
  std::size_t leaves_{0};
};

}  // namespace mmosim
