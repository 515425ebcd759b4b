#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmosim/config.hpp"
#include "mmosim/geometry.hpp"
#include "mmosim/rng.hpp"
#include "mmosim/workload.hpp"

namespace mmosim {

struct Aoi {
  Point center;
  double radius{1.0};

  Disk disk() const { return {center, radius}; }
};

// t x t tiles over the AOI's bounding square. Tiles whose centre lies
// outside the AOI disk are masked and never counted.
class TileGrid {
 public:
  TileGrid(const Aoi& p, int resolution);

  int resolution() const { return res_; }
  double tile_side() const { return side_; }
  Rect tile(int row, int col) const;
  bool masked(int row, int col) const { return mask_[idx(row, col)] != 0; }
  int count(int row, int col) const { return counts_[idx(row, col)]; }
  void increment(int row, int col) { ++counts_[idx(row, col)]; }
  int unmasked_tiles() const;

 private:
  std::size_t idx(int row, int col) const { return static_cast<std::size_t>(row) * res_ + col; }

  Aoi p_;
  int res_;
  double side_;
  std::vector<char> mask_;
  std::vector<int> counts_;
};

struct CoverageResult {
  int covered_tiles{0};
  TileGrid grid;
};

// Tile-approximated coverage of p by the neighbour AOIs.
CoverageResult coverage(const Aoi& p, std::span<const Aoi> neighbors, int resolution);

// Bitset of the unmasked tiles of p's grid that one AOI intersects.
class TileSet {
 public:
  TileSet() = default;
  explicit TileSet(std::size_t words) : words_(words, 0) {}

  void set(std::size_t bit) { words_[bit >> 6] |= std::uint64_t{1} << (bit & 63); }
  // Sets bits [lo, hi).
  void set_range(std::size_t lo, std::size_t hi);
  void intersect(const TileSet& other);
  bool test(std::size_t bit) const { return (words_[bit >> 6] >> (bit & 63)) & 1; }
  int count() const;
  int count_union(const TileSet& other) const;
  void merge(const TileSet& other);
  bool empty() const;
  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  std::vector<std::uint64_t> words_;
};

// Precomputed tile sets of every neighbour for a fixed P.
class CoverageModel {
 public:
  CoverageModel(const Aoi& p, std::span<const Aoi> neighbors, int resolution);

  std::size_t size() const { return sets_.size(); }
  const TileSet& tiles(std::size_t i) const { return sets_[i]; }
  int covered(std::span<const std::size_t> subset) const;
  std::size_t words() const { return words_; }

 private:
  std::size_t words_{0};
  std::vector<TileSet> sets_;
};

// Both heuristics return indices into `neighbors`, in selection order.
std::vector<std::size_t> score_heuristic(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d, int resolution);
std::vector<std::size_t> greedy_heuristic(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d, int resolution);
std::vector<std::size_t> score_select(const CoverageModel& model, std::size_t d);
std::vector<std::size_t> greedy_select(const CoverageModel& model, std::size_t d);

struct BruteForceResult {
  std::vector<std::size_t> subset;
  int covered_tiles{0};
};

inline constexpr double kBruteForceLimit = 1e6;

double binomial_coefficient(std::size_t n, std::size_t k);

// Exact optimum over all d-subsets; the lexicographically first wins ties.
// Throws std::invalid_argument when C(n, d) exceeds `limit`.
BruteForceResult brute_force_max_coverage(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d,
                                          int resolution, double limit = kBruteForceLimit);
BruteForceResult brute_force_select(const CoverageModel& model, std::size_t d, double limit = kBruteForceLimit);

enum class Heuristic : std::uint8_t { Score, Greedy };

const char* to_string(Heuristic h);
Heuristic parse_heuristic(const std::string& name);

struct PeerDescriptor {
  std::uint32_t peer_id{0};
  Point position;
  std::int64_t timestamp{0};
};

struct PeerView {
  std::vector<PeerDescriptor> random_layer;
  std::vector<PeerDescriptor> coverage_layer;
  // Ids learned by the random layer, waiting to be offered to the coverage layer.
  std::vector<PeerDescriptor> arrivals;
  std::int64_t iteration{0};
};

struct GossipConfig {
  std::size_t d{10};
  std::size_t random_view{20};
  std::int64_t stale_threshold{20};
  int random_period{4};
  int coverage_period{1};
  Heuristic heuristic{Heuristic::Greedy};
  int resolution{32};
  double aoi_radius{30.0};

  void validate() const;
};

struct GossipNetwork {
  std::vector<PeerView>& views;
  std::span<const Point> positions;
  std::span<const char> alive;
};

// Ranks candidate descriptors for `self`: stale and duplicate entries are
// dropped, fresher entries come first, then the heuristic picks up to d.
std::vector<PeerDescriptor> rank_candidates(std::uint32_t self, Point self_position,
                                            std::vector<PeerDescriptor> candidates, std::int64_t iteration,
                                            const GossipConfig& cfg);

// One gossip iteration of `self`; each layer runs when its period divides the iteration.
// Returns the number of messages exchanged.
int gossip_cycle(std::uint32_t self, GossipNetwork& net, std::int64_t iteration, const GossipConfig& cfg, Rng& rng);

enum class ReplicaSource : std::uint8_t { Server, Overlay };

struct ReplicaEntry {
  std::uint32_t uid{0};
  Point position;
  std::int64_t timestamp{0};
  ReplicaSource source{ReplicaSource::Server};
};

// One record per uid, kept sorted by uid.
class LocalReplica {
 public:
  void clear() { entries_.clear(); }
  // Inserts or replaces when the incoming record is strictly fresher.
  void upsert(const ReplicaEntry& e);
  void assign_sorted(std::vector<ReplicaEntry> entries) { entries_ = std::move(entries); }
  // Full refresh from the server covering `area` at time t.
  void assign_from_server(std::vector<ReplicaEntry> entries, std::int64_t t, const Disk& area);
  // True when the last server refresh already reported on this position at or after t.
  bool superseded(const ReplicaEntry& e) const;
  const ReplicaEntry* find(std::uint32_t uid) const;
  // Removes entries whose believed position lies outside the disk.
  void prune_outside(const Disk& aoi);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ReplicaEntry>& entries() const { return entries_; }

 private:
  std::vector<ReplicaEntry> entries_;
  std::int64_t server_time_{-1};
  Disk server_area_;
};

struct OverlayNeighbor {
  std::uint32_t uid{0};
  Point position;
  const LocalReplica* replica{nullptr};
};

// Imports each neighbour's own position and its known entities that fall
// inside p's AOI, freshest record per uid winning.
void query_overlay(const Aoi& p, std::uint32_t self_uid, std::span<const OverlayNeighbor> neighbors,
                   std::int64_t now, LocalReplica& replica);

struct ServerMessageFormat {
  std::uint32_t header_bytes{8};
  std::uint32_t record_bytes{24};
};

struct AuthoritativeEntity {
  std::uint32_t uid{0};
  Point position;
};

// Entities inside the disk, excluding `self_uid`, sorted by uid.
std::vector<AuthoritativeEntity> entities_in_aoi(std::span<const AuthoritativeEntity> state, const Disk& aoi,
                                                 std::uint32_t self_uid);

// Modified Jaccard coefficient between a replica and the authoritative set.
double jc(const LocalReplica& client, std::span<const AuthoritativeEntity> server, double d_max);

// A 1000 x 1000 world with small AOIs; the workload defaults target SAM.
inline WorldConfig pam_default_world() {
  WorldConfig w;
  w.width = 1000.0;
  w.height = 1000.0;
  w.aoi_radius = 30.0;
  w.seasonal = false;
  w.step_seconds = 0.25;
  w.max_players = 500;
  return w;
}

struct PamConfig {
  WorldConfig world{pam_default_world()};
  int peers{500};
  double step_seconds{0.25};
  double ts{1.0};
  bool overlay{true};
  GossipConfig gossip;
  ServerMessageFormat message;
  std::int64_t steps{240};
  std::int64_t warmup_steps{40};
  int ac_every{4};
  double ac_exact_limit{5000};
  // Grid used to score AC; 0 means the heuristic's own resolution.
  int ac_resolution{0};

  void validate() const;
  static PamConfig from_config(const Config& cfg);
};

struct PamStepMetrics {
  std::int64_t step{0};
  double mean_jc{0.0};
  double mean_ac{0.0};  // negative when not sampled this step
  std::uint64_t server_bytes{0};
  std::uint64_t overlay_msgs{0};
  std::size_t ac_exact{0};
  std::size_t ac_approx{0};
};

class PamSimulation {
 public:
  PamSimulation(PamConfig config, Rng rng);

  PamStepMetrics step();
  std::int64_t current_step() const { return step_; }
  const PamConfig& config() const { return config_; }
  std::span<const Point> positions() const { return positions_; }
  const PeerView& view(std::size_t peer) const { return views_[peer]; }
  const LocalReplica& replica(std::size_t peer) const { return replicas_[peer]; }
  std::vector<AuthoritativeEntity> authoritative() const;
  // Moves a peer and keeps its mobility state (scripted scenarios).
  void teleport(std::size_t peer, Point to);
  double ac_of(std::size_t peer, bool* exact = nullptr) const;
  const std::vector<EntityDescriptor>& objects() const { return workload_.objects(); }

 private:
  void server_phase(PamStepMetrics& m);
  void overlay_phase(PamStepMetrics& m);
  void sync_positions();

  PamConfig config_;
  Rng rng_;
  WorkloadSimulator workload_;
  std::vector<Point> positions_;
  std::vector<char> alive_;
  std::vector<PeerView> views_;
  std::vector<LocalReplica> replicas_;
  std::vector<int> phase_;
  std::int64_t update_every_{1};
  std::int64_t step_{0};
};

}  // namespace mmosim
