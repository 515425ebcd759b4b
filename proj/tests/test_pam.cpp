#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "mmosim/pam.hpp"

using namespace mmosim;

namespace {

// Five neighbours of a radius-4 AOI on a 4x4 grid (tile side 2, corners masked).
struct FiveScene {
  Aoi p{{0.0, 0.0}, 4.0};
  std::vector<Aoi> n{
      {{-2.0, -1.0}, 0.1},  // A
      {{0.0, 1.0}, 0.1},    // B
      {{0.2, 0.2}, 0.24},   // C
      {{1.0, 0.0}, 0.1},    // D
      {{3.0, 0.0}, 0.1},    // E
  };
  enum { A, B, C, D, E };
};

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Tiles intersected by at least one disk, by direct geometric test.
int covered_oracle(const Aoi& p, const std::vector<Aoi>& n, int res) {
  const TileGrid g(p, res);
  int c = 0;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      if (g.masked(i, j)) continue;
      const auto t = g.tile(i, j);
      for (const auto& a : n) {
        if (intersects(a.disk(), t)) {
          ++c;
          break;
        }
      }
    }
  }
  return c;
}

}  // namespace

TEST_CASE("coverage of the two-disk 3x3 scene is five ninths") {
  const Aoi p{{0.0, 0.0}, 3.0};
  const std::vector<Aoi> n{{{-5.0, 0.0}, 2.5}, {{0.0, -5.0}, 2.5}};
  const auto r = coverage(p, n, 3);
  CHECK(r.grid.unmasked_tiles() == 9);
  CHECK(r.covered_tiles == 5);
  CHECK(r.grid.count(0, 0) == 2);
  CHECK(coverage(p, {}, 3).covered_tiles == 0);
}

TEST_CASE("tile approximation converges to the covered area") {
  Rng rng(4);
  const Aoi p{{0.0, 0.0}, 10.0};
  std::vector<Aoi> n;
  for (int i = 0; i < 4; ++i) n.push_back({{rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0)}, rng.uniform(3.0, 8.0)});
  // Monte-Carlo estimate of the covered fraction of p's disk.
  long hit = 0, inside = 0;
  for (int k = 0; k < 1000000; ++k) {
    const Point q{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    if (!p.disk().contains(q)) continue;
    ++inside;
    for (const auto& a : n) {
      if (a.disk().contains(q)) {
        ++hit;
        break;
      }
    }
  }
  const double exact = static_cast<double>(hit) / inside;
  double prev = 1.0;
  for (int res : {8, 32, 128}) {
    const auto r = coverage(p, n, res);
    const double frac = static_cast<double>(r.covered_tiles) / r.grid.unmasked_tiles();
    const double err = std::abs(frac - exact);
    CHECK(err <= prev + 1e-3);
    prev = err;
  }
  CHECK(prev < 0.03);
}

TEST_CASE("coverage model agrees with the direct count") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Aoi p{{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)}, rng.uniform(5.0, 20.0)};
    std::vector<Aoi> n;
    const int k = static_cast<int>(rng.uniform_int(0, 6));
    for (int i = 0; i < k; ++i) n.push_back({{rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0)}, rng.uniform(1.0, 15.0)});
    const int res = static_cast<int>(rng.uniform_int(2, 40));
    const CoverageModel m(p, n, res);
    std::vector<std::size_t> all(n.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(m.covered(all) == covered_oracle(p, n, res));
    CHECK(coverage(p, n, res).covered_tiles == covered_oracle(p, n, res));
  }
}

TEST_CASE("score heuristic on the tile-score scene picks the optimum") {
  const Aoi p{{0.0, 0.0}, 3.0};
  const TileGrid g(p, 3);
  const double half = g.tile_side() / 2.0;
  const double plus = half * 1.2;
  const std::vector<Aoi> n{
      {g.tile(1, 0).center(), plus},                          // A
      {{g.tile(0, 1).center().x, g.tile(0, 1).y1}, 0.05},   // B
      {g.tile(1, 2).center(), plus},                          // C
  };
  const auto pick = score_heuristic(p, n, 2, 3);
  CHECK(sorted(pick) == std::vector<std::size_t>{0, 2});
  const auto opt = brute_force_max_coverage(p, n, 2, 3);
  CHECK(opt.covered_tiles == 7);
  CHECK(CoverageModel(p, n, 3).covered(pick) == 7);
}

TEST_CASE("score heuristic misses the optimum on the five-AOI scene") {
  FiveScene s;
  const CoverageModel m(s.p, s.n, 4);
  CHECK(TileGrid(s.p, 4).unmasked_tiles() == 12);
  CHECK(m.tiles(FiveScene::C).count() == 3);
  const auto pick = score_heuristic(s.p, s.n, 2, 4);
  CHECK(sorted(pick) == std::vector<std::size_t>{FiveScene::A, FiveScene::E});
  CHECK(m.covered(pick) == 4);
  const auto opt = brute_force_select(m, 2);
  CHECK(opt.covered_tiles == 5);
  CHECK(opt.subset == std::vector<std::size_t>{FiveScene::A, FiveScene::C});
  const std::vector<std::size_t> ce{FiveScene::C, FiveScene::E};
  CHECK(m.covered(ce) == 5);
}

TEST_CASE("greedy heuristic on the five-AOI scene") {
  FiveScene s;
  const auto pick = greedy_heuristic(s.p, s.n, 3, 4);
  CHECK(pick == std::vector<std::size_t>{FiveScene::C, FiveScene::A, FiveScene::E});
  const auto one = greedy_heuristic(s.p, s.n, 1, 4);
  CHECK(one == std::vector<std::size_t>{FiveScene::C});
}

TEST_CASE("heuristic edge cases") {
  FiveScene s;
  CHECK(greedy_heuristic(s.p, s.n, 0, 4).empty());
  CHECK(sorted(score_heuristic(s.p, s.n, 9, 4)) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(greedy_heuristic(s.p, s.n, 9, 4).size() == 5);
  CHECK(brute_force_max_coverage(s.p, s.n, 0, 4).covered_tiles == 0);
  CHECK(brute_force_max_coverage(s.p, s.n, 5, 4).covered_tiles == coverage(s.p, s.n, 4).covered_tiles);
  CHECK(binomial_coefficient(10, 3) == 120.0);
  std::vector<Aoi> many(60, Aoi{{0.0, 0.0}, 1.0});
  CHECK_THROWS_AS(brute_force_max_coverage(s.p, many, 10, 4), std::invalid_argument);
}

TEST_CASE("greedy stays within the 1-1/e bound of the optimum") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const Aoi p{{0.0, 0.0}, 10.0};
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto d = static_cast<std::size_t>(rng.uniform_int(1, 4));
    std::vector<Aoi> n;
    for (std::size_t i = 0; i < k; ++i) n.push_back({{rng.uniform(-18.0, 18.0), rng.uniform(-18.0, 18.0)}, rng.uniform(3.0, 12.0)});
    // Exhaustive oracle over every subset of size d.
    int best = 0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != std::min(d, k)) continue;
      std::vector<Aoi> sub;
      for (std::size_t i = 0; i < k; ++i) {
        if (mask & (1u << i)) sub.push_back(n[i]);
      }
      best = std::max(best, covered_oracle(p, sub, 16));
    }
    const CoverageModel m(p, n, 16);
    CHECK(brute_force_select(m, d).covered_tiles == best);
    CHECK(m.covered(greedy_select(m, d)) >= std::ceil((1.0 - 1.0 / std::exp(1.0)) * best));
  }
}

TEST_CASE("heuristic names round-trip") {
  CHECK(parse_heuristic("greedy") == Heuristic::Greedy);
  CHECK(parse_heuristic(to_string(Heuristic::Score)) == Heuristic::Score);
  CHECK_THROWS_AS(parse_heuristic("best"), ConfigError);
}

TEST_CASE("jaccard coefficient") {
  LocalReplica a;
  std::vector<AuthoritativeEntity> srv{{1, {0.0, 0.0}}, {2, {10.0, 0.0}}};
  CHECK(jc(a, {}, 10.0) == 1.0);
  CHECK(jc(a, srv, 10.0) == 0.0);
  a.upsert({1, {0.0, 0.0}, 1, ReplicaSource::Server});
  a.upsert({2, {15.0, 0.0}, 1, ReplicaSource::Server});
  CHECK(jc(a, srv, 10.0) == doctest::Approx(0.75));
  a.upsert({3, {0.0, 0.0}, 1, ReplicaSource::Server});
  CHECK(jc(a, srv, 10.0) == doctest::Approx(0.5));
  LocalReplica b;
  b.upsert({1, {0.0, 0.0}, 1, ReplicaSource::Server});
  b.upsert({2, {10.0, 0.0}, 1, ReplicaSource::Server});
  CHECK(jc(b, srv, 10.0) == 1.0);
  std::vector<AuthoritativeEntity> other{{7, {0.0, 0.0}}};
  CHECK(jc(b, other, 10.0) == 0.0);
}

TEST_CASE("replica keeps the freshest record") {
  LocalReplica r;
  r.upsert({5, {1.0, 1.0}, 3, ReplicaSource::Server});
  r.upsert({5, {2.0, 2.0}, 2, ReplicaSource::Overlay});
  CHECK(r.find(5)->position.x == 1.0);
  r.upsert({5, {4.0, 4.0}, 7, ReplicaSource::Overlay});
  CHECK(r.find(5)->timestamp == 7);
  CHECK(r.find(5)->source == ReplicaSource::Overlay);
  r.upsert({2, {0.0, 0.0}, 1, ReplicaSource::Server});
  CHECK(r.entries().front().uid == 2);
  r.prune_outside(Disk{{0.0, 0.0}, 2.0});
  CHECK(r.size() == 1);
  CHECK(r.find(5) == nullptr);
}

TEST_CASE("overlay queries import neighbour knowledge inside the AOI") {
  const Aoi p{{0.0, 0.0}, 10.0};
  LocalReplica n1, n2, n3;
  n1.upsert({10, {1.0, 1.0}, 5, ReplicaSource::Server});
  n1.upsert({11, {50.0, 50.0}, 5, ReplicaSource::Server});
  n2.upsert({10, {2.0, 2.0}, 8, ReplicaSource::Server});
  n2.upsert({12, {-3.0, 0.0}, 6, ReplicaSource::Server});
  n3.upsert({99, {0.0, 0.0}, 9, ReplicaSource::Server});  // the querying peer itself
  std::vector<OverlayNeighbor> nb{{1, {3.0, 0.0}, &n1}, {2, {0.0, 4.0}, &n2}, {3, {40.0, 0.0}, &n3}};

  SUBCASE("nothing useful leaves the replica unchanged") {
    LocalReplica mine;
    std::vector<OverlayNeighbor> far{{3, {40.0, 0.0}, &n3}};
    query_overlay(p, 99, far, 10, mine);
    CHECK(mine.empty());
  }
  SUBCASE("freshest wins and the result ignores order") {
    LocalReplica x, y;
    query_overlay(p, 99, nb, 10, x);
    std::reverse(nb.begin(), nb.end());
    query_overlay(p, 99, nb, 10, y);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x.entries()[i].uid == y.entries()[i].uid);
      CHECK(x.entries()[i].position == y.entries()[i].position);
    }
    REQUIRE(x.find(10) != nullptr);
    CHECK(x.find(10)->position.x == 2.0);
    CHECK(x.find(11) == nullptr);
    CHECK(x.find(1) != nullptr);
    CHECK(x.find(99) == nullptr);
  }
}

TEST_CASE("authoritative AOI query") {
  std::vector<AuthoritativeEntity> st{{3, {0.0, 0.0}}, {1, {1.0, 0.0}}, {2, {9.0, 9.0}}};
  const auto in = entities_in_aoi(st, Disk{{0.0, 0.0}, 2.0}, 3);
  REQUIRE(in.size() == 1);
  CHECK(in[0].uid == 1);
}

TEST_CASE("gossip between two overlapping peers") {
  GossipConfig cfg;
  cfg.d = 2;
  std::vector<PeerView> views(3);
  std::vector<Point> pos{{0.0, 0.0}, {20.0, 0.0}, {500.0, 500.0}};
  std::vector<char> alive{1, 1, 1};
  views[0].random_layer.push_back({1, pos[1], 0});
  GossipNetwork net{views, pos, alive};
  Rng rng(1);
  SUBCASE("an isolated peer only advances its clock") {
    CHECK(gossip_cycle(2, net, 5, cfg, rng) == 0);
    CHECK(views[2].iteration == 5);
    CHECK(views[2].coverage_layer.empty());
  }
  SUBCASE("both end up in each other's coverage layer") {
    for (std::int64_t it = 1; it <= 8; ++it) {
      gossip_cycle(0, net, it, cfg, rng);
      gossip_cycle(1, net, it, cfg, rng);
    }
    auto holds = [&](std::size_t a, std::uint32_t b) {
      const auto& c = views[a].coverage_layer;
      return std::any_of(c.begin(), c.end(), [&](const PeerDescriptor& d) { return d.peer_id == b; });
    };
    CHECK(holds(0, 1));
    CHECK(holds(1, 0));
  }
}

TEST_CASE("candidate ranking drops stale entries and self") {
  GossipConfig cfg;
  cfg.d = 3;
  cfg.stale_threshold = 5;
  std::vector<PeerDescriptor> c{{0, {0.0, 0.0}, 100}, {1, {10.0, 0.0}, 90}, {2, {10.0, 0.0}, 100},
                                {2, {12.0, 0.0}, 99}, {3, {5.0, 5.0}, 98}};
  const auto r = rank_candidates(0, {0.0, 0.0}, c, 100, cfg);
  CHECK(r.size() == 2);
  for (const auto& d : r) {
    CHECK(d.peer_id != 0);
    CHECK(d.peer_id != 1);
    if (d.peer_id == 2) CHECK(d.timestamp == 100);
  }
}

TEST_CASE("server traffic only at update instants") {
  PamConfig c;
  c.peers = 1;
  c.ts = 1.0;
  c.overlay = false;
  c.world.object_count = 50;
  PamSimulation sim(c, Rng(2));
  int nonzero = 0;
  for (int s = 0; s < 40; ++s) nonzero += sim.step().server_bytes > 0;
  CHECK(nonzero == 10);
}

TEST_CASE("a small simulation stays consistent") {
  PamConfig c;
  c.peers = 80;
  c.world.object_count = 100;
  c.world.width = c.world.height = 300.0;
  c.steps = 30;
  PamSimulation sim(c, Rng(3));
  for (int s = 0; s < 30; ++s) {
    const auto m = sim.step();
    CHECK(m.mean_jc >= 0.0);
    CHECK(m.mean_jc <= 1.0);
    if (m.mean_ac >= 0.0) CHECK(m.mean_ac <= 1.0);
  }
  for (std::size_t i = 0; i < 80; ++i) {
    CHECK(sim.view(i).coverage_layer.size() <= c.gossip.d);
    const double a = sim.ac_of(i);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("pam config validation") {
  CHECK_THROWS_AS(PamConfig::from_config(Config::parse("[pam]\nT_s = 0.3\n")), ConfigError);
  const auto p = PamConfig::from_config(Config::parse("[pam]\nT_s = 2.5\nheuristic = score\npeers = 40\n"));
  CHECK(p.ts == 2.5);
  CHECK(p.gossip.heuristic == Heuristic::Score);
  CHECK(p.world.max_players == 40);
}
