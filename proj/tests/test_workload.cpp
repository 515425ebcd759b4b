#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mmosim/workload.hpp"

using namespace mmosim;

namespace {

WorldConfig table_world() {
  WorldConfig c;
  c.max_players = 1000;
  return c;
}

bool in_any(const std::vector<Hotspot>& hs, Point p) {
  return std::any_of(hs.begin(), hs.end(), [&](const Hotspot& h) { return h.contains(p); });
}

}  // namespace

TEST_CASE("player count follows the rectified season") {
  CHECK(player_count(0.0, 200.0, 1000) == 0);
  CHECK(player_count(100.0, 200.0, 1000) == 1000);
  CHECK(player_count(50.0, 200.0, 1000) == 707);
  for (int t = 0; t <= 200; t += 7) CHECK(player_count(t, 200.0, 1000) == player_count(400 - t, 200.0, 1000));
  CHECK(player_count(300.0, 200.0, 1000) == 1000);
}

TEST_CASE("hotspots cover the configured area fraction") {
  auto c = table_world();
  Rng rng(3);
  const auto hs = place_hotspots(c, rng);
  REQUIRE(hs.size() == 5);
  double area = 0.0;
  for (const auto& h : hs) {
    area += std::numbers::pi * h.radius * h.radius;
    CHECK(h.center.x - h.radius >= 0.0);
    CHECK(h.center.y + h.radius <= c.height);
  }
  CHECK(area / (c.width * c.height) == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("exactly floor(p_obj * O_num) objects start inside hotspots") {
  auto c = table_world();
  Rng rng(11);
  const auto w = init_world(c, rng);
  REQUIRE(w.objects.size() == 1000);
  int inside = 0;
  for (const auto& o : w.objects) inside += in_any(w.layout.hotspots(), o.position());
  CHECK(inside == 700);
  for (const auto& o : w.objects) CHECK(o.uid >= kObjectUidBase);
}

TEST_CASE("no hotspots means everything is uniform") {
  auto c = table_world();
  c.p_hot = 0.0;
  Rng rng(5);
  const auto w = init_world(c, rng);
  CHECK(w.layout.empty());
  CHECK(w.objects.size() == 1000);
}

TEST_CASE("world initialisation is deterministic") {
  auto c = table_world();
  Rng a(9), b(9);
  const auto w1 = init_world(c, a);
  const auto w2 = init_world(c, b);
  REQUIRE(w1.objects.size() == w2.objects.size());
  for (std::size_t i = 0; i < w1.objects.size(); ++i) {
    CHECK(w1.objects[i].x == w2.objects[i].x);
    CHECK(w1.objects[i].dht_id == w2.objects[i].dht_id);
  }
}

TEST_CASE("zipf radial density falls with distance") {
  const ZipfRadialSampler z(100.0, 1.0);
  CHECK(z.bins() == 100);
  Rng rng(1);
  std::vector<int> bins(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const double d = z.sample_distance(rng);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 100.0);
    ++bins[std::min(9, static_cast<int>(d / 10.0))];
  }
  for (int b = 1; b < 10; ++b) CHECK(bins[b] <= bins[b - 1]);
}

TEST_CASE("halt is absorbing under an identity row") {
  auto c = table_world();
  TransitionMatrix t = TransitionMatrix::defaults();
  t.p[0] = {1.0, 0.0, 0.0};
  AvatarState a;
  a.position = {10.0, 20.0};
  Rng rng(2);
  const auto n = step_mobility(a, HotspotLayout{}, t, c, rng);
  CHECK(n.mode == MobilityMode::Halt);
  CHECK(n.position == a.position);
}

TEST_CASE("travelling advances exactly speed units along the segment") {
  auto c = table_world();
  TransitionMatrix t = TransitionMatrix::defaults();
  t.p[2] = {0.0, 0.0, 1.0};
  AvatarState a;
  a.position = {100.0, 100.0};
  a.mode = MobilityMode::Travelling;
  a.travel_target = Point{106.0, 108.0};
  a.speed = 3.0;
  Rng rng(2);
  const auto n = step_mobility(a, HotspotLayout{}, t, c, rng);
  CHECK(n.mode == MobilityMode::Travelling);
  CHECK(n.position.x == doctest::Approx(101.8));
  CHECK(n.position.y == doctest::Approx(102.4));
}

TEST_CASE("long runs visit every mode and favour hotspots") {
  auto c = table_world();
  Rng rng(4);
  const auto w = init_world(c, rng);
  AvatarState a;
  a.position = {c.width / 2, c.height / 2};
  std::array<long, 3> occ{};
  long inside = 0;
  const long steps = 100000;
  for (long s = 0; s < steps; ++s) {
    a = step_mobility(a, w.layout, c.transitions, c, rng);
    ++occ[static_cast<int>(a.mode)];
    inside += w.layout.find(a.position).has_value();
    CHECK_FALSE((a.mode == MobilityMode::Travelling) != a.travel_target.has_value());
  }
  for (long o : occ) CHECK(o > 0);
  CHECK(static_cast<double>(inside) / steps > c.p_hot);
}

TEST_CASE("load counts match a brute-force containment oracle") {
  SUBCASE("empty world") {
    const auto s = compute_load({}, {}, 10.0, 100, 0);
    CHECK(s.total_bandwidth == 0);
  }
  SUBCASE("one entity inside three AOIs") {
    EntityDescriptor e;
    e.uid = 42;
    std::vector<AvatarState> av(4);
    av[0].position = {1.0, 0.0};
    av[1].position = {0.0, 5.0};
    av[2].position = {-3.0, 0.0};
    av[3].position = {50.0, 50.0};
    std::vector<EntityDescriptor> es{e};
    const auto s = compute_load(es, av, 5.0, 100, 3);
    CHECK(s.count_for(42) == 3);
    CHECK(s.total_bandwidth == 300);
  }
  SUBCASE("random scene") {
    Rng rng(8);
    std::vector<EntityDescriptor> es(20);
    for (std::uint32_t i = 0; i < es.size(); ++i) {
      es[i].uid = 100 + i;
      es[i].x = static_cast<float>(rng.uniform(0.0, 100.0));
      es[i].y = static_cast<float>(rng.uniform(0.0, 100.0));
    }
    std::vector<AvatarState> av(10);
    for (auto& a : av) a.position = {rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)};
    const double r = 25.0;
    const auto s = compute_load(es, av, r, 100, 0);
    std::uint64_t total = 0;
    for (const auto& e : es) {
      std::uint32_t n = 0;
      for (const auto& a : av) {
        const double dx = a.position.x - e.position().x;
        const double dy = a.position.y - e.position().y;
        n += dx * dx + dy * dy <= r * r;
      }
      CHECK(s.count_for(e.uid) == n);
      total += n * 100ull;
    }
    CHECK(s.total_bandwidth == total);
  }
}

TEST_CASE("client counts follow the truncated power law") {
  const ClientCountSampler cc(1000);
  double num = 0.0, den = 0.0;
  for (int x = 1; x <= 1000; ++x) {
    num += std::pow(x, 1.0 - 1.4);
    den += std::pow(x, -1.4);
  }
  CHECK(cc.mean() == doctest::Approx(num / den).epsilon(1e-9));

  Rng rng(12);
  const int n = 1000000;
  std::map<int, int> hist;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int x = cc.sample(rng);
    REQUIRE(x >= 1);
    REQUIRE(x <= 1000);
    sum += x;
    if (x <= 8) ++hist[x];
  }
  CHECK(sum / n == doctest::Approx(num / den).epsilon(0.03));
  // Log-log slope between 1 and 8.
  const double slope = std::log(static_cast<double>(hist[8]) / hist[1]) / std::log(8.0);
  CHECK(slope == doctest::Approx(-1.4).epsilon(0.03));

  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) CHECK(cc.sample(a) == cc.sample(b));
}

TEST_CASE("population tracks the requested size") {
  auto c = table_world();
  c.max_players = 200;
  WorkloadSimulator wl(c, Rng(6));
  for (std::size_t target : {50u, 200u, 120u, 0u, 30u}) {
    wl.step();
    wl.set_population(target);
    CHECK(wl.avatars().size() == target);
  }
  CHECK(wl.joins() >= 200);
  CHECK(wl.leaves() >= 200);
}

TEST_CASE("invalid worlds are rejected") {
  auto c = table_world();
  c.p_hot = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = table_world();
  c.step_seconds = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto cfg = Config::parse("[workload]\nP_max = 10\nlambda = 50\n");
  const auto w = WorldConfig::from_config(cfg);
  CHECK(w.max_players == 10);
  CHECK(w.lambda == 50.0);
}
