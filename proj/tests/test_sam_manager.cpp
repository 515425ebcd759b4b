#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "mmosim/sam_manager.hpp"
#include "mmosim/workload.hpp"

using namespace mmosim;

namespace {

const double kEpoch = 60.0;

NodeSpec cloud(int id, double cap = 10e6) { return {id, NodeKind::Cloud, cap, 0.12 / 1e9, 0.26 / 60.0, 0.0}; }
NodeSpec peer(int id, double cap = 1e6) { return {id, NodeKind::Peer, cap, 0.0, 0.0, 0.01}; }

SystemView view_of(std::vector<NodeSpec> nodes, Assignment host, std::vector<double> loads) {
  SystemView v;
  v.nodes = std::move(nodes);
  v.active.assign(v.nodes.size(), 1);
  v.host = std::move(host);
  v.predicted = loads;
  v.current = loads;
  v.slope.assign(loads.size(), 0.0);
  v.objects.assign(loads.size(), 10.0);
  v.backed_up.assign(loads.size(), 0);
  return v;
}

// Independent recomputation of the epoch cost.
double cost_oracle(const Assignment& host, const std::vector<NodeSpec>& nodes, const std::vector<double>& loads) {
  double c = 0.0;
  std::vector<char> used(nodes.size(), 0);
  for (std::size_t v = 0; v < host.size(); ++v) {
    c += loads[v] * kEpoch * nodes[host[v]].bandwidth_cost;
    used[host[v]] = 1;
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (used[n] && nodes[n].is_cloud()) c += nodes[n].rent_cost;
  }
  return c;
}

}  // namespace

TEST_CASE("local prediction only reports significant errors") {
  LoadPredictor p;
  auto first = update_local_prediction(p, 100.0, 0.05, 60.0);
  REQUIRE(first);
  CHECK(first->level == 100.0);
  CHECK_FALSE(update_local_prediction(p, 100.0, 0.05, 60.0));
  for (int i = 0; i < 20; ++i) CHECK_FALSE(update_local_prediction(p, 102.0, 0.05, 60.0));
  CHECK(p.level == doctest::Approx(102.0).epsilon(1e-4));

  SUBCASE("a step change emits exactly one message") {
    int sent = 0;
    int at = -1;
    for (int i = 0; i < 30; ++i) {
      if (update_local_prediction(p, i < 10 ? 102.0 : 200.0, 0.05, 60.0)) {
        ++sent;
        at = i;
      }
    }
    CHECK(sent == 1);
    CHECK(at == 10);
    CHECK(p.last_sent == 200.0);
    CHECK(p.last_sent_slope == doctest::Approx((200.0 - 102.0) / 60.0).epsilon(1e-3));
  }
}

TEST_CASE("forecast store applies messages in order") {
  std::vector<Forecast> store(3);
  CHECK(apply_prediction_updates(store, {}) == 0);
  CHECK_FALSE(store[0].known);
  const std::vector<PredictionMessage> msgs{{1, 5.0, 0.1}, {1, 7.0, 0.2}, {9, 1.0, 0.0}};
  CHECK(apply_prediction_updates(store, msgs) == 1);
  CHECK(store[1].level == 7.0);
  CHECK(store[1].slope == 0.2);
  CHECK_FALSE(store[0].known);
  CHECK_FALSE(store[2].known);
}

TEST_CASE("relative risk") {
  const std::vector<NodeSpec> nodes{cloud(0), peer(1), peer(2)};
  const std::vector<double> objs{10.0, 10.0, 10.0, 10.0};
  CHECK(risk(std::vector<int>{0, 0, 0, 0}, nodes, objs, 0.01).gamma_r == 0.0);
  CHECK(risk(std::vector<int>{1, 2, 1, 2}, nodes, objs, 0.01).gamma_r == doctest::Approx(1.0));
  CHECK(risk(std::vector<int>{0, 1, 0, 2}, nodes, objs, 0.01).gamma_r == doctest::Approx(0.5));
  CHECK(risk(std::vector<int>{1}, nodes, std::vector<double>{0.0}, 0.01).gamma_r == 0.0);
}

TEST_CASE("load factor and cost recompute") {
  const std::vector<NodeSpec> nodes{cloud(0, 100.0), peer(1, 50.0), cloud(2, 100.0)};
  CHECK(load_factor(0, std::vector<int>{}, nodes, std::vector<double>{}) == 0.0);
  CHECK(load_factor(0, std::vector<int>{0}, nodes, std::vector<double>{100.0}) == 1.0);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Assignment host(6);
    std::vector<double> loads(6);
    for (std::size_t v = 0; v < 6; ++v) {
      host[v] = static_cast<int>(rng.index(3));
      loads[v] = rng.uniform(0.0, 30.0);
    }
    for (int n = 0; n < 3; ++n) {
      double sum = 0.0;
      for (std::size_t v = 0; v < 6; ++v) sum += host[v] == n ? loads[v] : 0.0;
      CHECK(load_factor(n, host, nodes, loads) == doctest::Approx(sum / nodes[n].capacity));
    }
    CHECK(placement_cost(host, nodes, loads, kEpoch) == doctest::Approx(cost_oracle(host, nodes, loads)));
  }
  CHECK(placement_cost(std::vector<int>{1, 1}, nodes, std::vector<double>{5.0, 5.0}, kEpoch) == 0.0);
  CHECK(cost(std::vector<int>{}, nodes, std::vector<double>{}, kEpoch, std::vector<int>{0}) == nodes[0].rent_cost);
}

TEST_CASE("select_vs") {
  Rng rng(1);
  SUBCASE("quiet system yields an empty pool") {
    auto v = view_of({cloud(0, 100.0)}, {0, 0}, {25.0, 25.0});
    CHECK(select_vs(v, 0.8, 0.2, 0, rng).empty());
  }
  SUBCASE("the rising VS leaves an overloaded node first") {
    auto v = view_of({cloud(0, 100.0), cloud(1, 100.0)}, {0, 0, 0, 1}, {40.0, 40.0, 40.0, 50.0});
    v.slope = {0.0, 2.0, 0.0, 0.0};
    const auto pool = select_vs(v, 0.8, 0.2, 0, rng);
    REQUIRE(!pool.empty());
    CHECK(pool[0] == 1);
    CHECK(pool.size() == 1);
  }
  SUBCASE("backed-up VSs always join the pool") {
    auto v = view_of({cloud(0, 100.0)}, {0, 0}, {30.0, 30.0});
    v.backed_up = {0, 1};
    const auto pool = select_vs(v, 0.8, 0.2, 0, rng);
    REQUIRE(pool.size() == 1);
    CHECK(pool[0] == 1);
  }
  SUBCASE("underloaded nodes are drained") {
    auto v = view_of({cloud(0, 100.0), cloud(1, 100.0)}, {0, 1}, {50.0, 5.0});
    const auto pool = select_vs(v, 0.8, 0.2, 5, rng);
    CHECK(std::find(pool.begin(), pool.end(), 1u) != pool.end());
    CHECK(pool.size() == 2);
  }
}

TEST_CASE("select_destination") {
  const NodeSpec tmpl = cloud(-1, 10e6);
  SUBCASE("empty pool releases idle clouds") {
    auto v = view_of({cloud(0), cloud(1)}, {0}, {1e6});
    const auto plan = select_destination({}, v, 0.5, 0.8, kEpoch, tmpl);
    CHECK(plan.migrations.empty());
    REQUIRE(plan.releases.size() == 1);
    CHECK(plan.releases[0] == 1);
  }
  SUBCASE("zero risk keeps every VS off the peers") {
    auto v = view_of({cloud(0), peer(1), peer(2)}, {-1, -1, -1}, {1e5, 1e5, 1e5});
    const std::vector<std::uint32_t> pool{0, 1, 2};
    const auto plan = select_destination(pool, v, 0.0, 0.8, kEpoch, tmpl);
    for (int h : plan.projected) CHECK(v.nodes[h].is_cloud());
  }
  SUBCASE("a risk budget for one peer placement") {
    // gamma_max = 3 * 10 * 0.01; one peer VS gives gamma_r = 1/3.
    auto v = view_of({cloud(0), peer(1), peer(2)}, {-1, -1, -1}, {1e5, 1e5, 1e5});
    const std::vector<std::uint32_t> pool{0, 1, 2};
    const auto plan = select_destination(pool, v, 0.5, 0.8, kEpoch, tmpl);
    int on_peers = 0;
    for (int h : plan.projected) on_peers += v.nodes[h].is_peer();
    CHECK(on_peers == 1);
    CHECK(v.nodes[plan.projected[0]].is_peer());
    CHECK(plan.projected_risk < 0.5);
    CHECK(plan.migrations.size() == 3);
  }
  SUBCASE("a full system recruits a fresh cloud") {
    auto v = view_of({cloud(0, 1e6)}, {-1, -1}, {0.5e6, 0.5e6});
    const std::vector<std::uint32_t> pool{0, 1};
    const auto plan = select_destination(pool, v, 0.5, 0.8, kEpoch, tmpl);
    CHECK(plan.recruits.size() == 1);
    for (int h : plan.projected) CHECK(h >= 0);
  }
}

TEST_CASE("exhaustive placement") {
  PlacementInstance inst;
  inst.epoch_seconds = kEpoch;
  SUBCASE("a single forced assignment") {
    inst.nodes = {cloud(0)};
    inst.loads = {1e6};
    inst.objects = {5.0};
    const auto r = optimal_assignment(inst);
    REQUIRE(r.feasible);
    CHECK(r.host[0] == 0);
    CHECK(r.cost == doctest::Approx(1e6 * kEpoch * 0.12 / 1e9 + 0.26 / 60.0));
  }
  SUBCASE("zero risk with only peers is infeasible") {
    inst.nodes = {peer(0), peer(1)};
    inst.loads = {1e5};
    inst.objects = {5.0};
    inst.risk_limit = 0.0;
    CHECK_FALSE(optimal_assignment(inst).feasible);
  }
  SUBCASE("oversized instances are refused") {
    inst.nodes = {cloud(0)};
    inst.loads.assign(kOptimalMaxVs + 1, 1.0);
    inst.objects.assign(kOptimalMaxVs + 1, 1.0);
    CHECK_THROWS_AS(optimal_assignment(inst), std::invalid_argument);
  }
  SUBCASE("six VSs on three nodes: optimal <= greedy <= all-cloud") {
    Rng rng(21);
    for (int t = 0; t < 30; ++t) {
      PlacementInstance p;
      p.epoch_seconds = kEpoch;
      p.nodes = {cloud(0), peer(1, 0.5e6), peer(2, 0.5e6)};
      for (int v = 0; v < 6; ++v) {
        p.loads.push_back(rng.uniform(1e4, 3e5));
        p.objects.push_back(static_cast<double>(rng.uniform_int(1, 10)));
      }
      p.risk_limit = rng.uniform(0.1, 0.9);
      p.fresh_cloud = cloud(-1);
      const auto opt = optimal_assignment(p);
      const auto greedy = greedy_assignment(p);
      const auto all_cloud = greedy_assignment(p, false);
      REQUIRE(opt.feasible);
      REQUIRE(greedy.feasible);
      CHECK(opt.cost <= greedy.cost + 1e-12);
      CHECK(greedy.cost <= all_cloud.cost + 1e-12);
      CHECK(cost_oracle(opt.host, [&] {
              auto n = p.nodes;
              for (std::size_t k = 0; k < 6; ++k) {
                auto c = *p.fresh_cloud;
                c.node_id = static_cast<int>(3 + k);
                n.push_back(c);
              }
              return n;
            }(), p.loads) == doctest::Approx(opt.cost));
    }
  }
}

TEST_CASE("manager config parsing") {
  const auto cfg = Config::parse("[manager]\nrisk_limit = 0.3\nLF_up = 0.9\nP_size = 7\n");
  const auto m = ManagerConfig::from_config(cfg);
  CHECK(m.risk_limit == 0.3);
  CHECK(m.lf_up == 0.9);
  CHECK(m.pool_size == 7);
  CHECK_THROWS_AS(ManagerConfig::from_config(Config::parse("[manager]\nrisk_limit = 2\n")), ConfigError);
  CHECK(m.make_cloud(3, 60.0).rent_cost == doctest::Approx(0.26 / 60.0));
  CHECK(m.make_peer(4).fail_prob == 0.01);
}

namespace {

struct SamFixture {
  WorldConfig world;
  std::vector<EntityDescriptor> objects;
  SamConfig sam;

  SamFixture() {
    world.object_count = 300;
    world.max_players = 100;
    Rng rng(2);
    objects = init_world(world, rng).objects;
    sam.vs_count = 20;
    sam.peer_count = 6;
    sam.manager.epoch_steps = 50;
    sam.manager.risk_limit = 0.5;
    sam.manager.peer_capacity = 2e6;
  }
};

}  // namespace

TEST_CASE("SAM system keeps every VS hosted and backed up") {
  SamFixture f;
  SamSystem sys(f.sam, f.objects, Rng(1), Rng(2));
  CHECK(sys.vs_count() == 20);
  std::size_t total = 0;
  for (const auto& vs : sys.servers()) total += vs.entities.size();
  CHECK(total == f.objects.size());

  Rng rng(9);
  std::vector<double> loads(20);
  std::vector<std::uint64_t> demand(20);
  for (std::int64_t step = 0; step < 1000; ++step) {
    if (step % 10 == 0) {
      const double scale = 1.0 + std::sin(step / 150.0);
      for (std::size_t v = 0; v < 20; ++v) {
        loads[v] = scale * rng.uniform(5e4, 4e5);
        demand[v] = static_cast<std::uint64_t>(loads[v] / 500.0);
      }
      sys.set_loads(loads, demand);
    }
    if (step == 420) sys.fail_peer(1 + 1, step);
    sys.step(step);
    CHECK_NOTHROW(sys.check_invariants());
  }
  total = 0;
  for (const auto& vs : sys.servers()) total += vs.entities.size();
  CHECK(total == f.objects.size());
  CHECK(!sys.epochs().empty());
}

TEST_CASE("a steady load reaches a quiet plan") {
  SamFixture f;
  f.sam.failures = false;
  SamSystem sys(f.sam, f.objects, Rng(1), Rng(2));
  std::vector<double> loads(20, 2e5);
  std::vector<std::uint64_t> demand(20, 100);
  sys.set_loads(loads, demand);
  for (std::int64_t step = 0; step < 2000; ++step) sys.step(step);
  const auto& ep = sys.epochs();
  REQUIRE(ep.size() > 10);
  CHECK(ep.back().recruits == 0);
  CHECK(ep.back().releases == 0);
  CHECK(ep.back().cost == doctest::Approx(ep[ep.size() - 2].cost).epsilon(0.01));
}
