#include "oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "mmosim/pam.hpp"
#include "mmosim/rng.hpp"
#include "mmosim/sam_manager.hpp"

namespace mmosim::cli {

namespace {

bool coverage_case(Rng& rng, double& ratio) {
  const Aoi p{{0.0, 0.0}, 10.0};
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
  const auto d = static_cast<std::size_t>(rng.uniform_int(1, 4));
  std::vector<Aoi> nb;
  for (std::size_t i = 0; i < n; ++i) {
    nb.push_back({{rng.uniform(-18.0, 18.0), rng.uniform(-18.0, 18.0)}, rng.uniform(3.0, 12.0)});
  }
  const CoverageModel model(p, nb, 16);
  const auto g = greedy_select(model, d);
  const int got = model.covered(g);
  const int best = brute_force_select(model, d).covered_tiles;
  ratio = best > 0 ? static_cast<double>(got) / best : 1.0;
  return got >= (1.0 - 1.0 / std::exp(1.0)) * best - 1e-9;
}

PlacementInstance placement_case(Rng& rng) {
  const ManagerConfig mc;
  const double epoch = 60.0;
  PlacementInstance inst;
  inst.epoch_seconds = epoch;
  inst.risk_limit = rng.uniform(0.05, 0.9);
  inst.peer_fail_prob = mc.peer_fail_prob;
  const int clouds = static_cast<int>(rng.uniform_int(1, 2));
  const int peers = static_cast<int>(rng.uniform_int(1, 3));
  for (int c = 0; c < clouds; ++c) inst.nodes.push_back(mc.make_cloud(c, epoch));
  for (int q = 0; q < peers; ++q) inst.nodes.push_back(mc.make_peer(clouds + q));
  const auto nvs = static_cast<std::size_t>(rng.uniform_int(2, 8));
  for (std::size_t v = 0; v < nvs; ++v) {
    inst.loads.push_back(rng.uniform(0.02, 0.3) * mc.cloud_capacity);
    inst.objects.push_back(static_cast<double>(rng.uniform_int(1, 20)));
  }
  inst.fresh_cloud = mc.make_cloud(-1, epoch);
  return inst;
}

PlacementInstance clouds_only(PlacementInstance inst) {
  std::erase_if(inst.nodes, [](const NodeSpec& n) { return n.is_peer(); });
  for (std::size_t i = 0; i < inst.nodes.size(); ++i) inst.nodes[i].node_id = static_cast<int>(i);
  return inst;
}

}  // namespace

OracleReport oracle_check(int instances, std::uint64_t seed, std::ostream& log) {
  OracleReport rep;
  Rng cov = Rng(seed).child("coverage");
  for (int i = 0; i < instances; ++i) {
    double ratio = 1.0;
    if (!coverage_case(cov, ratio)) ++rep.coverage_violations;
    rep.worst_ratio = std::min(rep.worst_ratio, ratio);
    ++rep.coverage_instances;
  }
  Rng pl = Rng(seed).child("placement");
  for (int i = 0; i < instances; ++i) {
    const auto inst = placement_case(pl);
    const auto opt = optimal_assignment(inst);
    const auto greedy = greedy_assignment(inst);
    const auto cloud = greedy_assignment(clouds_only(inst), false);
    const double eps = 1e-9 * std::max(1.0, cloud.cost);
    const bool ok = opt.feasible && greedy.feasible && cloud.feasible && opt.cost <= greedy.cost + eps &&
                    greedy.cost <= cloud.cost + eps;
    if (!ok) {
      ++rep.placement_violations;
      log << "placement instance " << i << ": optimal " << opt.cost << ", greedy " << greedy.cost << ", all-cloud "
          << cloud.cost << '\n';
    }
    ++rep.placement_instances;
  }
  log << "coverage: " << rep.coverage_instances << " instances, " << rep.coverage_violations
      << " below the 1-1/e bound, worst ratio " << rep.worst_ratio << '\n';
  log << "placement: " << rep.placement_instances << " instances, " << rep.placement_violations
      << " sandwich violations\n";
  return rep;
}

}  // namespace mmosim::cli
