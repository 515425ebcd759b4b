#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "mmosim/pam.hpp"
#include "mmosim/sam_manager.hpp"
#include "mmosim/simharness.hpp"
#include "mmosim/vsdht.hpp"
#include "mmosim/workload.hpp"

namespace py = pybind11;
using namespace mmosim;

namespace {

using Circle = std::tuple<double, double, double>;

Aoi to_aoi(const Circle& c) { return {{std::get<0>(c), std::get<1>(c)}, std::get<2>(c)}; }

std::vector<Aoi> to_aois(const std::vector<Circle>& cs) {
  std::vector<Aoi> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(to_aoi(c));
  return out;
}

Config build_config(const std::string& text, const std::vector<std::string>& overrides) {
  auto cfg = Config::parse(text);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

py::dict summary_dict(const Summary& s) {
  py::dict d;
  d["windows"] = s.windows;
  d["mean_cost_per_minute"] = s.mean_cost_per_minute;
  d["peak_cost_per_minute"] = s.peak_cost_per_minute;
  d["mean_availability"] = s.mean_availability;
  d["min_availability"] = s.min_availability;
  d["mean_gamma_r"] = s.mean_gamma_r;
  d["total_migrations"] = s.total_migrations;
  d["mean_jc"] = s.mean_jc;
  d["mean_ac"] = s.mean_ac;
  d["mean_server_bytes_per_s"] = s.mean_server_bytes_per_s;
  d["peak_cost_per_minute_mean"] = s.peak_cost_per_minute_mean;
  d["offpeak_cost_per_minute_mean"] = s.offpeak_cost_per_minute_mean;
  d["peak_availability"] = s.peak_availability;
  d["offpeak_availability"] = s.offpeak_availability;
  return d;
}

py::dict row_dict(const MetricsRow& r) {
  py::dict d;
  d["window"] = r.window;
  d["players"] = r.players;
  d["cost_per_minute"] = r.cost_per_minute;
  d["gamma_r"] = r.gamma_r;
  d["availability"] = r.availability;
  d["overloaded_nodes"] = r.overloaded_nodes;
  d["migrations"] = r.migrations;
  d["mean_jc"] = r.mean_jc;
  d["mean_ac"] = r.mean_ac;
  d["server_bytes_per_s"] = r.server_bytes_per_s;
  d["clouds"] = r.clouds;
  return d;
}

py::dict run_text(const std::string& text, const std::vector<std::string>& overrides) {
  const auto cfg = build_config(text, overrides);
  const auto sim = SimConfig::from_config(cfg);
  RunResult r;
  {
    py::gil_scoped_release release;
    r = run(sim);
  }
  py::list rows;
  for (const auto& row : r.rows) rows.append(row_dict(row));
  py::dict out;
  out["rows"] = rows;
  out["summary"] = r.rows.empty() ? py::dict() : summary_dict(r.summary);
  out["migrations"] = r.migrations.size();
  out["config_hash"] = cfg.content_hash();
  return out;
}

NodeSpec node_from(const py::dict& d) {
  NodeSpec n;
  n.node_id = d.contains("id") ? d["id"].cast<int>() : 0;
  const auto kind = d.contains("kind") ? d["kind"].cast<std::string>() : std::string("cloud");
  if (kind != "cloud" && kind != "peer") throw py::value_error("node kind must be 'cloud' or 'peer'");
  n.kind = kind == "cloud" ? NodeKind::Cloud : NodeKind::Peer;
  n.capacity = d["capacity"].cast<double>();
  n.bandwidth_cost = d.contains("bandwidth_cost") ? d["bandwidth_cost"].cast<double>() : 0.0;
  n.rent_cost = d.contains("rent_cost") ? d["rent_cost"].cast<double>() : 0.0;
  n.fail_prob = d.contains("fail_prob") ? d["fail_prob"].cast<double>() : 0.0;
  n.validate();
  return n;
}

PlacementInstance instance_from(const std::vector<py::dict>& nodes, std::vector<double> loads,
                                std::vector<double> objects, double risk_limit, double peer_fail_prob,
                                double epoch_seconds, double lf_up, std::optional<py::dict> fresh_cloud) {
  PlacementInstance p;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto n = node_from(nodes[i]);
    n.node_id = static_cast<int>(i);
    p.nodes.push_back(n);
  }
  if (objects.empty()) objects.assign(loads.size(), 1.0);
  if (objects.size() != loads.size()) throw py::value_error("objects and loads differ in length");
  p.loads = std::move(loads);
  p.objects = std::move(objects);
  p.risk_limit = risk_limit;
  p.peer_fail_prob = peer_fail_prob;
  p.epoch_seconds = epoch_seconds;
  p.lf_up = lf_up;
  if (fresh_cloud) {
    auto c = node_from(*fresh_cloud);
    c.node_id = -1;
    p.fresh_cloud = c;
  }
  return p;
}

py::dict placement_dict(const PlacementResult& r) {
  py::dict d;
  d["feasible"] = r.feasible;
  d["host"] = r.host;
  d["cost"] = r.cost;
  d["nodes"] = r.nodes.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulation core: workload, virtual-server DHT, state-action manager and the peer overlay";
  m.attr("__version__") = MMOSIM_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("player_count", &player_count, py::arg("t"), py::arg("lam"), py::arg("max_players"));

  m.def(
      "coverage",
      [](const Circle& p, const std::vector<Circle>& neighbors, int resolution) {
        const auto n = to_aois(neighbors);
        const auto r = coverage(to_aoi(p), n, resolution);
        return py::make_tuple(r.covered_tiles, r.grid.unmasked_tiles());
      },
      py::arg("p"), py::arg("neighbors"), py::arg("resolution"),
      "Covered and unmasked tile counts; circles are (x, y, radius).");
  m.def(
      "covered_tiles",
      [](const Circle& p, const std::vector<Circle>& neighbors, const std::vector<std::size_t>& subset, int resolution) {
        const auto n = to_aois(neighbors);
        for (auto i : subset) {
          if (i >= n.size()) throw py::index_error("subset index out of range");
        }
        return CoverageModel(to_aoi(p), n, resolution).covered(subset);
      },
      py::arg("p"), py::arg("neighbors"), py::arg("subset"), py::arg("resolution"));
  m.def(
      "greedy_select",
      [](const Circle& p, const std::vector<Circle>& neighbors, std::size_t d, int resolution) {
        return greedy_heuristic(to_aoi(p), to_aois(neighbors), d, resolution);
      },
      py::arg("p"), py::arg("neighbors"), py::arg("d"), py::arg("resolution"));
  m.def(
      "score_select",
      [](const Circle& p, const std::vector<Circle>& neighbors, std::size_t d, int resolution) {
        return score_heuristic(to_aoi(p), to_aois(neighbors), d, resolution);
      },
      py::arg("p"), py::arg("neighbors"), py::arg("d"), py::arg("resolution"));
  m.def(
      "brute_force_select",
      [](const Circle& p, const std::vector<Circle>& neighbors, std::size_t d, int resolution) {
        const auto r = brute_force_max_coverage(to_aoi(p), to_aois(neighbors), d, resolution);
        return py::make_tuple(r.subset, r.covered_tiles);
      },
      py::arg("p"), py::arg("neighbors"), py::arg("d"), py::arg("resolution"));

  m.def(
      "jc",
      [](const std::vector<std::tuple<std::uint32_t, double, double>>& client,
         const std::vector<std::tuple<std::uint32_t, double, double>>& server, double d_max) {
        LocalReplica rep;
        for (const auto& [uid, x, y] : client) rep.upsert({uid, {x, y}, 0, ReplicaSource::Server});
        std::vector<AuthoritativeEntity> srv;
        for (const auto& [uid, x, y] : server) srv.push_back({uid, {x, y}});
        std::sort(srv.begin(), srv.end(), [](const auto& a, const auto& b) { return a.uid < b.uid; });
        return jc(rep, srv, d_max);
      },
      py::arg("client"), py::arg("server"), py::arg("d_max"),
      "Consistency of a client view against the authoritative one; entries are (uid, x, y).");

  m.def("slow_start_rounds", [](std::uint64_t bytes) { return slow_start_rounds(bytes); }, py::arg("payload_bytes"));
  m.def(
      "migration_time",
      [](std::uint64_t bytes, double rtt_seconds, double loss) { return migration_time_for_rtt(bytes, rtt_seconds, loss); },
      py::arg("payload_bytes"), py::arg("rtt_seconds"), py::arg("loss_prob") = RttModel::kDefaultLoss);
  m.def(
      "sample_migration_times",
      [](std::uint64_t bytes, std::size_t count, std::uint64_t seed, std::optional<std::string> rtt_file) {
        const auto rtt = rtt_file ? RttModel::from_file(*rtt_file) : RttModel::lognormal();
        Rng rng(seed);
        std::vector<double> out(count);
        for (auto& x : out) x = sample_migration_time(bytes, rtt, rng);
        return out;
      },
      py::arg("payload_bytes"), py::arg("count"), py::arg("seed") = 1, py::arg("rtt_file") = py::none());
  m.def(
      "vs_size_bytes",
      [](std::uint64_t entities, std::uint64_t access, std::uint64_t total) { return vs_size_bytes(entities, access, total); },
      py::arg("entities"), py::arg("access_entries"), py::arg("vs_total"));
  m.def(
      "lookup",
      [](const std::string& hex_low, std::uint32_t vs_count) {
        const auto servers = partition_ring(vs_count);
        return lookup_index(DhtId::from_u64(std::stoull(hex_low, nullptr, 16)), servers);
      },
      py::arg("id_low_hex"), py::arg("vs_count"), "Owner of a ring id given by its low 64 bits in hex.");

  m.def(
      "optimal_assignment",
      [](const std::vector<py::dict>& nodes, std::vector<double> loads, std::vector<double> objects, double risk_limit,
         double peer_fail_prob, double epoch_seconds, double lf_up, std::optional<py::dict> fresh_cloud) {
        return placement_dict(optimal_assignment(instance_from(nodes, std::move(loads), std::move(objects), risk_limit,
                                                               peer_fail_prob, epoch_seconds, lf_up, fresh_cloud)));
      },
      py::arg("nodes"), py::arg("loads"), py::arg("objects") = std::vector<double>{}, py::arg("risk_limit") = 0.5,
      py::arg("peer_fail_prob") = 0.01, py::arg("epoch_seconds") = 60.0, py::arg("lf_up") = 0.8,
      py::arg("fresh_cloud") = py::none());
  m.def(
      "greedy_assignment",
      [](const std::vector<py::dict>& nodes, std::vector<double> loads, std::vector<double> objects, double risk_limit,
         double peer_fail_prob, double epoch_seconds, double lf_up, std::optional<py::dict> fresh_cloud,
         bool allow_peers) {
        return placement_dict(greedy_assignment(instance_from(nodes, std::move(loads), std::move(objects), risk_limit,
                                                              peer_fail_prob, epoch_seconds, lf_up, fresh_cloud),
                                                allow_peers));
      },
      py::arg("nodes"), py::arg("loads"), py::arg("objects") = std::vector<double>{}, py::arg("risk_limit") = 0.5,
      py::arg("peer_fail_prob") = 0.01, py::arg("epoch_seconds") = 60.0, py::arg("lf_up") = 0.8,
      py::arg("fresh_cloud") = py::none(), py::arg("allow_peers") = true);

  m.def("run", &run_text, py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
        "Runs a simulation from configuration text; returns rows, summary and the config hash.");
  m.def(
      "run_preset",
      [](const std::string& name, const std::vector<std::string>& overrides) {
        return run_text(find_preset(name).text, overrides);
      },
      py::arg("name"), py::arg("overrides") = std::vector<std::string>{});
  m.def("presets", [] {
    std::vector<std::tuple<std::string, std::string, std::vector<std::string>>> out;
    for (const auto& p : presets()) out.emplace_back(p.name, p.description, p.sweeps);
    return out;
  });
  m.def("preset_text", [](const std::string& name) { return find_preset(name).text; }, py::arg("name"));
  m.def(
      "expand_sweeps",
      [](const std::vector<std::string>& specs) {
        std::vector<SweepSpec> parsed;
        for (const auto& s : specs) parsed.push_back(parse_sweep(s));
        return expand_sweeps(parsed);
      },
      py::arg("specs"));
}
