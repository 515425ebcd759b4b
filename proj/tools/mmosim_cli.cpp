#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "mmosim/config.hpp"
#include "mmosim/simharness.hpp"
#include "mmosim/vsdht.hpp"
#include "oracle_check.hpp"

namespace fs = std::filesystem;
using namespace mmosim;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::vector<std::string> overrides;
  std::string output_dir;
  std::int64_t seed{-1};
  bool quiet{false};
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-s,--set", c.overrides, "Override a configuration field, key=value")->type_name("KEY=VALUE");
  app->add_option("-o,--output", c.output_dir, "Output directory (overrides run.output_dir)");
  app->add_option("--seed", c.seed, "Master seed (overrides run.seed)");
  app->add_flag("-q,--quiet", c.quiet, "Do not print the summary");
}

void apply(Config& cfg, const Common& c, const std::vector<std::string>& extra = {}) {
  for (const auto& o : c.overrides) cfg.apply_override(o);
  for (const auto& o : extra) cfg.apply_override(o);
  if (c.seed >= 0) cfg.set("run.seed", std::to_string(c.seed));
}

fs::path output_root(const Config& cfg, const Common& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  return cfg.get_string("run.output_dir", "out");
}

Summary run_one(Config cfg, const fs::path& dir, bool quiet) {
  const auto sim = SimConfig::from_config(cfg);
  const auto result = run(sim);
  write_outputs(dir, cfg, sim, result);
  if (!quiet) std::cout << summary_text(result.summary);
  std::cout << "wrote " << dir.string() << '\n';
  return result.summary;
}

std::string run_dir_name(std::size_t i) {
  std::ostringstream os;
  os << "run_" << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

void run_sweep(const Config& base, const Common& c, const std::vector<std::string>& params, const fs::path& root) {
  std::vector<SweepSpec> specs;
  for (const auto& p : params) specs.push_back(parse_sweep(p));
  const auto runs = expand_sweeps(specs);
  // Reject bad keys or values before any run starts.
  for (const auto& r : runs) {
    Config cfg = base;
    apply(cfg, c, r);
    (void)SimConfig::from_config(cfg);
  }
  fs::create_directories(root);
  std::ofstream index(root / "sweep.csv");
  index << "run";
  for (const auto& s : specs) index << ',' << s.key;
  index << ",mean_cost_per_minute,peak_window_cost_per_minute,offpeak_window_cost_per_minute,mean_availability,"
           "peak_availability,mean_jc,mean_ac,mean_server_bytes_per_s\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    Config cfg = base;
    apply(cfg, c, runs[i]);
    std::cout << "[" << i + 1 << "/" << runs.size() << "]";
    for (const auto& o : runs[i]) std::cout << ' ' << o;
    std::cout << '\n';
    const auto s = run_one(cfg, root / run_dir_name(i), true);
    index << run_dir_name(i);
    for (const auto& o : runs[i]) index << ',' << o.substr(o.find('=') + 1);
    index << std::setprecision(10) << ',' << s.mean_cost_per_minute << ',' << s.peak_cost_per_minute_mean << ','
          << s.offpeak_cost_per_minute_mean << ',' << s.mean_availability << ',' << s.peak_availability << ','
          << s.mean_jc << ',' << s.mean_ac << ',' << s.mean_server_bytes_per_s << '\n';
  }
  std::cout << "wrote " << (root / "sweep.csv").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmosim: hybrid cloud/P2P MMOG state and position management simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  std::string config_path;

  auto* run_cmd = app.add_subcommand("run", "Run one simulation from a configuration file");
  run_cmd->add_option("config", config_path, "Configuration file")->required();
  add_common(run_cmd, common);

  std::vector<std::string> params;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the cartesian product of parameter sweeps");
  sweep_cmd->add_option("config", config_path, "Configuration file")->required();
  sweep_cmd->add_option("-p,--param", params, "Swept field, key=v1,v2,...")->required()->type_name("KEY=V1,V2");
  add_common(sweep_cmd, common);

  std::string preset_name;
  bool list = false;
  bool no_sweep = false;
  bool dump = false;
  auto* preset_cmd = app.add_subcommand("preset", "Run a named scenario");
  preset_cmd->add_option("name", preset_name, "Preset name");
  preset_cmd->add_flag("-l,--list", list, "List presets");
  preset_cmd->add_flag("--no-sweep", no_sweep, "Run the base configuration only");
  preset_cmd->add_flag("--dump", dump, "Print the preset configuration and exit");
  add_common(preset_cmd, common);

  int instances = 200;
  std::uint64_t oracle_seed = 1;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Compare heuristics against exhaustive oracles");
  oracle_cmd->add_option("-n,--instances", instances, "Random instances per check")->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--seed", oracle_seed, "Instance generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) {
      auto cfg = Config::load(config_path);
      apply(cfg, common);
      run_one(cfg, output_root(cfg, common), common.quiet);
    } else if (*sweep_cmd) {
      const auto cfg = Config::load(config_path);
      Config probe = cfg;
      apply(probe, common);
      run_sweep(cfg, common, params, output_root(probe, common));
    } else if (*preset_cmd) {
      if (list || preset_name.empty()) {
        for (const auto& p : presets()) std::cout << std::left << std::setw(18) << p.name << p.description << '\n';
        return kOk;
      }
      const auto& p = find_preset(preset_name);
      auto cfg = Config::parse(p.text, "preset:" + p.name);
      if (dump) {
        apply(cfg, common);
        std::cout << cfg.to_string();
        for (const auto& s : p.sweeps) std::cout << "# sweep " << s << '\n';
        return kOk;
      }
      Config probe = cfg;
      apply(probe, common);
      const fs::path root = common.output_dir.empty() ? fs::path("out") / p.name : fs::path(common.output_dir);
      if (p.sweeps.empty() || no_sweep) {
        run_one(probe, root, common.quiet);
      } else {
        run_sweep(cfg, common, p.sweeps, root);
      }
    } else if (*oracle_cmd) {
      const auto rep = cli::oracle_check(instances, oracle_seed, std::cout);
      std::cout << (rep.ok() ? "oracle-check: PASS\n" : "oracle-check: FAIL\n");
      return rep.ok() ? kOk : kRuntimeError;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CorruptionError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
