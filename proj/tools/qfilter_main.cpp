#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "qf/config.hpp"
#include "qf/runner.hpp"

namespace {

// exit codes: 0 run ok, 1 a requested check failed, 2 config/usage error,
// 3 runtime abort (positivity tripwire, refused model, I/O failure, ...)
constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum trajectory filters and the Gaussian posterior-moment filter"};
  app.footer("exit status: 0 ok, 1 check failed, 2 bad config, 3 runtime error");

  std::string config_file;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int64_t n_traj = -1;
  int workers = -1;
  std::string out_dir;
  bool dump_config = false;

  auto* config_opt =
      app.add_option("-c,--config", config_file, "JSON experiment configuration file");
  auto* preset_opt = app.add_option("-p,--preset", preset,
                                    "named experiment (riccati-scalar, unraveling-spin, "
                                    "collapse-unstable, purity-complete, kalman-cross, "
                                    "spin-girsanov)");
  config_opt->excludes(preset_opt);
  app.add_option("-s,--seed", seed, "master seed override")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("-n,--trajectories", n_traj, "trajectory count override")
      ->check(CLI::PositiveNumber);
  app.add_option("-w,--workers", workers, "worker thread count (0 = auto)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("-o,--out-dir", out_dir, "output directory override");
  app.add_flag("--dump-config", dump_config,
               "print the effective configuration as JSON and exit");

  CLI11_PARSE(app, argc, argv);

  qf::ExperimentConfig cfg;
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) {
        std::cerr << "error: cannot open config file " << config_file << '\n';
        return kExitBadConfig;
      }
      nlohmann::json j = nlohmann::json::parse(in);
      cfg = qf::config_from_json(j);
    } else if (!preset.empty()) {
      if (!qf::is_known_preset(preset)) {
        std::cerr << "error: preset: unknown name \"" << preset << "\"\n";
        return kExitBadConfig;
      }
      cfg = qf::preset_defaults(preset);
    } else {
      std::cerr << "error: provide --config or --preset (see --help)\n";
      return kExitBadConfig;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadConfig;
  }

  if (seed_given) cfg.master_seed = seed;
  if (n_traj > 0) cfg.n_traj = static_cast<std::uint64_t>(n_traj);
  if (workers >= 0) cfg.workers = workers;
  if (!out_dir.empty()) cfg.out_dir = out_dir;

  const auto issues = qf::validate(cfg);
  if (!issues.empty()) {
    for (const auto& s : issues) std::cerr << "config error: " << s << '\n';
    return kExitBadConfig;
  }

  if (dump_config) {
    std::cout << qf::config_to_json(cfg).dump(2) << '\n';
    return kExitOk;
  }

  try {
    const qf::RunResult result = qf::run_experiment(cfg);
    for (const auto& f : result.files) std::cout << "wrote " << f << '\n';
    for (const auto& c : result.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (value " << c.value
                << ", bound " << c.bound << ")\n";
    return result.all_passed() ? kExitOk : kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
