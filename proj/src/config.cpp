#include "qf/config.hpp"

#include <stdexcept>

#include "qf/model_io.hpp"

namespace qf {
namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config: " + field + ": " + what);
}

double number_at(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

std::uint64_t count_at(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail(field, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

}  // namespace

std::vector<std::string> known_presets() {
  return {"riccati-scalar", "unraveling-spin", "collapse-unstable",
          "purity-complete", "kalman-cross", "spin-girsanov"};
}

bool is_known_preset(const std::string& name) {
  for (const auto& p : known_presets())
    if (p == name) return true;
  return false;
}

ExperimentConfig preset_defaults(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  if (name == "riccati-scalar") {
    cfg.t1 = 10.0;
    cfg.n_steps = 10000;
    cfg.n_traj = 1;
    cfg.mode = "reference";
    cfg.dump_trajectories = 0;
  } else if (name == "unraveling-spin") {
    cfg.t1 = 1.0;
    cfg.n_steps = 1000;
    cfg.n_traj = 20000;
    cfg.mode = "reference";
    cfg.observables = {"sx", "sy", "sz"};
  } else if (name == "collapse-unstable") {
    cfg.t1 = 6.0;
    cfg.n_steps = 6000;
    cfg.n_traj = 1;
    cfg.mode = "reference";
    cfg.dump_trajectories = 0;
  } else if (name == "purity-complete") {
    cfg.t1 = 1.0;
    cfg.n_steps = 10000;
    cfg.n_traj = 1;
    cfg.mode = "physical";
    cfg.observables = {"sx", "sy", "sz"};
  } else if (name == "kalman-cross") {
    cfg.t1 = 3.0;
    cfg.n_steps = 30000;
    cfg.n_traj = 1;
    cfg.mode = "physical";
    cfg.dump_trajectories = 0;
  } else if (name == "spin-girsanov") {
    cfg.t1 = 1.0;
    cfg.n_steps = 1000;
    cfg.n_traj = 20000;
    cfg.mode = "reference";
    cfg.dump_trajectories = 0;
  } else {
    throw std::invalid_argument("config: preset: unknown name \"" + name + "\"");
  }
  return cfg;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");

  ExperimentConfig cfg;
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) fail("preset", "expected a string");
    const std::string name = j.at("preset").get<std::string>();
    if (!is_known_preset(name)) fail("preset", "unknown name \"" + name + "\"");
    cfg = preset_defaults(name);
  }

  if (j.contains("model")) {
    if (!j.at("model").is_object()) fail("model", "expected an object");
    cfg.model = j.at("model");
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (!g.is_object()) fail("grid", "expected an object");
    if (g.contains("t0")) cfg.t0 = number_at(g.at("t0"), "grid.t0");
    if (g.contains("t1")) cfg.t1 = number_at(g.at("t1"), "grid.t1");
    if (g.contains("n_steps")) {
      if (!g.at("n_steps").is_number_integer()) fail("grid.n_steps", "expected an integer");
      cfg.n_steps = g.at("n_steps").get<int>();
    }
  }
  if (j.contains("n_traj")) cfg.n_traj = count_at(j.at("n_traj"), "n_traj");
  if (j.contains("master_seed")) cfg.master_seed = count_at(j.at("master_seed"), "master_seed");
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) fail("mode", "expected a string");
    cfg.mode = j.at("mode").get<std::string>();
  }
  if (j.contains("replay_file")) {
    if (!j.at("replay_file").is_string()) fail("replay_file", "expected a string");
    cfg.replay_file = j.at("replay_file").get<std::string>();
  }
  if (j.contains("workers")) {
    if (!j.at("workers").is_number_integer() || j.at("workers").get<int>() < 0)
      fail("workers", "expected a nonnegative integer");
    cfg.workers = j.at("workers").get<int>();
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) fail("out_dir", "expected a string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  if (j.contains("observables")) {
    if (!j.at("observables").is_array()) fail("observables", "expected an array of strings");
    cfg.observables.clear();
    for (const auto& o : j.at("observables")) {
      if (!o.is_string()) fail("observables", "expected an array of strings");
      cfg.observables.push_back(o.get<std::string>());
    }
  }
  if (j.contains("dump_trajectories")) {
    if (!j.at("dump_trajectories").is_number_integer() || j.at("dump_trajectories").get<int>() < 0)
      fail("dump_trajectories", "expected a nonnegative integer");
    cfg.dump_trajectories = j.at("dump_trajectories").get<int>();
  }
  return cfg;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json out;
  if (!cfg.preset.empty()) out["preset"] = cfg.preset;
  if (!cfg.model.is_null()) out["model"] = cfg.model;
  out["grid"] = {{"t0", cfg.t0}, {"t1", cfg.t1}, {"n_steps", cfg.n_steps}};
  out["n_traj"] = cfg.n_traj;
  out["master_seed"] = cfg.master_seed;
  out["mode"] = cfg.mode;
  if (!cfg.replay_file.empty()) out["replay_file"] = cfg.replay_file;
  out["workers"] = cfg.workers;
  out["out_dir"] = cfg.out_dir;
  out["observables"] = cfg.observables;
  out["dump_trajectories"] = cfg.dump_trajectories;
  return out;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> issues;
  if (cfg.preset.empty() && cfg.model.is_null())
    issues.push_back("model: provide a preset name or an inline model");
  if (!cfg.preset.empty() && !is_known_preset(cfg.preset))
    issues.push_back("preset: unknown name \"" + cfg.preset + "\"");
  if (!cfg.preset.empty() && !cfg.model.is_null())
    issues.push_back("model: choose either a preset or an inline model, not both");
  if (cfg.n_steps < 1) issues.push_back("grid.n_steps: must be >= 1");
  if (!(cfg.t1 > cfg.t0)) issues.push_back("grid.t1: must exceed grid.t0");
  if (cfg.n_traj < 1) issues.push_back("n_traj: must be >= 1");
  if (cfg.mode != "reference" && cfg.mode != "physical" && cfg.mode != "replay")
    issues.push_back("mode: expected reference, physical, or replay");
  if (cfg.mode == "replay" && cfg.replay_file.empty())
    issues.push_back("replay_file: replay mode requires an input increments file");
  if (cfg.mode == "replay" && cfg.model.is_null())
    issues.push_back("model: replay mode requires an inline model");
  if (cfg.mode == "replay" && cfg.n_traj != 1)
    issues.push_back("n_traj: replay mode runs exactly one trajectory");
  if (cfg.preset == "spin-girsanov" && cfg.mode != "reference")
    issues.push_back("mode: spin-girsanov is a reference-measure experiment");
  if (cfg.preset == "kalman-cross" && cfg.mode != "physical")
    issues.push_back("mode: kalman-cross simulates the physical records");
  if (cfg.out_dir.empty()) issues.push_back("out_dir: must not be empty");
  for (const auto& name : cfg.observables)
    if (name != "sx" && name != "sy" && name != "sz")
      issues.push_back("observables: unknown name \"" + name + "\"");
  if (!cfg.model.is_null()) {
    try {
      phase_model_from_json(cfg.model);
    } catch (const std::exception& e) {
      issues.push_back(std::string("model: ") + e.what());
    }
  }
  return issues;
}

}  // namespace qf
