#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/agent.h"

namespace pilot {

struct WorkloadParams {
  int n_tasks = 1;
  int cores_per_task = 1;
  int gpus_per_task = 0;
  Duration duration = std::chrono::seconds(900);
  int bundle_size = 1024;
  std::string executable;  // empty: simulated payload (or `sleep` on local_exec)
  std::vector<std::string> args;
};

struct PoolParams {
  int nodes = 0;  // total nodes including agent nodes; 0 sizes the pool to the workload
  int cores_per_node = 42;
  int gpus_per_node = 6;
  int agent_nodes = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ClockMode clock = ClockMode::kVirtual;
  std::uint64_t seed = 1;
  int repetitions = 1;
  std::string output_dir = "runs";
  WorkloadParams workload;
  PoolParams pool;
  AgentConfig agent;
  LaunchBackendProfile backend = LaunchBackendProfile::sim_dvm();
  DvmConfig dvm;
  JsmConfig jsm;
  double gpu_weight = 1.0;
  Duration jitter_bound = std::chrono::seconds(5);

  // Throws ConfigError.
  void validate() const;

  Workload make_workload() const;
  ResourcePool make_pool() const;
  // Worker node count after auto-sizing.
  int worker_nodes() const;
  PilotRun pilot_run(std::uint64_t run_seed, const std::filesystem::path& stdio_dir) const;
};

// Flat `dotted.key = value` lines; '#' starts a comment line. Presets are
// applied first (backend.kind, dvm.topology) so key order does not matter.
// Unknown or duplicate keys and bad values raise ConfigError naming the line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key, in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

}  // namespace pilot
