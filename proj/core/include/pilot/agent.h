#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pilot/clock.h"
#include "pilot/dvm.h"
#include "pilot/launcher.h"
#include "pilot/profiler.h"
#include "pilot/scheduler.h"
#include "pilot/sim_jsm.h"
#include "pilot/task.h"

namespace pilot {

struct AgentConfig {
  Duration pilot_startup{0};      // pilot_start -> agent bootstrap done
  Duration sub_agent_startup{0};  // added once per sub-agent
  Duration bundle_pull{0};        // interval between bundle arrivals
  Duration termination{0};        // last release -> pilot_stop
  Duration schedule_cost{0};      // scheduler time per placement
  Duration unschedule_cost{0};    // scheduler time per release
  SubAgentSet sub_agents;
  int partitions = 1;
  Duration poll_interval = std::chrono::milliseconds(2);  // real backends only

  void validate() const;
};

struct BackendSetup {
  LaunchBackendProfile profile = LaunchBackendProfile::sim_dvm();
  DvmConfig dvm;
  JsmConfig jsm;
  std::filesystem::path stdio_dir = "stdio";
};

struct PilotRun {
  ClockMode clock = ClockMode::kVirtual;
  std::uint64_t seed = 1;
  Workload workload;
  ResourcePool pool = ResourcePool::uniform(2, 42, 6, 1);
  AgentConfig agent;
  BackendSetup backend;
};

struct ExecutorStats {
  std::string name;
  RateGateState gate;
  std::vector<Duration> submissions;
};

struct RunResult {
  std::vector<TaskRecord> tasks;  // final records, workload order
  std::vector<ExecutorStats> executors;
  std::vector<std::size_t> partition_tasks;  // tasks meta-scheduled per partition
  Duration pilot_stop{0};
  int fd_high_water = 0;
  int fd_in_use_at_end = 0;
  std::size_t backend_crashes = 0;
  bool backend_unstable = false;
};

// Simulates (virtual clock) or executes (real clock) one pilot: bootstrap,
// bundle arrival, scheduling, submission through the executors, collection
// and termination. Every lifecycle event is recorded in `sink`.
RunResult run_pilot(const PilotRun& run, ProfileSink& sink);

}  // namespace pilot
