#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pilot/clock.h"
#include "pilot/latency.h"
#include "pilot/launcher.h"
#include "pilot/profiler.h"
#include "pilot/scheduler.h"

namespace pilot {

enum class Topology { kFlat, kTree };

std::string_view to_string(Topology t);
Topology parse_topology(std::string_view s);

inline constexpr int kFlatCapacity = 20000;
inline constexpr int kTreeCapacity = 32768;

struct DvmConfig {
  Topology topology = Topology::kFlat;
  int capacity_tasks = kFlatCapacity;
  LatencySpec setup = LatencySpec::trunc_normal(0.005, 0.002);
  LatencySpec launch_msg = LatencySpec::trunc_normal(0.034, 0.047);
  LatencySpec notify = LatencySpec::trunc_normal(0.01, 0.005);

  void validate() const;
  // Launch-message distribution after topology scaling (Tree halves it).
  LatencySpec effective_launch_msg() const;

  static DvmConfig flat();
  static DvmConfig tree();
};

enum class DvmStage {
  kInitComplete,
  kPendingAppLaunch,
  kSendingLaunchMsg,
  kRunning,
  kNotifyComplete,
  kFailed,
};

std::string_view to_string(DvmStage s);

struct DvmJob {
  std::string task_id;
  DvmStage stage = DvmStage::kInitComplete;
  std::map<DvmStage, Duration> stage_timestamps;
};

struct StageDurations {
  Duration setup{0};       // init_complete -> pending_app_launch
  Duration launch{0};      // sending_launch_msg -> running
  Duration run_notify{0};  // running -> notify_complete
  Duration total() const { return setup + launch + run_notify; }
};

// Throws IncompleteJob unless the job reached NotifyComplete.
StageDurations dvm_job_durations(const DvmJob& job);

// A simulated PRRTE Distributed Virtual Machine: one daemon per worker node
// and a per-job stage machine driven by the event loop. Exceeding the live
// job capacity crashes the handle and fails every live job.
class DvmHandle : public LaunchBackend {
 public:
  DvmHandle(EventLoop& loop, ProfileSink* sink, DvmConfig config,
            LaunchBackendProfile profile, std::string name = "dvm.0");

  void start(const ResourcePool& pool);
  void terminate() override;

  bool running() const { return state_ == State::kRunning; }
  bool crashed() const override { return state_ == State::kCrashed; }
  int daemons() const { return daemons_; }
  const std::string& name() const { return name_; }
  const DvmConfig& config() const { return config_; }

  std::vector<Completion> collect_completions() override;
  std::size_t live() const override { return live_; }

  const DvmJob* job(const std::string& task_id) const;
  std::size_t job_count() const { return jobs_.size(); }
  std::vector<const DvmJob*> jobs() const;

 protected:
  SubmitStatus dispatch(const TaskSpec& spec, const Slot& slot, Duration at,
                        Rng& rng) override;

 private:
  enum class State { kStopped, kRunning, kCrashed };

  void enter(DvmJob& job, DvmStage stage, Duration t);
  void crash(Duration t);

  EventLoop& loop_;
  ProfileSink* sink_;
  DvmConfig config_;
  std::string name_;
  LatencySampler setup_;
  LatencySampler launch_;
  LatencySampler notify_;
  State state_ = State::kStopped;
  int daemons_ = 0;
  std::uint64_t generation_ = 0;
  std::size_t live_ = 0;
  std::unordered_map<std::string, std::unique_ptr<DvmJob>> jobs_;
  std::vector<std::string> order_;
  std::vector<Completion> ready_;
};

// Boots a DVM over the worker nodes of `pool`.
std::unique_ptr<DvmHandle> dvm_start(EventLoop& loop, ProfileSink* sink,
                                     const DvmConfig& config, const ResourcePool& pool,
                                     const LaunchBackendProfile& profile,
                                     std::string name = "dvm.0");

}  // namespace pilot
