#pragma once

#include <string>
#include <vector>

#include "pilot/clock.h"
#include "pilot/latency.h"
#include "pilot/launcher.h"
#include "pilot/profiler.h"

namespace pilot {

struct JsmConfig {
  LatencySpec launch = LatencySpec::trunc_normal(0.05, 0.02);
  LatencySpec notify = LatencySpec::trunc_normal(0.01, 0.005);

  void validate() const {
    launch.validate();
    notify.validate();
  }
};

// jsrun-style launcher profile: the same pipeline as the DVM without the
// stage machine or capacity limit. The open-files limit is fixed at 4096 and
// the backend flags itself unstable when driven by more than one executor.
class SimJsmBackend : public LaunchBackend {
 public:
  SimJsmBackend(EventLoop& loop, ProfileSink* sink, JsmConfig config,
                LaunchBackendProfile profile, int concurrent_executors,
                std::string name = "jsm.0");

  bool unstable() const { return unstable_; }

  std::vector<Completion> collect_completions() override;
  std::size_t live() const override { return live_; }

 protected:
  SubmitStatus dispatch(const TaskSpec& spec, const Slot& slot, Duration at,
                        Rng& rng) override;

 private:
  EventLoop& loop_;
  ProfileSink* sink_;
  std::string name_;
  LatencySampler launch_;
  LatencySampler notify_;
  bool unstable_ = false;
  std::size_t live_ = 0;
  std::vector<Completion> ready_;
};

}  // namespace pilot
