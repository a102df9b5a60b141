#pragma once

#include <sys/types.h>

#include <filesystem>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "pilot/clock.h"
#include "pilot/launcher.h"

namespace pilot {

// Runs tasks as local OS processes. stdin/stdout/stderr are redirected to
// per-task files that stay open in the agent until the task is collected,
// so every live task costs three real descriptors. Tasks without a command
// run `sleep <duration>`.
class LocalExecBackend : public LaunchBackend {
 public:
  LocalExecBackend(Clock& clock, LaunchBackendProfile profile,
                   std::filesystem::path stdio_dir);
  ~LocalExecBackend() override;

  std::vector<Completion> collect_completions() override;
  std::size_t live() const override;
  bool needs_polling() const override { return true; }
  void poll() override;
  void terminate() override;

  // Paths used for a task's stdio when its spec leaves them empty.
  StdioPaths stdio_for(const TaskSpec& spec) const;

 protected:
  SubmitStatus dispatch(const TaskSpec& spec, const Slot& slot, Duration at,
                        Rng& rng) override;

 private:
  struct Child {
    std::string task_id;
    int fds[3] = {-1, -1, -1};
  };

  static void close_fds(Child& c);

  Clock& clock_;
  std::filesystem::path stdio_dir_;
  mutable std::mutex mu_;
  std::unordered_map<pid_t, Child> children_;
  std::vector<Completion> ready_;
};

}  // namespace pilot
