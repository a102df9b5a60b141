#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/resources.h"
#include "pilot/time.h"

namespace pilot {

enum class TaskState { kNew, kScheduled, kSubmitted, kRunning, kDone, kFailed, kCanceled };

enum class FailureReason { kFdExhausted, kRateRejected, kDvmCrashed, kNonzeroExit };

std::string_view to_string(TaskState s);
std::string_view to_string(FailureReason r);
std::optional<FailureReason> parse_failure_reason(std::string_view s);

bool is_terminal(TaskState s);

struct Command {
  std::string executable;
  std::vector<std::string> args;
};

struct StdioPaths {
  std::string in;
  std::string out;
  std::string err;
};

// A unit of work. `duration` is the simulated payload length; when `command`
// is set, real backends execute it instead.
struct TaskSpec {
  std::string id;
  int cores = 1;
  int gpus = 0;
  Duration duration{0};
  std::optional<Command> command;
  StdioPaths stdio;

  void validate() const;
};

class TaskRecord {
 public:
  explicit TaskRecord(TaskSpec spec, Duration created = Duration{0});

  const TaskSpec& spec() const { return spec_; }
  TaskState state() const { return state_; }
  const std::map<TaskState, Duration>& timestamps() const { return timestamps_; }
  std::optional<Duration> timestamp(TaskState s) const;
  Duration last_timestamp() const { return last_; }

  const std::optional<Slot>& slot() const { return slot_; }
  void set_slot(Slot slot) { slot_ = std::move(slot); }
  void clear_slot() { slot_.reset(); }

  const std::optional<FailureReason>& failure() const { return failure_; }

  // In-place form of advance_state().
  void advance(TaskState next, Duration t);
  void fail(FailureReason reason, Duration t);

 private:
  TaskSpec spec_;
  TaskState state_ = TaskState::kNew;
  std::map<TaskState, Duration> timestamps_;
  Duration last_{0};
  std::optional<Slot> slot_;
  std::optional<FailureReason> failure_;
};

// Legal moves: one step along New > Scheduled > Submitted > Running > Done,
// or from any non-terminal state to Failed/Canceled. Throws IllegalTransition
// or TimeRegression.
TaskRecord advance_state(TaskRecord rec, TaskState next, Duration t);

struct Workload {
  std::vector<TaskSpec> tasks;
  int bundle_size = 1024;

  void validate() const;
  bool homogeneous() const;
};

Workload make_workload(int n, int cores_per_task, double duration_s);

}  // namespace pilot
