#include "pilot/task.h"

#include <cstdio>
#include <set>
#include <stdexcept>

#include "pilot/error.h"

namespace pilot {

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::kNew: return "New";
    case TaskState::kScheduled: return "Scheduled";
    case TaskState::kSubmitted: return "Submitted";
    case TaskState::kRunning: return "Running";
    case TaskState::kDone: return "Done";
    case TaskState::kFailed: return "Failed";
    case TaskState::kCanceled: return "Canceled";
  }
  return "?";
}

std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::kFdExhausted: return "FdExhausted";
    case FailureReason::kRateRejected: return "RateRejected";
    case FailureReason::kDvmCrashed: return "DvmCrashed";
    case FailureReason::kNonzeroExit: return "NonzeroExit";
  }
  return "?";
}

std::optional<FailureReason> parse_failure_reason(std::string_view s) {
  for (auto r : {FailureReason::kFdExhausted, FailureReason::kRateRejected,
                 FailureReason::kDvmCrashed, FailureReason::kNonzeroExit}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

bool is_terminal(TaskState s) {
  return s == TaskState::kDone || s == TaskState::kFailed || s == TaskState::kCanceled;
}

void TaskSpec::validate() const {
  if (id.empty()) throw std::invalid_argument("task id must not be empty");
  if (cores < 1) throw std::invalid_argument("task " + id + ": cores must be >= 1");
  if (gpus < 0) throw std::invalid_argument("task " + id + ": gpus must be >= 0");
  if (!command && duration <= Duration{0}) {
    throw std::invalid_argument("task " + id + ": simulated duration must be > 0");
  }
  if (command && command->executable.empty()) {
    throw std::invalid_argument("task " + id + ": empty executable");
  }
}

TaskRecord::TaskRecord(TaskSpec spec, Duration created)
    : spec_(std::move(spec)), last_(created) {
  timestamps_[TaskState::kNew] = created;
}

std::optional<Duration> TaskRecord::timestamp(TaskState s) const {
  auto it = timestamps_.find(s);
  if (it == timestamps_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool legal(TaskState from, TaskState to) {
  if (is_terminal(from)) return false;
  if (to == TaskState::kFailed || to == TaskState::kCanceled) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

}  // namespace

void TaskRecord::advance(TaskState next, Duration t) {
  if (!legal(state_, next)) {
    throw IllegalTransition("task " + spec_.id + ": " + std::string(to_string(state_)) +
                            " -> " + std::string(to_string(next)));
  }
  if (t < last_) {
    throw TimeRegression("task " + spec_.id + ": " + std::string(to_string(next)) +
                         " at " + format_seconds(t) + " precedes " +
                         format_seconds(last_));
  }
  state_ = next;
  timestamps_[next] = t;
  last_ = t;
}

void TaskRecord::fail(FailureReason reason, Duration t) {
  advance(TaskState::kFailed, t);
  failure_ = reason;
}

TaskRecord advance_state(TaskRecord rec, TaskState next, Duration t) {
  rec.advance(next, t);
  return rec;
}

void Workload::validate() const {
  if (tasks.empty()) throw std::invalid_argument("workload must not be empty");
  if (bundle_size < 1) throw std::invalid_argument("bundle_size must be >= 1");
  std::set<std::string_view> ids;
  for (const auto& t : tasks) {
    t.validate();
    if (!ids.insert(t.id).second) {
      throw std::invalid_argument("duplicate task id " + t.id);
    }
  }
}

bool Workload::homogeneous() const {
  for (const auto& t : tasks) {
    const auto& f = tasks.front();
    if (t.cores != f.cores || t.gpus != f.gpus || t.duration != f.duration) return false;
  }
  return true;
}

Workload make_workload(int n, int cores_per_task, double duration_s) {
  if (n < 1) throw std::invalid_argument("make_workload: n must be >= 1");
  if (cores_per_task < 1) {
    throw std::invalid_argument("make_workload: cores_per_task must be >= 1");
  }
  if (!(duration_s > 0)) {
    throw std::invalid_argument("make_workload: duration_s must be > 0");
  }
  Workload w;
  w.tasks.reserve(static_cast<std::size_t>(n));
  const Duration d = from_seconds(duration_s);
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "task.%06d", i);
    TaskSpec spec;
    spec.id = id;
    spec.cores = cores_per_task;
    spec.duration = d;
    w.tasks.push_back(std::move(spec));
  }
  return w;
}

}  // namespace pilot
