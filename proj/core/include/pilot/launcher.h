#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/latency.h"
#include "pilot/scheduler.h"
#include "pilot/task.h"

namespace pilot {

enum class BackendKind { kLocalExec, kSimDvm, kSimJsm };

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct LaunchBackendProfile {
  BackendKind kind = BackendKind::kSimDvm;
  Duration submit_delay{0};            // per-task artificial wait on each executor
  std::optional<double> max_rate_hz;   // dispatch rate above which submissions may fail
  double fail_prob_over_rate = 0;
  int fd_limit = 4096;
  int fd_reserved = 0;
  int fd_per_task = 3;
  Duration submit_cost{0};   // executor time spent handing one task to the backend
  Duration collect_cost{0};  // executor time spent collecting one completion

  void validate() const;

  static LaunchBackendProfile sim_dvm();
  static LaunchBackendProfile sim_jsm();
  static LaunchBackendProfile local_exec();
};

inline constexpr int kJsmFdLimit = 4096;

// Open-file budget of the agent process. Lock-free; safe to share between
// executors.
class FdAccountant {
 public:
  FdAccountant(int limit, int reserved);

  // Ok when in_use + reserved + n <= limit; on failure nothing changes.
  [[nodiscard]] bool try_acquire(int n);
  void release(int n);

  int limit() const { return limit_; }
  int reserved() const { return reserved_; }
  int in_use() const { return in_use_.load(std::memory_order_acquire); }
  int high_water() const { return high_water_.load(std::memory_order_acquire); }

 private:
  int limit_;
  int reserved_;
  std::atomic<int> in_use_{0};
  std::atomic<int> high_water_{0};
};

// Per-executor spacing of submissions.
struct RateGateState {
  std::optional<Duration> last_submission;
  Duration total_wait{0};
  std::size_t gated = 0;
};

// Wait needed before submitting at `now` so that this submission starts at
// least `delay` after the previous one ended. The first submission on an
// executor waits the full delay. Records now + wait as the last submission.
Duration rate_gate(RateGateState& state, Duration now, Duration delay);

struct SubAgentSet {
  int n_sub_agents = 1;
  int executors_per_sub_agent = 1;

  void validate() const;
  int executor_count() const { return n_sub_agents * executors_per_sub_agent; }
};

struct Completion {
  std::string task_id;
  int exit_status = 0;
  Duration t_end{0};
};

enum class SubmitStatus { kAccepted, kFdExhausted, kRateRejected, kDvmCrashed };

std::optional<FailureReason> failure_of(SubmitStatus s);

// Receives asynchronous backend notifications. Callbacks arrive on the
// thread driving the backend (the event loop for simulated backends).
class BackendListener {
 public:
  virtual ~BackendListener() = default;
  virtual void on_running(const std::string& task_id, Duration t) = 0;
  virtual void on_completions_ready() = 0;
  virtual void on_failed(const std::string& task_id, FailureReason reason, Duration t) = 0;
};

class LaunchBackend {
 public:
  explicit LaunchBackend(LaunchBackendProfile profile);
  virtual ~LaunchBackend() = default;
  LaunchBackend(const LaunchBackend&) = delete;
  LaunchBackend& operator=(const LaunchBackend&) = delete;

  const LaunchBackendProfile& profile() const { return profile_; }
  void set_listener(BackendListener* l) { listener_ = l; }

  // Hands a placed task to the backend at time `at` (>= the caller's now).
  // Applies the over-rate check, then the backend-specific dispatch.
  SubmitStatus submit(const TaskSpec& spec, const Slot& slot, Duration at, Rng& rng);

  // Completed tasks since the previous call, in end-time order.
  virtual std::vector<Completion> collect_completions() = 0;

  virtual std::size_t live() const = 0;

  // Real backends are polled for completions; simulated ones push them.
  virtual bool needs_polling() const { return false; }
  virtual void poll() {}

  virtual void terminate() {}
  virtual bool crashed() const { return false; }

  std::size_t rate_rejected() const { return rate_rejected_; }

 protected:
  virtual SubmitStatus dispatch(const TaskSpec& spec, const Slot& slot, Duration at,
                                Rng& rng) = 0;
  BackendListener* listener() const { return listener_; }

 private:
  LaunchBackendProfile profile_;
  BackendListener* listener_ = nullptr;
  std::optional<Duration> last_dispatch_;
  std::size_t rate_rejected_ = 0;
};

struct SubmitOutcome {
  SubmitStatus status = SubmitStatus::kAccepted;
  Duration submitted{0};  // Submitted timestamp (== call time)
  Duration released{0};   // executor free again / backend hand-off time
};

// One sequential RP executor: rate gate, FD budget and hand-off to a backend.
class Executor {
 public:
  Executor(int index, const LaunchBackendProfile& profile, FdAccountant& fds);

  int index() const { return index_; }
  std::string name() const;

  // rate_gate() for this executor's next submission.
  Duration gate(Duration now);

  // Task must be Scheduled with a bound slot. Acquires FDs (failing the
  // task with FdExhausted if none), records Submitted at `now`, spends the
  // hand-off cost and dispatches. Rejected tasks are marked Failed and their
  // FDs returned.
  SubmitOutcome submit(LaunchBackend& backend, TaskRecord& rec, Duration now, Rng& rng);

  // Returns the FDs of a finished task.
  void release_fds();

  const RateGateState& rate_state() const { return gate_; }
  const std::vector<Duration>& submissions() const { return submissions_; }

 private:
  int index_;
  Duration delay_;
  Duration submit_cost_;
  int fd_per_task_;
  FdAccountant& fds_;
  RateGateState gate_;
  std::vector<Duration> submissions_;
};

// Splits the worker nodes of `pool` into k contiguous disjoint pools (agent
// nodes are not part of any partition). Node ids are preserved.
std::vector<ResourcePool> make_partitions(const ResourcePool& pool, int k);

// Round-robin meta-scheduler over k partitions.
class RoundRobin {
 public:
  explicit RoundRobin(int k);
  int next();
  int size() const { return k_; }

 private:
  int k_;
  int cursor_ = 0;
};

}  // namespace pilot
