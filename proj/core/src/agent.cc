#include "pilot/agent.h"

#include <algorithm>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "pilot/error.h"
#include "pilot/local_exec.h"

namespace pilot {

void AgentConfig::validate() const {
  const Duration zero{0};
  if (pilot_startup < zero || sub_agent_startup < zero || bundle_pull < zero ||
      termination < zero || schedule_cost < zero || unschedule_cost < zero) {
    throw std::invalid_argument("agent timings must be >= 0");
  }
  if (poll_interval <= zero) throw std::invalid_argument("poll_interval must be > 0");
  if (partitions < 1) throw std::invalid_argument("partitions must be >= 1");
  sub_agents.validate();
}

namespace {

constexpr const char* kPilotId = "pilot.0";

class Agent {
 public:
  Agent(const PilotRun& run, ProfileSink& sink);
  RunResult run();

 private:
  struct Listener : BackendListener {
    Agent* agent = nullptr;
    int part = 0;
    void on_running(const std::string& id, Duration t) override {
      agent->defer([a = agent, id, t] { a->handle_running(id, t); });
    }
    void on_completions_ready() override { agent->handle_completions(part); }
    void on_failed(const std::string& id, FailureReason r, Duration t) override {
      agent->defer([a = agent, id, r, t] { a->handle_failed(id, r, t); });
    }
  };

  struct ExecState {
    std::deque<std::size_t> queue;
    bool busy = false;
    std::deque<Completion> collect;
    bool collecting = false;
  };

  void defer(std::function<void()> fn);
  void task_event(std::size_t i, Duration t, Component c, std::string_view name,
                  Attrs attrs = {});
  void pilot_event(Duration t, std::string_view name, Attrs attrs = {});

  void on_ready();
  void arrive(std::size_t first, std::size_t last);
  void poll_tick();

  void kick_scheduler();
  void sched_step();
  void bind(std::size_t i, Slot slot);
  void cancel(std::size_t i);
  void do_unschedule(std::size_t i);
  void queue_unschedule(std::size_t i, Duration t);

  void kick_executor(int e);
  void submit(int e, std::size_t i, Duration wait);
  void kick_collector(int e);
  void finish(int e, const Completion& c);

  void handle_running(const std::string& id, Duration t);
  void handle_completions(int part);
  void handle_failed(const std::string& id, FailureReason r, Duration t);
  void terminal(std::size_t i);
  void maybe_finish();

  const PilotRun& run_;
  ProfileSink& sink_;
  Clock clock_;
  EventLoop loop_;
  Rng rng_;
  std::vector<ResourcePool> pools_;
  FdAccountant fds_;
  std::vector<std::unique_ptr<LaunchBackend>> backends_;
  std::vector<std::unique_ptr<Listener>> listeners_;
  std::vector<Executor> executors_;
  std::vector<ExecState> exec_state_;
  RoundRobin exec_rr_;
  RoundRobin part_rr_;

  std::vector<TaskRecord> recs_;
  std::vector<int> part_of_;
  std::vector<int> exec_of_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> partition_tasks_;

  std::vector<std::deque<std::size_t>> part_queue_;
  std::vector<bool> blocked_;
  std::deque<std::size_t> unsched_queue_;
  bool sched_busy_ = false;
  std::size_t sched_cursor_ = 0;

  bool in_submit_ = false;
  std::vector<std::function<void()>> deferred_;
  bool received_ = false;
  std::size_t terminal_ = 0;
  bool stopping_ = false;
  bool stopped_ = false;
  Duration stop_t_{0};
};

Agent::Agent(const PilotRun& run, ProfileSink& sink)
    : run_(run),
      sink_(sink),
      clock_(run.clock),
      loop_(clock_),
      rng_(run.seed),
      pools_(make_partitions(run.pool, run.agent.partitions)),
      fds_(run.backend.profile.fd_limit, run.backend.profile.fd_reserved),
      exec_rr_(run.agent.sub_agents.executor_count()),
      part_rr_(run.agent.partitions) {
  run.agent.validate();
  run.workload.validate();
  run.backend.profile.validate();
  const BackendKind kind = run.backend.profile.kind;
  if (kind == BackendKind::kLocalExec && run.clock != ClockMode::kReal) {
    throw ConfigError("the local_exec backend needs the real clock");
  }
  const int n_exec = run.agent.sub_agents.executor_count();
  for (int p = 0; p < run.agent.partitions; ++p) {
    std::unique_ptr<LaunchBackend> b;
    switch (kind) {
      case BackendKind::kSimDvm:
        b = std::make_unique<DvmHandle>(loop_, &sink_, run.backend.dvm, run.backend.profile,
                                        "dvm." + std::to_string(p));
        break;
      case BackendKind::kSimJsm:
        b = std::make_unique<SimJsmBackend>(loop_, &sink_, run.backend.jsm, run.backend.profile,
                                            n_exec, "jsm." + std::to_string(p));
        break;
      case BackendKind::kLocalExec:
        b = std::make_unique<LocalExecBackend>(clock_, run.backend.profile,
                                               run.backend.stdio_dir);
        break;
    }
    auto l = std::make_unique<Listener>();
    l->agent = this;
    l->part = p;
    b->set_listener(l.get());
    backends_.push_back(std::move(b));
    listeners_.push_back(std::move(l));
  }
  for (int e = 0; e < n_exec; ++e) executors_.emplace_back(e, run.backend.profile, fds_);
  exec_state_.resize(static_cast<std::size_t>(n_exec));

  const std::size_t n = run.workload.tasks.size();
  recs_.reserve(n);
  part_of_.assign(n, 0);
  exec_of_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) index_.emplace(run.workload.tasks[i].id, i);
  partition_tasks_.assign(pools_.size(), 0);
  part_queue_.resize(pools_.size());
  blocked_.assign(pools_.size(), false);
}

void Agent::defer(std::function<void()> fn) {
  if (in_submit_) {
    deferred_.push_back(std::move(fn));
  } else {
    fn();
  }
}

void Agent::task_event(std::size_t i, Duration t, Component c, std::string_view name,
                       Attrs attrs) {
  sink_.record(t, EntityKind::kTask, recs_[i].spec().id, c, name, std::move(attrs));
}

void Agent::pilot_event(Duration t, std::string_view name, Attrs attrs) {
  sink_.record(t, EntityKind::kPilot, kPilotId, Component::kAgent, name, std::move(attrs));
}

RunResult Agent::run() {
  pilot_event(Duration{0}, ev::kPilotStart,
              {{"clock", std::string(to_string(run_.clock))},
               {"seed", std::to_string(run_.seed)},
               {"tasks", std::to_string(run_.workload.tasks.size())}});
  const Duration ready =
      run_.agent.pilot_startup + run_.agent.sub_agent_startup * run_.agent.sub_agents.n_sub_agents;
  loop_.at(ready, [this] { on_ready(); });
  loop_.run();
  if (!stopped_) throw IncompleteRun("event queue drained before the pilot stopped");
  sink_.flush();

  RunResult r;
  r.pilot_stop = stop_t_;
  r.tasks = std::move(recs_);
  for (const auto& ex : executors_) {
    r.executors.push_back({ex.name(), ex.rate_state(), ex.submissions()});
  }
  r.partition_tasks = partition_tasks_;
  r.fd_high_water = fds_.high_water();
  r.fd_in_use_at_end = fds_.in_use();
  for (const auto& b : backends_) {
    if (b->crashed()) ++r.backend_crashes;
    if (auto* j = dynamic_cast<SimJsmBackend*>(b.get()); j && j->unstable()) {
      r.backend_unstable = true;
    }
  }
  return r;
}

void Agent::on_ready() {
  const Duration now = loop_.now();
  pilot_event(now, ev::kAgentReady,
              {{"sub_agents", std::to_string(run_.agent.sub_agents.n_sub_agents)},
               {"executors", std::to_string(executors_.size())}});
  for (std::size_t p = 0; p < backends_.size(); ++p) {
    if (auto* dvm = dynamic_cast<DvmHandle*>(backends_[p].get())) dvm->start(pools_[p]);
  }
  for (const auto& ex : executors_) {
    sink_.record(now, EntityKind::kExecutor, ex.name(), Component::kExecutor, "executor_start");
  }
  const std::size_t n = run_.workload.tasks.size();
  const auto bundle = static_cast<std::size_t>(run_.workload.bundle_size);
  std::size_t k = 0;
  for (std::size_t first = 0; first < n; first += bundle, ++k) {
    const std::size_t last = std::min(n, first + bundle);
    loop_.at(now + run_.agent.bundle_pull * static_cast<long>(k + 1),
             [this, first, last] { arrive(first, last); });
  }
  bool polling = false;
  for (const auto& b : backends_) polling = polling || b->needs_polling();
  if (polling) loop_.after(run_.agent.poll_interval, [this] { poll_tick(); });
}

void Agent::arrive(std::size_t first, std::size_t last) {
  const Duration now = loop_.now();
  if (!received_) {
    received_ = true;
    pilot_event(now, ev::kWorkloadReceived,
                {{"tasks", std::to_string(run_.workload.tasks.size())}});
  }
  for (std::size_t i = first; i < last; ++i) {
    recs_.emplace_back(run_.workload.tasks[i], now);
    const int p = part_rr_.next();
    part_of_[i] = p;
    ++partition_tasks_[static_cast<std::size_t>(p)];
    task_event(i, now, Component::kAgent, ev::kNew, {{"bundle_first", std::to_string(first)}});
    part_queue_[static_cast<std::size_t>(p)].push_back(i);
  }
  kick_scheduler();
}

void Agent::poll_tick() {
  if (stopping_) return;
  for (auto& b : backends_) {
    if (b->needs_polling()) b->poll();
  }
  loop_.after(run_.agent.poll_interval, [this] { poll_tick(); });
}

void Agent::kick_scheduler() {
  if (sched_busy_) return;
  sched_busy_ = true;
  loop_.at(loop_.now(), [this] { sched_step(); });
}

void Agent::sched_step() {
  const Duration now = loop_.now();
  if (!unsched_queue_.empty()) {
    const std::size_t i = unsched_queue_.front();
    unsched_queue_.pop_front();
    loop_.at(now + run_.agent.unschedule_cost, [this, i] {
      do_unschedule(i);
      sched_step();
    });
    return;
  }
  const std::size_t k = pools_.size();
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t p = (sched_cursor_ + j) % k;
    auto& q = part_queue_[p];
    while (!q.empty() && !blocked_[p]) {
      const std::size_t i = q.front();
      const TaskSpec& spec = recs_[i].spec();
      if (spec.cores > pools_[p].worker_cores() || spec.gpus > pools_[p].worker_gpus()) {
        q.pop_front();
        cancel(i);
        continue;
      }
      auto slot = pools_[p].try_schedule(spec);
      if (!slot) {
        blocked_[p] = true;
        break;
      }
      q.pop_front();
      sched_cursor_ = (p + 1) % k;
      loop_.at(now + run_.agent.schedule_cost, [this, i, s = std::move(*slot)]() mutable {
        bind(i, std::move(s));
        sched_step();
      });
      return;
    }
  }
  sched_busy_ = false;
  maybe_finish();
}

void Agent::bind(std::size_t i, Slot slot) {
  const Duration now = loop_.now();
  TaskRecord& rec = recs_[i];
  rec.advance(TaskState::kScheduled, now);
  const std::string text = slot.to_string();
  rec.set_slot(std::move(slot));
  const int e = exec_rr_.next();
  exec_of_[i] = e;
  task_event(i, now, Component::kScheduler, ev::kScheduleOk,
             {{"slot", text}, {"partition", std::to_string(part_of_[i])}});
  exec_state_[static_cast<std::size_t>(e)].queue.push_back(i);
  kick_executor(e);
}

void Agent::cancel(std::size_t i) {
  const Duration now = loop_.now();
  recs_[i].advance(TaskState::kCanceled, now);
  task_event(i, now, Component::kScheduler, ev::kCanceled, {{"reason", "does_not_fit"}});
  terminal(i);
}

void Agent::do_unschedule(std::size_t i) {
  const Duration now = loop_.now();
  TaskRecord& rec = recs_[i];
  const auto p = static_cast<std::size_t>(part_of_[i]);
  pools_[p].unschedule(*rec.slot());
  rec.clear_slot();
  blocked_[p] = false;
  task_event(i, now, Component::kScheduler, ev::kUnschedule);
}

void Agent::queue_unschedule(std::size_t i, Duration t) {
  loop_.at(std::max(t, loop_.now()), [this, i] {
    unsched_queue_.push_back(i);
    kick_scheduler();
  });
}

void Agent::kick_executor(int e) {
  ExecState& s = exec_state_[static_cast<std::size_t>(e)];
  if (s.busy || s.queue.empty()) return;
  s.busy = true;
  const std::size_t i = s.queue.front();
  s.queue.pop_front();
  const Duration wait = executors_[static_cast<std::size_t>(e)].gate(loop_.now());
  loop_.at(loop_.now() + wait, [this, e, i, wait] { submit(e, i, wait); });
}

void Agent::submit(int e, std::size_t i, Duration wait) {
  const Duration now = loop_.now();
  Executor& ex = executors_[static_cast<std::size_t>(e)];
  TaskRecord& rec = recs_[i];
  LaunchBackend& backend = *backends_[static_cast<std::size_t>(part_of_[i])];

  in_submit_ = true;
  SubmitOutcome out;
  try {
    out = ex.submit(backend, rec, now, rng_);
  } catch (...) {
    in_submit_ = false;
    throw;
  }
  in_submit_ = false;

  if (out.status == SubmitStatus::kFdExhausted) {
    task_event(i, now, Component::kExecutor, ev::kFailed,
               {{"reason", std::string(to_string(FailureReason::kFdExhausted))},
                {"executor", ex.name()}});
    terminal(i);
    queue_unschedule(i, now);
  } else {
    task_event(i, out.submitted, Component::kExecutor, ev::kSubmit,
               {{"executor", ex.name()}, {"wait_s", format_seconds(wait)}});
    if (out.status == SubmitStatus::kAccepted) {
      task_event(i, out.released, Component::kExecutor, ev::kLaunch);
    } else {
      task_event(i, out.released, Component::kExecutor, ev::kFailed,
                 {{"reason", std::string(to_string(*failure_of(out.status)))},
                  {"executor", ex.name()}});
      terminal(i);
      queue_unschedule(i, out.released);
    }
  }
  auto pending = std::move(deferred_);
  deferred_.clear();
  for (auto& fn : pending) fn();

  loop_.at(out.released, [this, e] {
    exec_state_[static_cast<std::size_t>(e)].busy = false;
    kick_executor(e);
  });
}

void Agent::kick_collector(int e) {
  ExecState& s = exec_state_[static_cast<std::size_t>(e)];
  if (s.collecting || s.collect.empty()) return;
  s.collecting = true;
  Completion c = std::move(s.collect.front());
  s.collect.pop_front();
  loop_.at(loop_.now() + run_.backend.profile.collect_cost, [this, e, c = std::move(c)] {
    finish(e, c);
    exec_state_[static_cast<std::size_t>(e)].collecting = false;
    kick_collector(e);
  });
}

void Agent::finish(int e, const Completion& c) {
  const std::size_t i = index_.at(c.task_id);
  TaskRecord& rec = recs_[i];
  if (is_terminal(rec.state())) return;
  const Duration t_end = std::max(c.t_end, rec.last_timestamp());
  if (c.exit_status == 0) {
    rec.advance(TaskState::kDone, t_end);
    task_event(i, t_end, Component::kExecutor, ev::kDone);
  } else {
    rec.fail(FailureReason::kNonzeroExit, t_end);
    task_event(i, t_end, Component::kExecutor, ev::kFailed,
               {{"reason", std::string(to_string(FailureReason::kNonzeroExit))},
                {"exit", std::to_string(c.exit_status)}});
  }
  executors_[static_cast<std::size_t>(e)].release_fds();
  terminal(i);
  queue_unschedule(i, loop_.now());
}

void Agent::handle_running(const std::string& id, Duration t) {
  const std::size_t i = index_.at(id);
  TaskRecord& rec = recs_[i];
  if (rec.state() != TaskState::kSubmitted) return;
  rec.advance(TaskState::kRunning, t);
  task_event(i, t, Component::kPayload, ev::kRunning);
}

void Agent::handle_completions(int part) {
  auto comps = backends_[static_cast<std::size_t>(part)]->collect_completions();
  for (auto& c : comps) {
    const int e = exec_of_[index_.at(c.task_id)];
    exec_state_[static_cast<std::size_t>(e)].collect.push_back(std::move(c));
    kick_collector(e);
  }
}

void Agent::handle_failed(const std::string& id, FailureReason r, Duration t) {
  const std::size_t i = index_.at(id);
  TaskRecord& rec = recs_[i];
  if (is_terminal(rec.state())) return;
  const Duration at = std::max(t, rec.last_timestamp());
  rec.fail(r, at);
  task_event(i, at, Component::kExecutor, ev::kFailed,
             {{"reason", std::string(to_string(r))}});
  executors_[static_cast<std::size_t>(exec_of_[i])].release_fds();
  terminal(i);
  queue_unschedule(i, at);
}

void Agent::terminal(std::size_t) { ++terminal_; }

void Agent::maybe_finish() {
  if (stopping_ || terminal_ < run_.workload.tasks.size() || !unsched_queue_.empty()) return;
  for (const auto& p : pools_) {
    if (p.live_bindings() != 0) return;
  }
  stopping_ = true;
  const Duration now = loop_.now();
  for (auto& b : backends_) b->terminate();
  for (const auto& ex : executors_) {
    sink_.record(now, EntityKind::kExecutor, ex.name(), Component::kExecutor, "executor_stop");
  }
  loop_.at(now + run_.agent.termination, [this] {
    stop_t_ = loop_.now();
    pilot_event(stop_t_, ev::kPilotStop);
    stopped_ = true;
  });
}

}  // namespace

RunResult run_pilot(const PilotRun& run, ProfileSink& sink) {
  Agent agent(run, sink);
  return agent.run();
}

}  // namespace pilot
