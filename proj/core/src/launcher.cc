#include "pilot/launcher.h"

#include <cmath>
#include <stdexcept>

#include "pilot/error.h"

namespace pilot {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::kLocalExec: return "local_exec";
    case BackendKind::kSimDvm: return "sim_dvm";
    case BackendKind::kSimJsm: return "sim_jsm";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "local_exec") return BackendKind::kLocalExec;
  if (s == "sim_dvm") return BackendKind::kSimDvm;
  if (s == "sim_jsm") return BackendKind::kSimJsm;
  throw std::invalid_argument("unknown backend kind '" + std::string(s) + "'");
}

void LaunchBackendProfile::validate() const {
  if (submit_delay < Duration{0}) throw std::invalid_argument("submit_delay must be >= 0");
  if (submit_cost < Duration{0}) throw std::invalid_argument("submit_cost must be >= 0");
  if (collect_cost < Duration{0}) throw std::invalid_argument("collect_cost must be >= 0");
  if (max_rate_hz && !(*max_rate_hz > 0)) {
    throw std::invalid_argument("max_rate_hz must be > 0 when set");
  }
  if (!(fail_prob_over_rate >= 0 && fail_prob_over_rate <= 1)) {
    throw std::invalid_argument("fail_prob_over_rate must be in [0, 1]");
  }
  if (fd_per_task < 1) throw std::invalid_argument("fd_per_task must be >= 1");
  if (fd_reserved < 0 || fd_reserved >= fd_limit) {
    throw std::invalid_argument("fd_reserved must be in [0, fd_limit)");
  }
  if (kind == BackendKind::kSimJsm && fd_limit > kJsmFdLimit) {
    throw std::invalid_argument("the JSM open-files limit cannot be raised above 4096");
  }
}

LaunchBackendProfile LaunchBackendProfile::sim_dvm() {
  LaunchBackendProfile p;
  p.kind = BackendKind::kSimDvm;
  p.submit_delay = from_seconds(0.1);
  p.max_rate_hz = 10.0;
  p.fail_prob_over_rate = 0.05;
  p.fd_limit = 4096;
  p.fd_reserved = 1195;
  return p;
}

LaunchBackendProfile LaunchBackendProfile::sim_jsm() {
  LaunchBackendProfile p;
  p.kind = BackendKind::kSimJsm;
  p.fd_limit = kJsmFdLimit;
  p.fd_reserved = 1195;
  return p;
}

LaunchBackendProfile LaunchBackendProfile::local_exec() {
  LaunchBackendProfile p;
  p.kind = BackendKind::kLocalExec;
  p.fd_limit = 4096;
  p.fd_reserved = 64;
  return p;
}

FdAccountant::FdAccountant(int limit, int reserved) : limit_(limit), reserved_(reserved) {
  if (limit < 1 || reserved < 0 || reserved >= limit) {
    throw std::invalid_argument("fd accountant needs 0 <= reserved < limit");
  }
}

bool FdAccountant::try_acquire(int n) {
  if (n < 1) throw std::invalid_argument("fd_acquire needs n >= 1");
  int cur = in_use_.load(std::memory_order_relaxed);
  do {
    if (cur + reserved_ + n > limit_) return false;
  } while (!in_use_.compare_exchange_weak(cur, cur + n, std::memory_order_acq_rel,
                                          std::memory_order_relaxed));
  int hw = high_water_.load(std::memory_order_relaxed);
  while (cur + n > hw &&
         !high_water_.compare_exchange_weak(hw, cur + n, std::memory_order_relaxed)) {
  }
  return true;
}

void FdAccountant::release(int n) {
  int prev = in_use_.fetch_sub(n, std::memory_order_acq_rel);
  if (prev < n) {
    in_use_.fetch_add(n, std::memory_order_acq_rel);
    throw std::logic_error("fd release below zero");
  }
}

Duration rate_gate(RateGateState& state, Duration now, Duration delay) {
  if (delay < Duration{0}) throw std::invalid_argument("rate_gate: delay must be >= 0");
  Duration wait = delay;
  if (state.last_submission) {
    wait = std::max(Duration{0}, *state.last_submission + delay - now);
  }
  state.last_submission = now + wait;
  state.total_wait += wait;
  ++state.gated;
  return wait;
}

void SubAgentSet::validate() const {
  if (n_sub_agents < 1) throw std::invalid_argument("n_sub_agents must be >= 1");
  if (executors_per_sub_agent < 1) {
    throw std::invalid_argument("executors_per_sub_agent must be >= 1");
  }
}

std::optional<FailureReason> failure_of(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::kAccepted: return std::nullopt;
    case SubmitStatus::kFdExhausted: return FailureReason::kFdExhausted;
    case SubmitStatus::kRateRejected: return FailureReason::kRateRejected;
    case SubmitStatus::kDvmCrashed: return FailureReason::kDvmCrashed;
  }
  return std::nullopt;
}

LaunchBackend::LaunchBackend(LaunchBackendProfile profile) : profile_(std::move(profile)) {
  profile_.validate();
}

SubmitStatus LaunchBackend::submit(const TaskSpec& spec, const Slot& slot, Duration at,
                                   Rng& rng) {
  bool over_rate = false;
  if (profile_.max_rate_hz && last_dispatch_) {
    // Instantaneous rate 1/gap, compared strictly against the limit.
    const double gap_us = std::abs(static_cast<double>((at - *last_dispatch_).count()));
    over_rate = gap_us * *profile_.max_rate_hz < 1e6 * (1 - 1e-12);
  }
  last_dispatch_ = at;
  if (over_rate && profile_.fail_prob_over_rate > 0) {
    std::bernoulli_distribution fail(profile_.fail_prob_over_rate);
    if (fail(rng)) {
      ++rate_rejected_;
      return SubmitStatus::kRateRejected;
    }
  }
  return dispatch(spec, slot, at, rng);
}

Executor::Executor(int index, const LaunchBackendProfile& profile, FdAccountant& fds)
    : index_(index),
      delay_(profile.submit_delay),
      submit_cost_(profile.submit_cost),
      fd_per_task_(profile.fd_per_task),
      fds_(fds) {}

std::string Executor::name() const { return "executor." + std::to_string(index_); }

Duration Executor::gate(Duration now) { return rate_gate(gate_, now, delay_); }

SubmitOutcome Executor::submit(LaunchBackend& backend, TaskRecord& rec, Duration now,
                               Rng& rng) {
  if (rec.state() != TaskState::kScheduled || !rec.slot()) {
    throw std::logic_error("submit: task " + rec.spec().id + " is not scheduled");
  }
  SubmitOutcome out;
  out.submitted = now;
  out.released = now;
  if (!fds_.try_acquire(fd_per_task_)) {
    rec.fail(FailureReason::kFdExhausted, now);
    out.status = SubmitStatus::kFdExhausted;
    gate_.last_submission = now;
    return out;
  }
  rec.advance(TaskState::kSubmitted, now);
  submissions_.push_back(now);
  out.released = now + submit_cost_;
  out.status = backend.submit(rec.spec(), *rec.slot(), out.released, rng);
  if (auto reason = failure_of(out.status)) {
    fds_.release(fd_per_task_);
    rec.fail(*reason, out.released);
  }
  gate_.last_submission = out.released;
  return out;
}

void Executor::release_fds() { fds_.release(fd_per_task_); }

std::vector<ResourcePool> make_partitions(const ResourcePool& pool, int k) {
  auto workers = pool.worker_nodes();
  if (k < 1 || k > static_cast<int>(workers.size())) {
    throw std::invalid_argument("make_partitions: k must be in [1, worker nodes]");
  }
  std::vector<ResourcePool> parts;
  parts.reserve(static_cast<std::size_t>(k));
  const std::size_t base = workers.size() / static_cast<std::size_t>(k);
  const std::size_t extra = workers.size() % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(k); ++p) {
    std::size_t n = base + (p < extra ? 1 : 0);
    std::vector<Node> nodes(workers.begin() + static_cast<long>(pos),
                            workers.begin() + static_cast<long>(pos + n));
    parts.emplace_back(std::move(nodes), 0);
    pos += n;
  }
  return parts;
}

RoundRobin::RoundRobin(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("round robin needs k >= 1");
}

int RoundRobin::next() {
  int p = cursor_;
  cursor_ = (cursor_ + 1) % k_;
  return p;
}

}  // namespace pilot
