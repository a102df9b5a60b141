#include "pilot/dvm.h"

#include <algorithm>
#include <stdexcept>

#include "pilot/error.h"

namespace pilot {

std::string_view to_string(Topology t) { return t == Topology::kFlat ? "flat" : "tree"; }

Topology parse_topology(std::string_view s) {
  if (s == "flat") return Topology::kFlat;
  if (s == "tree") return Topology::kTree;
  throw std::invalid_argument("unknown DVM topology '" + std::string(s) + "'");
}

void DvmConfig::validate() const {
  if (capacity_tasks < 1) throw std::invalid_argument("dvm capacity_tasks must be >= 1");
  setup.validate();
  launch_msg.validate();
  notify.validate();
}

LatencySpec DvmConfig::effective_launch_msg() const {
  LatencySpec s = launch_msg;
  if (topology == Topology::kTree) {
    s.mean_s /= 2;
    s.stddev_s /= 2;
  }
  return s;
}

DvmConfig DvmConfig::flat() { return DvmConfig{}; }

DvmConfig DvmConfig::tree() {
  DvmConfig c;
  c.topology = Topology::kTree;
  c.capacity_tasks = kTreeCapacity;
  return c;
}

std::string_view to_string(DvmStage s) {
  switch (s) {
    case DvmStage::kInitComplete: return "init_complete";
    case DvmStage::kPendingAppLaunch: return "pending_app_launch";
    case DvmStage::kSendingLaunchMsg: return "sending_launch_msg";
    case DvmStage::kRunning: return "running";
    case DvmStage::kNotifyComplete: return "notify_complete";
    case DvmStage::kFailed: return "failed";
  }
  return "?";
}

StageDurations dvm_job_durations(const DvmJob& job) {
  if (job.stage != DvmStage::kNotifyComplete) {
    throw IncompleteJob("dvm job " + job.task_id + " is in stage " +
                        std::string(to_string(job.stage)));
  }
  const auto& ts = job.stage_timestamps;
  StageDurations d;
  d.setup = ts.at(DvmStage::kPendingAppLaunch) - ts.at(DvmStage::kInitComplete);
  d.launch = ts.at(DvmStage::kRunning) - ts.at(DvmStage::kSendingLaunchMsg);
  d.run_notify = ts.at(DvmStage::kNotifyComplete) - ts.at(DvmStage::kRunning);
  return d;
}

DvmHandle::DvmHandle(EventLoop& loop, ProfileSink* sink, DvmConfig config,
                     LaunchBackendProfile profile, std::string name)
    : LaunchBackend(std::move(profile)),
      loop_(loop),
      sink_(sink),
      config_(std::move(config)),
      name_(std::move(name)) {
  config_.validate();
  setup_ = LatencySampler(config_.setup);
  launch_ = LatencySampler(config_.effective_launch_msg());
  notify_ = LatencySampler(config_.notify);
}

void DvmHandle::start(const ResourcePool& pool) {
  if (pool.worker_nodes().empty()) throw std::invalid_argument("DVM needs a worker node");
  ++generation_;
  jobs_.clear();
  order_.clear();
  ready_.clear();
  live_ = 0;
  daemons_ = static_cast<int>(pool.worker_nodes().size());
  state_ = State::kRunning;
  if (sink_) {
    sink_->record(loop_.now(), EntityKind::kPilot, name_, Component::kDvm, "dvm_start",
                  {{"daemons", std::to_string(daemons_)},
                   {"topology", std::string(to_string(config_.topology))}});
  }
}

void DvmHandle::terminate() {
  if (state_ != State::kRunning) return;
  ++generation_;
  state_ = State::kStopped;
  daemons_ = 0;
  if (sink_) {
    sink_->record(loop_.now(), EntityKind::kPilot, name_, Component::kDvm, "dvm_stop");
  }
}

void DvmHandle::enter(DvmJob& job, DvmStage stage, Duration t) {
  job.stage = stage;
  job.stage_timestamps[stage] = t;
  if (sink_) {
    sink_->record(t, EntityKind::kDvmJob, job.task_id, Component::kDvm, to_string(stage),
                  {{"dvm", name_}});
  }
}

void DvmHandle::crash(Duration t) {
  state_ = State::kCrashed;
  ++generation_;
  if (sink_) {
    sink_->record(t, EntityKind::kPilot, name_, Component::kDvm, "dvm_crash",
                  {{"live", std::to_string(live_)}});
  }
  std::vector<std::string> failed;
  for (const auto& id : order_) {
    auto& job = *jobs_.at(id);
    if (job.stage != DvmStage::kNotifyComplete && job.stage != DvmStage::kFailed) {
      enter(job, DvmStage::kFailed, t);
      failed.push_back(id);
    }
  }
  live_ = 0;
  if (auto* l = listener()) {
    for (const auto& id : failed) l->on_failed(id, FailureReason::kDvmCrashed, t);
  }
}

SubmitStatus DvmHandle::dispatch(const TaskSpec& spec, const Slot&, Duration at,
                                 Rng& rng) {
  if (state_ == State::kCrashed) return SubmitStatus::kDvmCrashed;
  if (state_ != State::kRunning) throw BackendCrashed(name_ + " is not running");
  if (live_ + 1 > static_cast<std::size_t>(config_.capacity_tasks)) {
    crash(at);
    return SubmitStatus::kDvmCrashed;
  }
  if (jobs_.count(spec.id)) throw std::logic_error("duplicate DVM job " + spec.id);

  auto owned = std::make_unique<DvmJob>();
  DvmJob& job = *owned;
  job.task_id = spec.id;
  jobs_.emplace(spec.id, std::move(owned));
  order_.push_back(spec.id);
  ++live_;

  const Duration setup = setup_.sample(rng);
  const Duration launch = launch_.sample(rng);
  const Duration notify = notify_.sample(rng);
  const Duration t_pending = at + setup;
  const Duration t_running = t_pending + launch;
  const Duration t_end = t_running + spec.duration;
  const Duration t_notify = t_end + notify;
  const std::uint64_t gen = generation_;
  DvmJob* jp = &job;
  const std::string id = spec.id;

  loop_.at(at, [this, gen, jp] {
    if (gen != generation_) return;
    enter(*jp, DvmStage::kInitComplete, loop_.now());
  });
  loop_.at(t_pending, [this, gen, jp] {
    if (gen != generation_) return;
    enter(*jp, DvmStage::kPendingAppLaunch, loop_.now());
    enter(*jp, DvmStage::kSendingLaunchMsg, loop_.now());
  });
  loop_.at(t_running, [this, gen, jp, id] {
    if (gen != generation_) return;
    enter(*jp, DvmStage::kRunning, loop_.now());
    if (auto* l = listener()) l->on_running(id, loop_.now());
  });
  loop_.at(t_notify, [this, gen, jp, id, t_end] {
    if (gen != generation_) return;
    enter(*jp, DvmStage::kNotifyComplete, loop_.now());
    --live_;
    ready_.push_back(Completion{id, 0, t_end});
    if (auto* l = listener()) l->on_completions_ready();
  });
  return SubmitStatus::kAccepted;
}

std::vector<Completion> DvmHandle::collect_completions() {
  if (state_ == State::kCrashed && ready_.empty()) {
    throw BackendCrashed(name_ + " crashed");
  }
  std::vector<Completion> out;
  out.swap(ready_);
  std::stable_sort(out.begin(), out.end(),
                   [](const Completion& a, const Completion& b) { return a.t_end < b.t_end; });
  return out;
}

const DvmJob* DvmHandle::job(const std::string& task_id) const {
  auto it = jobs_.find(task_id);
  return it == jobs_.end() ? nullptr : it->second.get();
}

std::vector<const DvmJob*> DvmHandle::jobs() const {
  std::vector<const DvmJob*> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(jobs_.at(id).get());
  return out;
}

std::unique_ptr<DvmHandle> dvm_start(EventLoop& loop, ProfileSink* sink,
                                     const DvmConfig& config, const ResourcePool& pool,
                                     const LaunchBackendProfile& profile, std::string name) {
  auto h = std::make_unique<DvmHandle>(loop, sink, config, profile, std::move(name));
  h->start(pool);
  return h;
}

}  // namespace pilot
