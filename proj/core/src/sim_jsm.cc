#include "pilot/sim_jsm.h"

#include <algorithm>

namespace pilot {

SimJsmBackend::SimJsmBackend(EventLoop& loop, ProfileSink* sink, JsmConfig config,
                             LaunchBackendProfile profile, int concurrent_executors,
                             std::string name)
    : LaunchBackend(std::move(profile)),
      loop_(loop),
      sink_(sink),
      name_(std::move(name)),
      launch_(config.launch),
      notify_(config.notify),
      unstable_(concurrent_executors > 1) {
  if (unstable_ && sink_) {
    sink_->record(loop_.now(), EntityKind::kPilot, name_, Component::kExecutor,
                  "backend_unstable",
                  {{"executors", std::to_string(concurrent_executors)}});
  }
}

SubmitStatus SimJsmBackend::dispatch(const TaskSpec& spec, const Slot&, Duration at,
                                     Rng& rng) {
  ++live_;
  const Duration t_running = at + launch_.sample(rng);
  const Duration t_end = t_running + spec.duration;
  const Duration t_notify = t_end + notify_.sample(rng);
  const std::string id = spec.id;
  loop_.at(t_running, [this, id] {
    if (auto* l = listener()) l->on_running(id, loop_.now());
  });
  loop_.at(t_notify, [this, id, t_end] {
    --live_;
    ready_.push_back(Completion{id, 0, t_end});
    if (auto* l = listener()) l->on_completions_ready();
  });
  return SubmitStatus::kAccepted;
}

std::vector<Completion> SimJsmBackend::collect_completions() {
  std::vector<Completion> out;
  out.swap(ready_);
  std::stable_sort(out.begin(), out.end(),
                   [](const Completion& a, const Completion& b) { return a.t_end < b.t_end; });
  return out;
}

}  // namespace pilot
