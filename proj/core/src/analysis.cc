#include "pilot/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "pilot/error.h"

namespace pilot {

namespace {

struct TaskTimes {
  std::optional<Duration> created, scheduled, submitted, launched, running, terminal,
      unscheduled;
  std::string terminal_name;
  std::string reason;
  std::string slot;
  Duration wait{0};
  bool has_wait = false;
};

struct DvmTimes {
  std::optional<Duration> init, pending, sending, running, notify;
};

struct RunIndex {
  std::optional<Duration> pilot_start, agent_ready, workload_received, pilot_stop;
  bool unstable = false;
  std::vector<std::string> order;
  std::unordered_map<std::string, TaskTimes> tasks;
  std::unordered_map<std::string, DvmTimes> dvm;
};

void set_first(std::optional<Duration>& slot, Duration t) {
  if (!slot || t < *slot) slot = t;
}

RunIndex index_run(const std::vector<Event>& events) {
  RunIndex ix;
  for (const auto& e : events) {
    if (e.kind == EntityKind::kPilot) {
      if (e.name == ev::kPilotStart) set_first(ix.pilot_start, e.t);
      else if (e.name == ev::kAgentReady) set_first(ix.agent_ready, e.t);
      else if (e.name == ev::kWorkloadReceived) set_first(ix.workload_received, e.t);
      else if (e.name == ev::kPilotStop) ix.pilot_stop = e.t;
      else if (e.name == "backend_unstable") ix.unstable = true;
    } else if (e.kind == EntityKind::kTask) {
      auto [it, inserted] = ix.tasks.try_emplace(e.entity_id);
      if (inserted) ix.order.push_back(e.entity_id);
      TaskTimes& tt = it->second;
      if (e.name == ev::kNew) {
        tt.created = e.t;
      } else if (e.name == ev::kScheduleOk) {
        tt.scheduled = e.t;
        if (auto s = e.attr("slot")) tt.slot = std::string(*s);
      } else if (e.name == ev::kSubmit) {
        tt.submitted = e.t;
        if (auto w = e.attr("wait_s")) {
          tt.wait = parse_seconds(*w);
          tt.has_wait = true;
        }
      } else if (e.name == ev::kLaunch) {
        tt.launched = e.t;
      } else if (e.name == ev::kRunning) {
        tt.running = e.t;
      } else if (e.name == ev::kDone || e.name == ev::kFailed || e.name == ev::kCanceled) {
        tt.terminal = e.t;
        tt.terminal_name = e.name;
        if (auto r = e.attr("reason")) tt.reason = std::string(*r);
      } else if (e.name == ev::kUnschedule) {
        tt.unscheduled = e.t;
      }
    } else if (e.kind == EntityKind::kDvmJob) {
      DvmTimes& d = ix.dvm[e.entity_id];
      if (e.name == "init_complete") d.init = e.t;
      else if (e.name == "pending_app_launch") d.pending = e.t;
      else if (e.name == "sending_launch_msg") d.sending = e.t;
      else if (e.name == "running") d.running = e.t;
      else if (e.name == "notify_complete") d.notify = e.t;
    }
  }
  return ix;
}

void check_complete(const RunIndex& ix) {
  if (!ix.pilot_stop) throw IncompleteRun("profile has no pilot_stop event");
  for (const auto& id : ix.order) {
    if (!ix.tasks.at(id).terminal) {
      throw IncompleteRun("task " + id + " never reached a terminal state");
    }
  }
}

double seconds(Duration d) { return to_seconds(d); }

PhaseOverhead make_phase(std::string name, const std::vector<Interval>& iv) {
  PhaseOverhead p;
  p.phase = std::move(name);
  p.aggregate = aggregate_overhead(iv);
  p.individual = individual_stats(iv);
  return p;
}

struct Window {
  Duration start{0};
  Duration ready{0};
  Duration end{0};
  Duration stop{0};
};

Window window_of(const RunIndex& ix) {
  Window w;
  w.start = ix.pilot_start.value_or(Duration{0});
  if (!ix.agent_ready) throw IncompleteRun("profile has no agent_ready event");
  w.ready = *ix.agent_ready;
  w.end = std::max(w.ready, ix.workload_received.value_or(w.ready));
  for (const auto& [id, tt] : ix.tasks) {
    if (tt.terminal) w.end = std::max(w.end, *tt.terminal);
    if (tt.unscheduled) w.end = std::max(w.end, *tt.unscheduled);
  }
  w.stop = std::max(w.end, *ix.pilot_stop);
  return w;
}

using SegmentFn = std::function<void(bool gpu, Category c, Duration a, Duration b)>;

// Visits every (unit, category, interval) piece of the utilization partition.
void for_each_segment(const std::vector<Event>& events, const ResourcePool& pool,
                      const SegmentFn& emit) {
  const RunIndex ix = index_run(events);
  check_complete(ix);
  const Window w = window_of(ix);

  for (const Node& n : pool.agent_nodes()) {
    for (int c = 0; c < n.cores; ++c) emit(false, Category::kAgentNodes, w.start, w.stop);
    for (int g = 0; g < n.gpus; ++g) emit(true, Category::kAgentNodes, w.start, w.stop);
  }

  // Flat unit index: cores of every worker node first, then GPUs.
  const auto workers = pool.worker_nodes();
  std::unordered_map<int, std::size_t> core_base, gpu_base;
  std::size_t n_core_units = 0;
  for (const Node& n : workers) {
    core_base[n.id] = n_core_units;
    n_core_units += static_cast<std::size_t>(n.cores);
  }
  std::size_t n_units = n_core_units;
  for (const Node& n : workers) {
    gpu_base[n.id] = n_units;
    n_units += static_cast<std::size_t>(n.gpus);
  }

  std::vector<std::vector<const TaskTimes*>> bindings(n_units);
  for (const auto& id : ix.order) {
    const TaskTimes& tt = ix.tasks.at(id);
    if (!tt.scheduled || tt.slot.empty()) continue;
    const Slot slot = Slot::parse(tt.slot);
    for (const auto& a : slot.assignments) {
      auto cb = core_base.find(a.node_id);
      if (cb == core_base.end()) {
        throw std::invalid_argument("slot of " + id + " names unknown worker node " +
                                    std::to_string(a.node_id));
      }
      for (int c : a.cores) bindings.at(cb->second + static_cast<std::size_t>(c)).push_back(&tt);
      for (int g : a.gpus) {
        bindings.at(gpu_base.at(a.node_id) + static_cast<std::size_t>(g)).push_back(&tt);
      }
    }
  }

  for (std::size_t u = 0; u < n_units; ++u) {
    const bool gpu = u >= n_core_units;
    emit(gpu, Category::kPilotStartup, w.start, w.ready);
    auto& list = bindings[u];
    std::stable_sort(list.begin(), list.end(), [](const TaskTimes* a, const TaskTimes* b) {
      return *a->scheduled < *b->scheduled;
    });
    Duration cursor = w.ready;
    auto piece = [&](Category c, std::optional<Duration> until) {
      Duration t = std::clamp(until.value_or(cursor), cursor, w.end);
      if (t > cursor) emit(gpu, c, cursor, t);
      cursor = t;
    };
    bool first = true;
    for (const TaskTimes* tt : list) {
      piece(first ? Category::kWarmup : Category::kIdle, tt->scheduled);
      first = false;
      // Each marker opens the category that lasts until the next marker
      // present for this task; the unschedule event closes the binding.
      const std::pair<std::optional<Duration>, Category> marks[] = {
          {tt->submitted, Category::kExecRp},
          {tt->launched, Category::kExecDvm},
          {tt->running, Category::kExecCmd},
          {tt->terminal, Category::kUnschedule}};
      Category current = Category::kPrepareExecution;
      for (const auto& [t, opens] : marks) {
        if (!t) continue;
        piece(current, t);
        current = opens;
      }
      piece(current, tt->unscheduled.value_or(w.end));
    }
    piece(list.empty() ? Category::kIdle : Category::kDraining, w.end);
    emit(gpu, Category::kPilotTermination, w.end, w.stop);
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

Aggregate aggregate_overhead(std::vector<Interval> intervals) {
  Aggregate agg;
  if (intervals.empty()) return agg;
  for (const auto& iv : intervals) {
    if (iv.end < iv.start) throw std::invalid_argument("interval ends before it starts");
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  Duration lo = intervals.front().start;
  Duration hi = intervals.front().end;
  Duration max_end = hi;
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    max_end = std::max(max_end, iv.end);
    if (iv.start > hi) {
      agg.union_time += hi - lo;
      lo = iv.start;
      hi = iv.end;
    } else {
      hi = std::max(hi, iv.end);
    }
  }
  agg.union_time += hi - lo;
  agg.span = max_end - intervals.front().start;
  return agg;
}

IndividualStats individual_stats(const std::vector<Interval>& intervals) {
  IndividualStats s;
  s.n = intervals.size();
  if (s.n == 0) return s;
  s.min_s = std::numeric_limits<double>::infinity();
  s.max_s = -std::numeric_limits<double>::infinity();
  std::int64_t total_us = 0;
  for (const auto& iv : intervals) {
    const double d = seconds(iv.end - iv.start);
    total_us += (iv.end - iv.start).count();
    s.min_s = std::min(s.min_s, d);
    s.max_s = std::max(s.max_s, d);
  }
  s.sum_s = static_cast<double>(total_us) / 1e6;
  s.mean_s = s.sum_s / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (const auto& iv : intervals) {
      const double d = seconds(iv.end - iv.start) - s.mean_s;
      ss += d * d;
    }
    s.stddev_s = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

const PhaseOverhead* OverheadReport::find(std::string_view phase) const {
  for (const auto& p : phases) {
    if (p.phase == phase) return &p;
  }
  return nullptr;
}

const PhaseOverhead& OverheadReport::at(std::string_view phase) const {
  if (const auto* p = find(phase)) return *p;
  throw std::out_of_range("no overhead phase '" + std::string(phase) + "'");
}

void require_complete(const std::vector<Event>& events) { check_complete(index_run(events)); }

OverheadReport component_overheads(const std::vector<Event>& events) {
  const RunIndex ix = index_run(events);
  check_complete(ix);
  std::vector<Interval> sched, rp, wait, launcher, setup, launch, notify, joint;
  for (const auto& id : ix.order) {
    const TaskTimes& tt = ix.tasks.at(id);
    if (tt.created && tt.scheduled) sched.push_back({*tt.created, *tt.scheduled});
    if (tt.created && tt.submitted) rp.push_back({*tt.created, *tt.submitted});
    if (tt.submitted && tt.has_wait) wait.push_back({*tt.submitted - tt.wait, *tt.submitted});
    if (tt.submitted && tt.running) launcher.push_back({*tt.submitted, *tt.running});
    auto d = ix.dvm.find(id);
    if (d != ix.dvm.end()) {
      const DvmTimes& dt = d->second;
      if (dt.init && dt.pending) setup.push_back({*dt.init, *dt.pending});
      if (dt.sending && dt.running) launch.push_back({*dt.sending, *dt.running});
      if (dt.notify && tt.terminal_name == ev::kDone) notify.push_back({*tt.terminal, *dt.notify});
    }
  }
  joint = rp;
  joint.insert(joint.end(), launcher.begin(), launcher.end());

  OverheadReport r;
  r.phases.push_back(make_phase("scheduler", sched));
  r.phases.push_back(make_phase("rp", rp));
  r.phases.push_back(make_phase("rp_wait", wait));
  r.phases.push_back(make_phase("launcher", launcher));
  r.phases.push_back(make_phase("dvm_setup", setup));
  r.phases.push_back(make_phase("dvm_launch", launch));
  r.phases.push_back(make_phase("dvm_notify", notify));
  auto j = make_phase("rp_launcher", joint);
  // Sum-based statistics of the joint phase would double count; keep only
  // the aggregates and the task count.
  j.individual = individual_stats({});
  j.individual.n = rp.size();
  r.phases.push_back(std::move(j));
  return r;
}

Duration compute_ttx(const std::vector<Event>& events) {
  const RunIndex ix = index_run(events);
  check_complete(ix);
  if (ix.order.empty()) return Duration{0};
  if (!ix.workload_received) throw IncompleteRun("profile has no workload_received event");
  std::optional<Duration> last_done, last_terminal;
  for (const auto& [id, tt] : ix.tasks) {
    last_terminal = std::max(last_terminal.value_or(*tt.terminal), *tt.terminal);
    if (tt.terminal_name == ev::kDone) {
      last_done = std::max(last_done.value_or(*tt.terminal), *tt.terminal);
    }
  }
  const Duration end = last_done ? *last_done : *last_terminal;
  return std::max(Duration{0}, end - *ix.workload_received);
}

Duration ideal_ttx(const Workload& workload, const ResourcePool& pool) {
  if (workload.tasks.empty()) throw std::invalid_argument("ideal_ttx: empty workload");
  if (!workload.homogeneous()) {
    throw std::invalid_argument("ideal_ttx: heterogeneous workloads are not supported");
  }
  const TaskSpec& t = workload.tasks.front();
  long capacity = pool.worker_cores() / t.cores;
  if (t.gpus > 0) capacity = std::min<long>(capacity, pool.worker_gpus() / t.gpus);
  if (capacity < 1) throw std::invalid_argument("ideal_ttx: task does not fit the pool");
  const long n = static_cast<long>(workload.tasks.size());
  const long waves = (n + capacity - 1) / capacity;
  return t.duration * waves;
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kAgentNodes: return "AgentNodes";
    case Category::kPilotStartup: return "PilotStartup";
    case Category::kWarmup: return "Warmup";
    case Category::kPrepareExecution: return "PrepareExecution";
    case Category::kExecRp: return "ExecRp";
    case Category::kExecDvm: return "ExecDvm";
    case Category::kExecCmd: return "ExecCmd";
    case Category::kUnschedule: return "Unschedule";
    case Category::kDraining: return "Draining";
    case Category::kPilotTermination: return "PilotTermination";
    case Category::kIdle: return "Idle";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

double UtilizationBreakdown::resource_seconds(Category c) const {
  const auto i = static_cast<std::size_t>(c);
  return (static_cast<double>(core_us[i]) + gpu_weight * static_cast<double>(gpu_us[i])) / 1e6;
}

double UtilizationBreakdown::total_resource_seconds() const {
  double total = 0;
  for (Category c : kAllCategories) total += resource_seconds(c);
  return total;
}

double UtilizationBreakdown::percent(Category c) const {
  const double total = total_resource_seconds();
  return total > 0 ? 100.0 * resource_seconds(c) / total : 0.0;
}

UtilizationBreakdown utilization(const std::vector<Event>& events, const ResourcePool& pool,
                                 double gpu_weight) {
  if (!(gpu_weight >= 0)) throw std::invalid_argument("gpu_weight must be >= 0");
  UtilizationBreakdown u;
  u.gpu_weight = gpu_weight;
  for_each_segment(events, pool, [&](bool gpu, Category c, Duration a, Duration b) {
    auto& arr = gpu ? u.gpu_us : u.core_us;
    arr[static_cast<std::size_t>(c)] += (b - a).count();
  });
  return u;
}

std::vector<TimelinePoint> utilization_timeline(const std::vector<Event>& events,
                                                const ResourcePool& pool,
                                                std::size_t samples, double gpu_weight) {
  if (samples < 2) throw std::invalid_argument("timeline needs at least 2 samples");
  struct Delta {
    Duration t;
    std::size_t cat;
    double w;
  };
  std::vector<Delta> deltas;
  Duration lo = Duration::max(), hi = Duration::min();
  for_each_segment(events, pool, [&](bool gpu, Category c, Duration a, Duration b) {
    if (b <= a) return;
    const double w = gpu ? gpu_weight : 1.0;
    const auto ci = static_cast<std::size_t>(c);
    deltas.push_back({a, ci, w});
    deltas.push_back({b, ci, -w});
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  });
  std::vector<TimelinePoint> out;
  if (deltas.empty()) return out;
  std::sort(deltas.begin(), deltas.end(),
            [](const Delta& a, const Delta& b) { return a.t < b.t; });
  std::array<double, kCategoryCount> level{};
  std::size_t next = 0;
  const auto span = (hi - lo).count();
  for (std::size_t k = 0; k < samples; ++k) {
    // Sample just inside each step so the final instant reflects the last
    // open segments rather than an empty pool.
    const Duration t = lo + Duration{static_cast<std::int64_t>(
                                static_cast<double>(span) * static_cast<double>(k) /
                                static_cast<double>(samples - 1))};
    const Duration probe = k + 1 == samples ? t - Duration{1} : t;
    while (next < deltas.size() && deltas[next].t <= probe) {
      level[deltas[next].cat] += deltas[next].w;
      ++next;
    }
    for (Category c : kAllCategories) {
      out.push_back({t, c, std::max(0.0, level[static_cast<std::size_t>(c)])});
    }
  }
  return out;
}

RunSummary summarize(const std::vector<Event>& events, std::optional<Duration> ideal) {
  const RunIndex ix = index_run(events);
  RunSummary s;
  s.ttx = compute_ttx(events);
  s.ideal_ttx = ideal.value_or(Duration{0});
  s.n_tasks = ix.order.size();
  s.backend_unstable = ix.unstable;
  for (const auto& [id, tt] : ix.tasks) {
    if (tt.terminal_name == ev::kDone) {
      ++s.n_done;
    } else if (tt.terminal_name == ev::kCanceled) {
      ++s.n_canceled;
    } else if (tt.terminal_name == ev::kFailed) {
      ++s.n_failed;
      auto r = parse_failure_reason(tt.reason);
      if (!r) continue;
      switch (*r) {
        case FailureReason::kFdExhausted: ++s.fd_exhausted; break;
        case FailureReason::kRateRejected: ++s.rate_rejected; break;
        case FailureReason::kDvmCrashed: ++s.dvm_crashed; break;
        case FailureReason::kNonzeroExit: ++s.nonzero_exit; break;
      }
    }
  }
  return s;
}

void write_overheads_csv(const std::filesystem::path& path, const OverheadReport& r) {
  auto out = open_out(path);
  out << "phase,union_s,span_s,n,sum_s,mean_s,stddev_s,min_s,max_s\n";
  for (const auto& p : r.phases) {
    out << p.phase << ',' << format_seconds(p.aggregate.union_time) << ','
        << format_seconds(p.aggregate.span) << ',' << p.individual.n << ','
        << fmt_double(p.individual.sum_s) << ',' << fmt_double(p.individual.mean_s) << ','
        << fmt_double(p.individual.stddev_s) << ',' << fmt_double(p.individual.min_s) << ','
        << fmt_double(p.individual.max_s) << '\n';
  }
}

void write_utilization_csv(const std::filesystem::path& path, const UtilizationBreakdown& u) {
  auto out = open_out(path);
  out << "category,resource_seconds,percent\n";
  for (Category c : kAllCategories) {
    out << to_string(c) << ',' << fmt_double(u.resource_seconds(c)) << ','
        << fmt_double(u.percent(c)) << '\n';
  }
  out << "Total," << fmt_double(u.total_resource_seconds()) << ",100.000000\n";
}

void write_summary_csv(const std::filesystem::path& path, const RunSummary& s) {
  auto out = open_out(path);
  out << "metric,value\n";
  out << "ttx_s," << format_seconds(s.ttx) << '\n';
  out << "ideal_ttx_s," << format_seconds(s.ideal_ttx) << '\n';
  out << "n_tasks," << s.n_tasks << '\n';
  out << "n_done," << s.n_done << '\n';
  out << "n_failed," << s.n_failed << '\n';
  out << "n_canceled," << s.n_canceled << '\n';
  out << "fd_exhausted," << s.fd_exhausted << '\n';
  out << "rate_rejected," << s.rate_rejected << '\n';
  out << "dvm_crashed," << s.dvm_crashed << '\n';
  out << "nonzero_exit," << s.nonzero_exit << '\n';
  out << "backend_unstable," << (s.backend_unstable ? 1 : 0) << '\n';
}

void write_timeline_csv(const std::filesystem::path& path,
                        const std::vector<TimelinePoint>& points) {
  auto out = open_out(path);
  out << "t_s,category,units\n";
  for (const auto& p : points) {
    out << format_seconds(p.t) << ',' << to_string(p.category) << ',' << fmt_double(p.units)
        << '\n';
  }
}

}  // namespace pilot
