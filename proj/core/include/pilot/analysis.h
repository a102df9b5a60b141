#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/profiler.h"
#include "pilot/scheduler.h"
#include "pilot/task.h"

namespace pilot {

struct Interval {
  Duration start{0};
  Duration end{0};
};

struct Aggregate {
  Duration union_time{0};  // measure of the union of the intervals
  Duration span{0};        // last end - first start
};

// Throws std::invalid_argument for an interval with end < start.
Aggregate aggregate_overhead(std::vector<Interval> intervals);

struct IndividualStats {
  std::size_t n = 0;
  double mean_s = 0;
  double stddev_s = 0;  // sample standard deviation, 0 for n < 2
  double min_s = 0;
  double max_s = 0;
  double sum_s = 0;
};

IndividualStats individual_stats(const std::vector<Interval>& intervals);

struct PhaseOverhead {
  std::string phase;
  Aggregate aggregate;
  IndividualStats individual;
};

// Per-phase overheads of a run:
//   scheduler    new -> schedule_ok
//   rp           new -> submit
//   rp_wait      enforced submission wait, ending at submit
//   launcher     submit -> running
//   dvm_setup    init_complete -> pending_app_launch
//   dvm_launch   sending_launch_msg -> running
//   dvm_notify   payload end -> notify_complete
//   rp_launcher  joint union of the rp and launcher intervals
struct OverheadReport {
  std::vector<PhaseOverhead> phases;

  const PhaseOverhead* find(std::string_view phase) const;
  const PhaseOverhead& at(std::string_view phase) const;
};

// All of these require a complete run (a pilot_stop event and a terminal
// event for every task) and throw IncompleteRun otherwise.
OverheadReport component_overheads(const std::vector<Event>& events);

// Last task Done minus the arrival of the workload at the agent. When no
// task finished, the last terminal task event is used instead.
Duration compute_ttx(const std::vector<Event>& events);

// ceil(N / (worker cores / cores per task)) x duration. Throws
// std::invalid_argument for heterogeneous workloads or tasks wider than the
// pool.
Duration ideal_ttx(const Workload& workload, const ResourcePool& pool);

void require_complete(const std::vector<Event>& events);

enum class Category {
  kAgentNodes,
  kPilotStartup,
  kWarmup,
  kPrepareExecution,
  kExecRp,
  kExecDvm,
  kExecCmd,
  kUnschedule,
  kDraining,
  kPilotTermination,
  kIdle,
};

inline constexpr std::size_t kCategoryCount = 11;
inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::kAgentNodes, Category::kPilotStartup,     Category::kWarmup,
    Category::kPrepareExecution, Category::kExecRp,     Category::kExecDvm,
    Category::kExecCmd,     Category::kUnschedule,      Category::kDraining,
    Category::kPilotTermination, Category::kIdle};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

struct UtilizationBreakdown {
  // Unit-microseconds per category, cores and GPUs kept apart so the GPU
  // weight can be changed without recomputation.
  std::array<std::int64_t, kCategoryCount> core_us{};
  std::array<std::int64_t, kCategoryCount> gpu_us{};
  double gpu_weight = 1.0;

  double resource_seconds(Category c) const;
  double total_resource_seconds() const;
  double percent(Category c) const;
};

// Partitions [pilot_start, pilot_stop] of every core and GPU of `pool` into
// the categories above. Unit attribution comes from the `slot` attribute of
// schedule_ok events.
UtilizationBreakdown utilization(const std::vector<Event>& events, const ResourcePool& pool,
                                 double gpu_weight = 1.0);

// Long-format samples: number of (weighted) units in each category at
// evenly spaced instants.
struct TimelinePoint {
  Duration t{0};
  Category category = Category::kIdle;
  double units = 0;
};

std::vector<TimelinePoint> utilization_timeline(const std::vector<Event>& events,
                                                const ResourcePool& pool,
                                                std::size_t samples = 200,
                                                double gpu_weight = 1.0);

struct RunSummary {
  Duration ttx{0};
  Duration ideal_ttx{0};
  std::size_t n_tasks = 0;
  std::size_t n_done = 0;
  std::size_t n_failed = 0;
  std::size_t n_canceled = 0;
  std::size_t fd_exhausted = 0;
  std::size_t rate_rejected = 0;
  std::size_t dvm_crashed = 0;
  std::size_t nonzero_exit = 0;
  bool backend_unstable = false;
};

RunSummary summarize(const std::vector<Event>& events, std::optional<Duration> ideal);

void write_overheads_csv(const std::filesystem::path& path, const OverheadReport& r);
void write_utilization_csv(const std::filesystem::path& path, const UtilizationBreakdown& u);
void write_summary_csv(const std::filesystem::path& path, const RunSummary& s);
void write_timeline_csv(const std::filesystem::path& path,
                        const std::vector<TimelinePoint>& points);

}  // namespace pilot
