#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pilot/analysis.h"
#include "pilot/config.h"

namespace pilot {

struct RunAnalysis {
  RunSummary summary;
  OverheadReport overheads;
  UtilizationBreakdown utilization;
};

struct RepetitionOutcome {
  int rep = 0;
  std::filesystem::path dir;
  bool aborted = false;
  std::string error;
  RunSummary summary;
};

struct ExperimentOutcome {
  std::filesystem::path dir;  // <output_dir>/<name>
  std::vector<RepetitionOutcome> reps;

  bool any_aborted() const;
};

// Runs config.repetitions repetitions sequentially. Repetition r uses seed
// config.seed + r and writes into <output_dir>/<name>/rep_NNN/:
//   metadata.txt            replayable config of this repetition
//   profile.csv             event log
//   report_overheads.csv, report_utilization.csv, report_summary.csv,
//   utilization_timeline.csv
// A repetition that throws leaves an ABORTED file with the error instead of
// reports. Throws ConfigError for an invalid config.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

// Recomputes the reports of one repetition directory from its metadata and
// profile.
RunAnalysis analyze_run(const std::filesystem::path& rep_dir);

// Repetition directories under an experiment directory, sorted.
std::vector<std::filesystem::path> repetition_dirs(const std::filesystem::path& run_dir);

struct MetricStats {
  std::string metric;
  std::size_t n = 0;
  double mean = 0;
  double stddev = 0;
  double min = 0;
  double max = 0;
};

struct ConsolidatedReport {
  std::vector<MetricStats> metrics;
  std::vector<std::string> complete;
  std::vector<std::string> failed;  // aborted or without reports

  const MetricStats* find(const std::string& metric) const;
};

// Aggregates the per-repetition reports under run_dir into report.csv and
// report.txt. Throws IncompleteRun when no repetition is complete.
ConsolidatedReport emit_report(const std::filesystem::path& run_dir);

}  // namespace pilot
