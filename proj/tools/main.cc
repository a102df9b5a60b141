#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pilot/error.h"
#include "pilot/experiment.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kAborted = 3 };

void print_summary(const std::string& label, const pilot::RunSummary& s) {
  std::printf("%s: ttx=%s s ideal=%s s done=%zu failed=%zu canceled=%zu\n", label.c_str(),
              pilot::format_seconds(s.ttx).c_str(), pilot::format_seconds(s.ideal_ttx).c_str(),
              s.n_done, s.n_failed, s.n_canceled);
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out, std::optional<int> reps) {
  pilot::ExperimentConfig cfg = pilot::load_config(path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  if (reps) cfg.repetitions = *reps;
  const auto outcome = pilot::run_experiment(cfg);
  for (const auto& rep : outcome.reps) {
    if (rep.aborted) {
      std::fprintf(stderr, "%s: aborted: %s\n", rep.dir.string().c_str(), rep.error.c_str());
    } else {
      print_summary(rep.dir.string(), rep.summary);
    }
  }
  try {
    pilot::emit_report(outcome.dir);
    std::printf("report: %s\n", (outcome.dir / "report.txt").string().c_str());
  } catch (const pilot::IncompleteRun&) {
  }
  return outcome.any_aborted() ? kAborted : kOk;
}

int cmd_analyze(const fs::path& dir) {
  std::vector<fs::path> reps;
  if (fs::exists(dir / "profile.csv")) {
    reps.push_back(dir);
  } else {
    reps = pilot::repetition_dirs(dir);
  }
  if (reps.empty()) {
    std::fprintf(stderr, "no repetitions under %s\n", dir.string().c_str());
    return kOther;
  }
  int rc = kOk;
  for (const auto& rep : reps) {
    try {
      print_summary(rep.string(), pilot::analyze_run(rep).summary);
    } catch (const pilot::IncompleteRun& e) {
      std::fprintf(stderr, "%s: %s\n", rep.string().c_str(), e.what());
      rc = kAborted;
    }
  }
  return rc;
}

int cmd_report(const fs::path& dir) {
  const auto report = pilot::emit_report(dir);
  std::ifstream in(dir / "report.txt");
  std::cout << in.rdbuf();
  return report.failed.empty() ? kOk : kAborted;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot many-task runtime and simulator"};
  app.require_subcommand(1);

  std::string config_path, run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> reps;

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seed, "Override the base seed");
  run->add_option("--out", out, "Override the output directory");
  run->add_option("--reps", reps, "Override the number of repetitions")
      ->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "Recompute reports from profiles");
  analyze->add_option("run_dir", run_dir, "Experiment or repetition directory")->required();

  auto* report = app.add_subcommand("report", "Consolidate repetitions into a report");
  report->add_option("run_dir", run_dir, "Experiment directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, out, reps);
    if (*analyze) return cmd_analyze(run_dir);
    if (*report) return cmd_report(run_dir);
  } catch (const pilot::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
  return kOther;
}
