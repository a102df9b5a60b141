#include "pilot/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "pilot/error.h"

namespace fs = std::filesystem;

namespace pilot {

namespace {

constexpr const char* kMetadata = "metadata.txt";
constexpr const char* kProfile = "profile.csv";
constexpr const char* kAborted = "ABORTED";
constexpr const char* kSummary = "report_summary.csv";
constexpr const char* kUtilization = "report_utilization.csv";
constexpr const char* kOverheads = "report_overheads.csv";
constexpr const char* kTimeline = "utilization_timeline.csv";

std::string rep_name(int rep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03d", rep);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

RunAnalysis analyze_events(const std::vector<Event>& events, const ExperimentConfig& cfg,
                           const fs::path& dir) {
  const ResourcePool pool = cfg.make_pool();
  RunAnalysis a;
  a.overheads = component_overheads(events);
  a.utilization = utilization(events, pool, cfg.gpu_weight);
  a.summary = summarize(events, ideal_ttx(cfg.make_workload(), pool));
  write_overheads_csv(dir / kOverheads, a.overheads);
  write_utilization_csv(dir / kUtilization, a.utilization);
  write_summary_csv(dir / kSummary, a.summary);
  write_timeline_csv(dir / kTimeline, utilization_timeline(events, pool, 200, cfg.gpu_weight));
  return a;
}

// Metric name/value pairs of one complete repetition, in report order.
std::vector<std::pair<std::string, double>> rep_metrics(const fs::path& dir) {
  std::vector<std::pair<std::string, double>> out;
  auto rows = read_csv(dir / kSummary);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() >= 2) out.emplace_back(rows[i][0], std::stod(rows[i][1]));
  }
  rows = read_csv(dir / kUtilization);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() >= 3 && rows[i][0] != "Total") {
      out.emplace_back("util_pct." + rows[i][0], std::stod(rows[i][2]));
    }
  }
  rows = read_csv(dir / kOverheads);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 6) continue;
    const std::string& p = rows[i][0];
    out.emplace_back("overhead." + p + ".union_s", std::stod(rows[i][1]));
    out.emplace_back("overhead." + p + ".span_s", std::stod(rows[i][2]));
    out.emplace_back("overhead." + p + ".mean_s", std::stod(rows[i][5]));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

bool ExperimentOutcome::any_aborted() const {
  return std::any_of(reps.begin(), reps.end(), [](const auto& r) { return r.aborted; });
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentOutcome outcome;
  outcome.dir = fs::path(config.output_dir) / config.name;
  fs::create_directories(outcome.dir);
  for (const auto& old : repetition_dirs(outcome.dir)) fs::remove_all(old);

  for (int r = 0; r < config.repetitions; ++r) {
    RepetitionOutcome rep;
    rep.rep = r;
    rep.dir = outcome.dir / rep_name(r);
    fs::create_directories(rep.dir);

    ExperimentConfig rc = config;
    rc.seed = config.seed + static_cast<std::uint64_t>(r);
    rc.repetitions = 1;
    write_text(rep.dir / kMetadata, "# repetition " + std::to_string(r) + " of " +
                                        std::to_string(config.repetitions) + "\n" +
                                        serialize_config(rc));
    try {
      const PilotRun run = rc.pilot_run(rc.seed, rep.dir / "stdio");
      std::vector<Event> events;
      {
        ProfileSink sink(rep.dir / kProfile);
        run_pilot(run, sink);
        sink.close();
        events = sink.events();
      }
      sort_events(events);
      rep.summary = analyze_events(events, rc, rep.dir).summary;
    } catch (const std::exception& e) {
      rep.aborted = true;
      rep.error = e.what();
      write_text(rep.dir / kAborted, rep.error + "\n");
    }
    outcome.reps.push_back(std::move(rep));
  }
  return outcome;
}

RunAnalysis analyze_run(const fs::path& rep_dir) {
  const ExperimentConfig cfg = load_config(rep_dir / kMetadata);
  const auto events = load_profile(rep_dir / kProfile);
  return analyze_events(events, cfg, rep_dir);
}

std::vector<fs::path> repetition_dirs(const fs::path& run_dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(run_dir)) return out;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("rep_", 0) == 0) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const MetricStats* ConsolidatedReport::find(const std::string& metric) const {
  for (const auto& m : metrics) {
    if (m.metric == metric) return &m;
  }
  return nullptr;
}

ConsolidatedReport emit_report(const fs::path& run_dir) {
  ConsolidatedReport report;
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> values;
  for (const auto& dir : repetition_dirs(run_dir)) {
    const std::string name = dir.filename().string();
    if (fs::exists(dir / kAborted) || !fs::exists(dir / kSummary) ||
        !fs::exists(dir / kUtilization) || !fs::exists(dir / kOverheads)) {
      report.failed.push_back(name);
      continue;
    }
    report.complete.push_back(name);
    for (const auto& [metric, v] : rep_metrics(dir)) {
      auto [it, inserted] = values.try_emplace(metric);
      if (inserted) order.push_back(metric);
      it->second.push_back(v);
    }
  }
  if (report.complete.empty()) {
    throw IncompleteRun("no complete repetitions under " + run_dir.string());
  }

  for (const auto& metric : order) {
    const auto& xs = values.at(metric);
    MetricStats s;
    s.metric = metric;
    s.n = xs.size();
    s.min = *std::min_element(xs.begin(), xs.end());
    s.max = *std::max_element(xs.begin(), xs.end());
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
      double ss = 0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    report.metrics.push_back(s);
  }

  std::ostringstream csv;
  csv << "metric,n,mean,stddev,min,max\n";
  for (const auto& m : report.metrics) {
    csv << m.metric << ',' << m.n << ',' << fmt(m.mean) << ',' << fmt(m.stddev) << ','
        << fmt(m.min) << ',' << fmt(m.max) << '\n';
  }
  write_text(run_dir / "report.csv", csv.str());

  std::size_t width = 6;
  for (const auto& m : report.metrics) width = std::max(width, m.metric.size());
  std::ostringstream txt;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s %4s %16s %16s %16s %16s\n", static_cast<int>(width),
                "metric", "n", "mean", "stddev", "min", "max");
  txt << line;
  for (const auto& m : report.metrics) {
    std::snprintf(line, sizeof line, "%-*s %4zu %16.6f %16.6f %16.6f %16.6f\n",
                  static_cast<int>(width), m.metric.c_str(), m.n, m.mean, m.stddev, m.min,
                  m.max);
    txt << line;
  }
  txt << "\ncomplete repetitions: " << report.complete.size() << '\n';
  txt << "failed repetitions: " << report.failed.size();
  for (const auto& f : report.failed) txt << ' ' << f;
  txt << '\n';
  write_text(run_dir / "report.txt", txt.str());
  return report;
}

}  // namespace pilot
