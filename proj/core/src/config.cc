#include "pilot/config.h"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pilot/error.h"

namespace pilot {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(std::string_view v) {
  std::size_t used = 0;
  const std::string s(v);
  const long long x = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return x;
}

int to_i32(std::string_view v) {
  const long long x = to_int(v);
  if (x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument("integer out of range");
  return static_cast<int>(x);
}

double to_double(std::string_view v) {
  std::size_t used = 0;
  const std::string s(v);
  const double x = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return x;
}

// Shortest decimal that reads back as the same double.
std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

std::vector<std::string> split_words(std::string_view v) {
  std::vector<std::string> out;
  std::istringstream in{std::string(v)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string join_words(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& s : w) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field int_field(std::string key, Member m) {
  return {std::move(key), [m](ExperimentConfig& c, std::string_view v) { m(c) = to_i32(v); },
          [m](const ExperimentConfig& c) {
            return std::to_string(m(c));
          }};
}

template <typename Member>
Field dur_field(std::string key, Member m) {
  return {std::move(key),
          [m](ExperimentConfig& c, std::string_view v) { m(c) = parse_seconds(v); },
          [m](const ExperimentConfig& c) {
            return format_seconds(m(c));
          }};
}

template <typename Member>
Field dbl_field(std::string key, Member m) {
  return {std::move(key), [m](ExperimentConfig& c, std::string_view v) { m(c) = to_double(v); },
          [m](const ExperimentConfig& c) {
            return fmt_double(m(c));
          }};
}

template <typename Member>
void latency_fields(std::vector<Field>& f, const std::string& prefix, Member m) {
  f.push_back({prefix + ".dist",
               [m](ExperimentConfig& c, std::string_view v) { m(c).kind = parse_latency_kind(v); },
               [m](const ExperimentConfig& c) {
                 return std::string(to_string(m(c).kind));
               }});
  f.push_back(dbl_field(prefix + ".mean_s",
                        [m](auto& c) -> auto& { return m(c).mean_s; }));
  f.push_back(dbl_field(prefix + ".stddev_s",
                        [m](auto& c) -> auto& { return m(c).stddev_s; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = ExperimentConfig;
    std::vector<Field> f;
    f.push_back({"name", [](C& c, std::string_view v) { c.name = std::string(v); },
                 [](const C& c) { return c.name; }});
    f.push_back({"clock", [](C& c, std::string_view v) { c.clock = parse_clock_mode(v); },
                 [](const C& c) { return std::string(to_string(c.clock)); }});
    f.push_back({"seed",
                 [](C& c, std::string_view v) {
                   const std::string s(v);
                   std::size_t used = 0;
                   if (s.empty() || s.front() == '-') {
                     throw std::invalid_argument("seed must be >= 0");
                   }
                   c.seed = std::stoull(s, &used);
                   if (used != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
                 },
                 [](const C& c) { return std::to_string(c.seed); }});
    f.push_back(int_field("repetitions", [](auto& c) -> auto& { return c.repetitions; }));
    f.push_back({"output_dir", [](C& c, std::string_view v) { c.output_dir = std::string(v); },
                 [](const C& c) { return c.output_dir; }});

    f.push_back(int_field("workload.n_tasks", [](auto& c) -> auto& { return c.workload.n_tasks; }));
    f.push_back(int_field("workload.cores_per_task",
                          [](auto& c) -> auto& { return c.workload.cores_per_task; }));
    f.push_back(int_field("workload.gpus_per_task",
                          [](auto& c) -> auto& { return c.workload.gpus_per_task; }));
    f.push_back(dur_field("workload.duration_s",
                          [](auto& c) -> auto& { return c.workload.duration; }));
    f.push_back(int_field("workload.bundle_size",
                          [](auto& c) -> auto& { return c.workload.bundle_size; }));
    f.push_back({"workload.executable",
                 [](C& c, std::string_view v) { c.workload.executable = std::string(v); },
                 [](const C& c) { return c.workload.executable; }});
    f.push_back({"workload.args",
                 [](C& c, std::string_view v) { c.workload.args = split_words(v); },
                 [](const C& c) { return join_words(c.workload.args); }});

    f.push_back(int_field("pool.nodes", [](auto& c) -> auto& { return c.pool.nodes; }));
    f.push_back(int_field("pool.cores_per_node",
                          [](auto& c) -> auto& { return c.pool.cores_per_node; }));
    f.push_back(int_field("pool.gpus_per_node",
                          [](auto& c) -> auto& { return c.pool.gpus_per_node; }));
    f.push_back(int_field("pool.agent_nodes", [](auto& c) -> auto& { return c.pool.agent_nodes; }));

    f.push_back(dur_field("pilot.startup_s",
                          [](auto& c) -> auto& { return c.agent.pilot_startup; }));
    f.push_back(dur_field("pilot.termination_s",
                          [](auto& c) -> auto& { return c.agent.termination; }));
    f.push_back(dur_field("agent.sub_agent_startup_s",
                          [](auto& c) -> auto& { return c.agent.sub_agent_startup; }));
    f.push_back(dur_field("agent.bundle_pull_s",
                          [](auto& c) -> auto& { return c.agent.bundle_pull; }));
    f.push_back(dur_field("scheduler.schedule_cost_s",
                          [](auto& c) -> auto& { return c.agent.schedule_cost; }));
    f.push_back(dur_field("scheduler.unschedule_cost_s",
                          [](auto& c) -> auto& { return c.agent.unschedule_cost; }));

    f.push_back({"backend.kind",
                 [](C& c, std::string_view v) { c.backend.kind = parse_backend_kind(v); },
                 [](const C& c) { return std::string(to_string(c.backend.kind)); }});
    f.push_back(dur_field("backend.submit_delay_s",
                          [](auto& c) -> auto& { return c.backend.submit_delay; }));
    f.push_back({"backend.max_rate_hz",
                 [](C& c, std::string_view v) {
                   const double r = to_double(v);
                   if (r == 0) {
                     c.backend.max_rate_hz.reset();
                   } else {
                     c.backend.max_rate_hz = r;
                   }
                 },
                 [](const C& c) {
                   return c.backend.max_rate_hz ? fmt_double(*c.backend.max_rate_hz)
                                                : std::string("0");
                 }});
    f.push_back(dbl_field("backend.fail_prob_over_rate",
                          [](auto& c) -> auto& { return c.backend.fail_prob_over_rate; }));
    f.push_back(int_field("backend.fd_limit", [](auto& c) -> auto& { return c.backend.fd_limit; }));
    f.push_back(int_field("backend.fd_reserved",
                          [](auto& c) -> auto& { return c.backend.fd_reserved; }));
    f.push_back(int_field("backend.fd_per_task",
                          [](auto& c) -> auto& { return c.backend.fd_per_task; }));
    f.push_back(dur_field("backend.submit_cost_s",
                          [](auto& c) -> auto& { return c.backend.submit_cost; }));
    f.push_back(dur_field("backend.collect_cost_s",
                          [](auto& c) -> auto& { return c.backend.collect_cost; }));

    f.push_back(int_field("launcher.sub_agents",
                          [](auto& c) -> auto& { return c.agent.sub_agents.n_sub_agents; }));
    f.push_back(int_field("launcher.executors_per_sub_agent", [](auto& c) -> auto& {
      return c.agent.sub_agents.executors_per_sub_agent;
    }));
    f.push_back(int_field("launcher.partitions", [](auto& c) -> auto& { return c.agent.partitions; }));

    f.push_back({"dvm.topology",
                 [](C& c, std::string_view v) { c.dvm.topology = parse_topology(v); },
                 [](const C& c) { return std::string(to_string(c.dvm.topology)); }});
    f.push_back(int_field("dvm.capacity_tasks",
                          [](auto& c) -> auto& { return c.dvm.capacity_tasks; }));
    latency_fields(f, "dvm.setup", [](auto& c) -> auto& { return c.dvm.setup; });
    latency_fields(f, "dvm.launch_msg", [](auto& c) -> auto& { return c.dvm.launch_msg; });
    latency_fields(f, "dvm.notify", [](auto& c) -> auto& { return c.dvm.notify; });
    latency_fields(f, "jsm.launch", [](auto& c) -> auto& { return c.jsm.launch; });
    latency_fields(f, "jsm.notify", [](auto& c) -> auto& { return c.jsm.notify; });

    f.push_back(dbl_field("analysis.gpu_weight", [](auto& c) -> auto& { return c.gpu_weight; }));
    f.push_back(dur_field("real.poll_interval_s",
                          [](auto& c) -> auto& { return c.agent.poll_interval; }));
    f.push_back(dur_field("real.jitter_bound_s",
                          [](auto& c) -> auto& { return c.jitter_bound; }));
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (name.empty() || name.find('/') != std::string::npos) fail("name must be a plain word");
  if (repetitions < 1) fail("repetitions must be >= 1");
  if (workload.n_tasks < 1) fail("workload.n_tasks must be >= 1");
  if (workload.cores_per_task < 1) fail("workload.cores_per_task must be >= 1");
  if (workload.gpus_per_task < 0) fail("workload.gpus_per_task must be >= 0");
  if (workload.duration <= Duration{0}) fail("workload.duration_s must be > 0");
  if (workload.bundle_size < 1) fail("workload.bundle_size must be >= 1");
  if (pool.cores_per_node < 1) fail("pool.cores_per_node must be >= 1");
  if (pool.gpus_per_node < 0) fail("pool.gpus_per_node must be >= 0");
  if (pool.agent_nodes < 0) fail("pool.agent_nodes must be >= 0");
  if (pool.nodes < 0) fail("pool.nodes must be >= 0");
  if (pool.nodes > 0 && pool.nodes <= pool.agent_nodes) {
    fail("pool.nodes must exceed pool.agent_nodes");
  }
  if (!(gpu_weight >= 0)) fail("analysis.gpu_weight must be >= 0");
  if (jitter_bound < Duration{0}) fail("real.jitter_bound_s must be >= 0");
  if (backend.kind == BackendKind::kLocalExec && clock != ClockMode::kReal) {
    fail("backend.kind=local_exec requires clock=real");
  }
  try {
    agent.validate();
    backend.validate();
    dvm.validate();
    jsm.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (agent.partitions > worker_nodes()) fail("launcher.partitions exceeds worker nodes");
}

int ExperimentConfig::worker_nodes() const {
  if (pool.nodes > 0) return pool.nodes - pool.agent_nodes;
  const long long cores = static_cast<long long>(workload.n_tasks) * workload.cores_per_task;
  long long n = (cores + pool.cores_per_node - 1) / pool.cores_per_node;
  if (workload.gpus_per_task > 0 && pool.gpus_per_node > 0) {
    const long long gpus = static_cast<long long>(workload.n_tasks) * workload.gpus_per_task;
    n = std::max(n, (gpus + pool.gpus_per_node - 1) / pool.gpus_per_node);
  }
  return static_cast<int>(std::max(1LL, n));
}

Workload ExperimentConfig::make_workload() const {
  Workload w = pilot::make_workload(workload.n_tasks, workload.cores_per_task,
                                    to_seconds(workload.duration));
  w.bundle_size = workload.bundle_size;
  for (auto& t : w.tasks) {
    t.duration = workload.duration;
    t.gpus = workload.gpus_per_task;
    if (!workload.executable.empty()) t.command = Command{workload.executable, workload.args};
  }
  return w;
}

ResourcePool ExperimentConfig::make_pool() const {
  return ResourcePool::uniform(worker_nodes() + pool.agent_nodes, pool.cores_per_node,
                               pool.gpus_per_node, pool.agent_nodes);
}

PilotRun ExperimentConfig::pilot_run(std::uint64_t run_seed,
                                     const std::filesystem::path& stdio_dir) const {
  validate();
  PilotRun r;
  r.clock = clock;
  r.seed = run_seed;
  r.workload = make_workload();
  r.pool = make_pool();
  r.agent = agent;
  r.backend.profile = backend;
  r.backend.dvm = dvm;
  r.backend.jsm = jsm;
  r.backend.stdio_dir = stdio_dir;
  return r;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::pair<std::size_t, std::string>> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!find_field(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!entries.emplace(key, std::make_pair(line_no, value)).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }

  ExperimentConfig c;
  auto apply = [&](const std::string& key, const std::pair<std::size_t, std::string>& e) {
    try {
      find_field(key)->set(c, e.second);
    } catch (const std::exception& ex) {
      throw ConfigError("line " + std::to_string(e.first) + ": " + key + ": " + ex.what());
    }
  };
  if (auto it = entries.find("backend.kind"); it != entries.end()) {
    apply(it->first, it->second);
    switch (c.backend.kind) {
      case BackendKind::kSimDvm: c.backend = LaunchBackendProfile::sim_dvm(); break;
      case BackendKind::kSimJsm: c.backend = LaunchBackendProfile::sim_jsm(); break;
      case BackendKind::kLocalExec: c.backend = LaunchBackendProfile::local_exec(); break;
    }
  }
  if (auto it = entries.find("dvm.topology"); it != entries.end()) {
    apply(it->first, it->second);
    c.dvm = c.dvm.topology == Topology::kTree ? DvmConfig::tree() : DvmConfig::flat();
  }
  for (const auto& [key, e] : entries) {
    if (key == "backend.kind" || key == "dvm.topology") continue;
    apply(key, e);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += '=';
    out += f.get(c);
    out += '\n';
  }
  return out;
}

}  // namespace pilot
