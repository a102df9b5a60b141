#include "pilot/agent.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "pilot/error.h"
#include "sim_helpers.h"

namespace pilot {
namespace {

using testing_support::count_failure;
using testing_support::count_state;
using testing_support::simulate;
using testing_support::zero_overhead;

Duration s(double x) { return from_seconds(x); }

std::map<std::string, std::vector<const Event*>> by_entity(const std::vector<Event>& events) {
  std::map<std::string, std::vector<const Event*>> m;
  for (const auto& e : events) m[e.entity_id].push_back(&e);
  return m;
}

std::optional<Duration> time_of(const std::vector<const Event*>& list, std::string_view name) {
  for (const Event* e : list) {
    if (e->name == name) return e->t;
  }
  return std::nullopt;
}

TEST(RunPilotTest, FullLifecycleChainPerTask) {
  auto c = zero_overhead(3, 20);
  c.dvm = DvmConfig::flat();
  c.agent.pilot_startup = s(5);
  c.agent.termination = s(2);
  c.backend.submit_delay = s(0.1);
  const auto out = simulate(c);
  const auto ents = by_entity(out.events);

  const auto& pilot = ents.at("pilot.0");
  EXPECT_EQ(time_of(pilot, ev::kPilotStart), s(0));
  EXPECT_EQ(time_of(pilot, ev::kAgentReady), s(5));
  ASSERT_TRUE(time_of(pilot, ev::kWorkloadReceived));
  ASSERT_TRUE(time_of(pilot, ev::kPilotStop));

  const std::string_view chain[] = {ev::kNew,     ev::kScheduleOk, ev::kSubmit,    ev::kLaunch,
                                    ev::kRunning, ev::kDone,       ev::kUnschedule};
  Duration last_unschedule{0};
  for (const auto& rec : out.result.tasks) {
    const auto& list = ents.at(rec.spec().id);
    Duration prev{0};
    for (auto name : chain) {
      auto t = time_of(list, name);
      ASSERT_TRUE(t) << rec.spec().id << " missing " << name;
      EXPECT_GE(*t, prev) << rec.spec().id << " " << name;
      prev = *t;
    }
    last_unschedule = std::max(last_unschedule, prev);
    EXPECT_EQ(*time_of(list, ev::kDone) - *time_of(list, ev::kRunning), s(20));
    EXPECT_EQ(rec.state(), TaskState::kDone);
    EXPECT_FALSE(rec.slot());
  }
  EXPECT_EQ(*time_of(pilot, ev::kPilotStop), last_unschedule + s(2));
  EXPECT_EQ(out.result.pilot_stop, last_unschedule + s(2));
}

TEST(RunPilotTest, RecordsMatchEvents) {
  auto c = zero_overhead(50, 10);
  c.dvm = DvmConfig::flat();
  const auto out = simulate(c, 5);
  const auto ents = by_entity(out.events);
  for (const auto& rec : out.result.tasks) {
    const auto& list = ents.at(rec.spec().id);
    EXPECT_EQ(rec.timestamp(TaskState::kSubmitted), time_of(list, ev::kSubmit));
    EXPECT_EQ(rec.timestamp(TaskState::kRunning), time_of(list, ev::kRunning));
    EXPECT_EQ(rec.timestamp(TaskState::kDone), time_of(list, ev::kDone));
  }
}

TEST(RunPilotTest, SameSeedSameLog) {
  auto c = zero_overhead(300, 30);
  c.dvm = DvmConfig::flat();
  c.backend.submit_delay = s(0.01);
  c.backend.max_rate_hz = 50;
  c.backend.fail_prob_over_rate = 0.3;
  auto lines = [&](std::uint64_t seed) {
    std::vector<std::string> v;
    for (const auto& e : simulate(c, seed).events) v.push_back(format_event(e));
    return v;
  };
  EXPECT_EQ(lines(9), lines(9));
  EXPECT_NE(lines(9), lines(10));
}

TEST(RunPilotTest, BundlesArriveOnePullApart) {
  auto c = zero_overhead(10, 5);
  c.workload.bundle_size = 4;
  c.agent.pilot_startup = s(3);
  c.agent.bundle_pull = s(0.5);
  const auto out = simulate(c);
  const auto ents = by_entity(out.events);
  EXPECT_EQ(time_of(ents.at("pilot.0"), ev::kWorkloadReceived), s(3.5));
  for (std::size_t i = 0; i < out.result.tasks.size(); ++i) {
    const auto t = time_of(ents.at(out.result.tasks[i].spec().id), ev::kNew);
    EXPECT_EQ(t, s(3 + 0.5 * static_cast<double>(i / 4 + 1))) << i;
  }
}

TEST(RunPilotTest, SubAgentStartupDelaysReadiness) {
  auto c = zero_overhead(1, 5);
  c.agent.pilot_startup = s(45);
  c.agent.sub_agent_startup = s(10);
  c.agent.sub_agents.n_sub_agents = 4;
  const auto out = simulate(c);
  EXPECT_EQ(time_of(by_entity(out.events).at("pilot.0"), ev::kAgentReady), s(85));
}

TEST(RunPilotTest, SubmissionGapsRespectDelayProperty) {
  for (double delay : {0.0, 0.01, 0.1}) {
    for (int subs : {1, 3}) {
      auto c = zero_overhead(200, 10);
      c.backend.submit_delay = s(delay);
      c.backend.submit_cost = s(0.002);
      c.agent.sub_agents.n_sub_agents = subs;
      const auto out = simulate(c);
      ASSERT_EQ(out.result.executors.size(), static_cast<std::size_t>(subs));
      std::size_t total = 0;
      for (const auto& ex : out.result.executors) {
        total += ex.submissions.size();
        for (std::size_t i = 1; i < ex.submissions.size(); ++i) {
          ASSERT_GE(ex.submissions[i] - ex.submissions[i - 1], s(delay))
              << ex.name << " delay " << delay;
        }
      }
      EXPECT_EQ(total, 200u);
      EXPECT_EQ(count_state(out.result, TaskState::kDone), 200u);
    }
  }
}

TEST(RunPilotTest, TotalEnforcedWaitMatchesDelay) {
  auto c = zero_overhead(1024, 900);
  c.backend.submit_delay = s(0.1);
  const auto out = simulate(c);
  ASSERT_EQ(out.result.executors.size(), 1u);
  EXPECT_GE(to_seconds(out.result.executors[0].gate.total_wait), 102.3);
}

TEST(RunPilotTest, SubAgentsShortenSubmissionPhase) {
  auto submit_span = [](int subs) {
    auto c = zero_overhead(800, 10);
    c.backend.submit_delay = s(0.1);
    c.agent.sub_agents.n_sub_agents = subs;
    const auto out = simulate(c);
    Duration first = Duration::max(), last{0};
    for (const auto& rec : out.result.tasks) {
      const auto t = *rec.timestamp(TaskState::kSubmitted);
      first = std::min(first, t);
      last = std::max(last, t);
    }
    return to_seconds(last - first);
  };
  const double one = submit_span(1);
  const double four = submit_span(4);
  EXPECT_NEAR(one, 79.9, 0.5);
  EXPECT_GE(four, 199 * 0.1 - 1e-6);
  EXPECT_NEAR(one / four, 4.0, 0.3);
}

TEST(RunPilotTest, PartitionsShareWorkloadEvenly) {
  auto c = zero_overhead(16384, 900);
  c.agent.partitions = 4;
  c.agent.sub_agents.n_sub_agents = 4;
  const auto out = simulate(c);
  ASSERT_EQ(out.result.partition_tasks.size(), 4u);
  for (auto n : out.result.partition_tasks) EXPECT_EQ(n, 4096u);
  EXPECT_EQ(count_state(out.result, TaskState::kDone), 16384u);
}

TEST(RunPilotTest, FdBudgetExhaustion) {
  auto c = zero_overhead(1200, 900);
  c.backend.fd_limit = 4096;
  c.backend.fd_reserved = 1195;
  const auto out = simulate(c);
  EXPECT_EQ(count_state(out.result, TaskState::kDone), 967u);
  EXPECT_EQ(count_failure(out.result, FailureReason::kFdExhausted), 233u);
  EXPECT_LE(out.result.fd_high_water, 4096 - 1195);
  EXPECT_EQ(out.result.fd_in_use_at_end, 0);
}

TEST(RunPilotTest, FdBudgetReleasedAcrossWaves) {
  auto c = zero_overhead(2000, 10);
  c.pool.nodes = 3;
  c.backend.fd_limit = 300;
  const auto out = simulate(c);
  EXPECT_EQ(count_state(out.result, TaskState::kDone), 2000u);
  EXPECT_LE(out.result.fd_high_water, 252);
  EXPECT_EQ(out.result.fd_in_use_at_end, 0);
}

TEST(RunPilotTest, OverRateSubmissionsRejected) {
  auto c = zero_overhead(50, 10);
  c.backend.submit_delay = s(0.01);
  c.backend.max_rate_hz = 10;
  c.backend.fail_prob_over_rate = 1.0;
  const auto out = simulate(c);
  EXPECT_EQ(count_failure(out.result, FailureReason::kRateRejected), 49u);
  EXPECT_EQ(count_state(out.result, TaskState::kDone), 1u);
  EXPECT_EQ(out.result.fd_in_use_at_end, 0);

  c.backend.submit_delay = s(0.1);
  c.backend.submit_cost = s(0.03);
  const auto slow = simulate(c);
  EXPECT_EQ(count_failure(slow.result, FailureReason::kRateRejected), 0u);
}

TEST(RunPilotTest, DvmCapacityOverflowCrashes) {
  auto c = zero_overhead(40, 100);
  c.dvm.capacity_tasks = 25;
  const auto out = simulate(c);
  EXPECT_GE(out.result.backend_crashes, 1u);
  EXPECT_GT(count_failure(out.result, FailureReason::kDvmCrashed), 0u);
  for (const auto& rec : out.result.tasks) EXPECT_TRUE(is_terminal(rec.state()));
  EXPECT_EQ(out.result.fd_in_use_at_end, 0);
}

TEST(RunPilotTest, JsmUnstableWithConcurrentExecutors) {
  auto c = zero_overhead(20, 10);
  c.backend = LaunchBackendProfile::sim_jsm();
  c.backend.submit_delay = Duration{0};
  c.backend.max_rate_hz.reset();
  c.agent.sub_agents.n_sub_agents = 2;
  const auto two = simulate(c);
  EXPECT_TRUE(two.result.backend_unstable);
  EXPECT_TRUE(std::any_of(two.events.begin(), two.events.end(),
                          [](const Event& e) { return e.name == "backend_unstable"; }));
  c.agent.sub_agents.n_sub_agents = 1;
  const auto one = simulate(c);
  EXPECT_FALSE(one.result.backend_unstable);
  EXPECT_EQ(count_state(one.result, TaskState::kDone), 20u);
}

TEST(RunPilotTest, OversizedTaskCanceledWithoutBlocking) {
  auto c = zero_overhead(3, 10);
  c.pool.nodes = 2;
  ExperimentConfig ok = c;
  c.workload.cores_per_task = 50;
  const auto out = simulate(c);
  for (const auto& rec : out.result.tasks) EXPECT_EQ(rec.state(), TaskState::kCanceled);
  EXPECT_EQ(simulate(ok).result.tasks.size(), 3u);
}

TEST(RunPilotTest, CoreCapacityNeverExceeded) {
  auto c = zero_overhead(500, 10);
  c.pool.nodes = 3;
  c.pool.cores_per_node = 8;
  c.workload.cores_per_task = 3;
  c.dvm = DvmConfig::flat();
  const auto out = simulate(c);
  std::vector<std::pair<Duration, int>> deltas;
  for (const auto& rec : out.result.tasks) {
    deltas.push_back({*rec.timestamp(TaskState::kScheduled), 3});
    deltas.push_back({*rec.timestamp(TaskState::kDone), -3});
  }
  std::sort(deltas.begin(), deltas.end(),
            [](auto& a, auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
  int level = 0;
  for (auto& [t, d] : deltas) {
    level += d;
    ASSERT_LE(level, 16);
  }
}

TEST(RunPilotTest, LocalExecNeedsRealClock) {
  auto c = zero_overhead(1, 1);
  c.backend = LaunchBackendProfile::local_exec();
  ProfileSink sink;
  PilotRun r;
  r.workload = c.make_workload();
  r.backend.profile = c.backend;
  EXPECT_THROW(run_pilot(r, sink), ConfigError);
}

}  // namespace
}  // namespace pilot
