#include "pilot/launcher.h"

#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "oracles.h"
#include "pilot/clock.h"
#include "pilot/dvm.h"
#include "pilot/error.h"
#include "sim_helpers.h"

namespace pilot {
namespace {

using testing_support::count_failure;
using testing_support::count_state;
using testing_support::simulate;
using testing_support::zero_overhead;

Duration s(double x) { return from_seconds(x); }

TEST(RateGateTest, SerialTasksAtTenthOfASecond) {
  RateGateState st;
  Duration now{0};
  for (int i = 0; i < 16384; ++i) now += rate_gate(st, now, s(0.1));
  EXPECT_GE(to_seconds(st.total_wait), 1638.4 - 1e-9);
  EXPECT_EQ(st.gated, 16384u);
}

TEST(RateGateTest, ZeroDelayNeverWaits) {
  RateGateState st;
  std::mt19937 rng(1);
  Duration now{0};
  for (int i = 0; i < 1000; ++i) {
    now += Duration{static_cast<long>(rng() % 1000)};
    ASSERT_EQ(rate_gate(st, now, Duration{0}), Duration{0});
  }
}

TEST(RateGateTest, FourExecutorsRoundRobinSpan) {
  std::vector<RateGateState> ex(4);
  std::vector<Duration> now(4, Duration{0}), first(4), last(4);
  for (int i = 0; i < 16384; ++i) {
    const int e = i % 4;
    const Duration w = rate_gate(ex[e], now[e], s(0.01));
    now[e] += w;
    if (ex[e].gated == 1) first[e] = now[e];
    last[e] = now[e];
  }
  for (int e = 0; e < 4; ++e) {
    EXPECT_EQ(ex[e].gated, 4096u);
    // Gaps between the 4096 submissions plus the first wait.
    EXPECT_GE(to_seconds(last[e]), 40.96 - 1e-9);
    EXPECT_GE(to_seconds(last[e] - first[e]), 40.95 - 1e-9);
  }
}

TEST(RateGateTest, LateArrivalWaitsOnlyTheRemainder) {
  RateGateState st;
  EXPECT_EQ(rate_gate(st, Duration{0}, s(0.1)), s(0.1));
  EXPECT_EQ(rate_gate(st, s(0.15), s(0.1)), s(0.05));
  EXPECT_EQ(rate_gate(st, s(1.0), s(0.1)), Duration{0});
  EXPECT_THROW(rate_gate(st, s(1.0), s(-0.1)), std::invalid_argument);
}

TEST(FdAccountantTest, DefaultCeilingIs967) {
  FdAccountant acct(4096, 1195);
  int n = 0;
  while (acct.try_acquire(3)) ++n;
  EXPECT_EQ(n, 967);
  EXPECT_EQ(acct.in_use(), 2901);
}

TEST(FdAccountantTest, ExactlyOneTaskWhenLimitIsThree) {
  FdAccountant acct(3, 0);
  EXPECT_TRUE(acct.try_acquire(3));
  EXPECT_FALSE(acct.try_acquire(3));
  acct.release(3);
  EXPECT_TRUE(acct.try_acquire(3));
}

TEST(FdAccountantTest, FailureLeavesStateUnchanged) {
  FdAccountant acct(10, 2);
  ASSERT_TRUE(acct.try_acquire(6));
  EXPECT_FALSE(acct.try_acquire(3));
  EXPECT_EQ(acct.in_use(), 6);
  EXPECT_THROW((void)acct.try_acquire(0), std::invalid_argument);
  EXPECT_THROW(acct.release(7), std::logic_error);
  EXPECT_EQ(acct.in_use(), 6);
}

TEST(FdAccountantTest, RandomTraceMatchesCounterOracle) {
  std::mt19937 rng(23);
  for (int round = 0; round < 20; ++round) {
    const int limit = 3 + static_cast<int>(rng() % 500);
    const int reserved = static_cast<int>(rng() % static_cast<unsigned>(limit));
    FdAccountant acct(limit, reserved);
    oracle::FdCounter ref{limit, reserved};
    std::vector<int> held;
    for (int step = 0; step < 2000; ++step) {
      if (held.empty() || rng() % 2) {
        const int n = 1 + static_cast<int>(rng() % 5);
        const bool got = acct.try_acquire(n);
        ASSERT_EQ(got, ref.acquire(n));
        if (got) held.push_back(n);
      } else {
        const std::size_t k = rng() % held.size();
        acct.release(held[k]);
        ref.release(held[k]);
        held.erase(held.begin() + static_cast<long>(k));
      }
      ASSERT_EQ(acct.in_use(), ref.in_use);
      ASSERT_LE(acct.in_use(), limit - reserved);
    }
  }
}

TEST(FdAccountantTest, ConcurrentExecutorsNeverOversubscribe) {
  FdAccountant acct(4096, 1195);
  std::atomic<int> granted{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 20000; ++i) {
        if (acct.try_acquire(3)) {
          ++granted;
          if (i % 3 == 0) {
            acct.release(3);
            --granted;
          }
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(acct.in_use(), 3 * granted.load());
  EXPECT_LE(acct.high_water(), 4096 - 1195);
  EXPECT_EQ(granted.load(), 967);
}

TEST(LaunchBackendProfileTest, PresetsAndValidation) {
  const auto dvm = LaunchBackendProfile::sim_dvm();
  EXPECT_EQ(dvm.submit_delay, s(0.1));
  EXPECT_EQ(dvm.max_rate_hz, 10.0);
  EXPECT_EQ(dvm.fd_per_task, 3);
  EXPECT_EQ(dvm.fd_limit - dvm.fd_reserved, 3 * 967);

  auto jsm = LaunchBackendProfile::sim_jsm();
  jsm.fd_limit = 65536;
  EXPECT_THROW(jsm.validate(), std::invalid_argument);

  auto bad = dvm;
  bad.fd_per_task = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = dvm;
  bad.fd_reserved = bad.fd_limit;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = dvm;
  bad.fail_prob_over_rate = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(parse_backend_kind("ssh"), std::invalid_argument);
}

TEST(SubAgentSetTest, Validation) {
  SubAgentSet s{4, 2};
  EXPECT_EQ(s.executor_count(), 8);
  EXPECT_THROW((SubAgentSet{0, 1}.validate()), std::invalid_argument);
}

// A scheduled record ready for submission.
TaskRecord scheduled(const std::string& id, ResourcePool& pool, Duration at = Duration{0}) {
  TaskSpec spec;
  spec.id = id;
  spec.duration = s(10);
  TaskRecord r(spec);
  r.set_slot(*pool.try_schedule(spec));
  r.advance(TaskState::kScheduled, at);
  return r;
}

TEST(ExecutorTest, FdExhaustionFailsTheTaskWithoutSubmitting) {
  Clock clock(ClockMode::kVirtual);
  EventLoop loop(clock);
  ResourcePool pool = ResourcePool::uniform(1, 4, 0, 0);
  auto profile = LaunchBackendProfile::sim_dvm();
  profile.fd_limit = 3;
  profile.fd_reserved = 0;
  DvmHandle dvm(loop, nullptr, DvmConfig::flat(), profile);
  dvm.start(pool);
  FdAccountant fds(3, 0);
  Executor ex(0, profile, fds);
  Rng rng(1);
  TaskRecord a = scheduled("a", pool), b = scheduled("b", pool);
  EXPECT_EQ(ex.submit(dvm, a, Duration{0}, rng).status, SubmitStatus::kAccepted);
  const auto out = ex.submit(dvm, b, Duration{0}, rng);
  EXPECT_EQ(out.status, SubmitStatus::kFdExhausted);
  EXPECT_EQ(b.state(), TaskState::kFailed);
  EXPECT_EQ(b.failure(), FailureReason::kFdExhausted);
  EXPECT_FALSE(b.timestamp(TaskState::kSubmitted));
  EXPECT_EQ(fds.in_use(), 3);
}

TEST(ExecutorTest, RejectedSubmissionReturnsFds) {
  Clock clock(ClockMode::kVirtual);
  EventLoop loop(clock);
  ResourcePool pool = ResourcePool::uniform(1, 4, 0, 0);
  auto profile = LaunchBackendProfile::sim_dvm();
  profile.fail_prob_over_rate = 1.0;
  DvmHandle dvm(loop, nullptr, DvmConfig::flat(), profile);
  dvm.start(pool);
  FdAccountant fds(4096, 0);
  Executor ex(0, profile, fds);
  Rng rng(1);
  TaskRecord a = scheduled("a", pool), b = scheduled("b", pool);
  EXPECT_EQ(ex.submit(dvm, a, Duration{0}, rng).status, SubmitStatus::kAccepted);
  // Second dispatch 10 ms later is at 100 Hz, above the 10 Hz limit.
  const auto out = ex.submit(dvm, b, s(0.01), rng);
  EXPECT_EQ(out.status, SubmitStatus::kRateRejected);
  EXPECT_EQ(b.failure(), FailureReason::kRateRejected);
  EXPECT_EQ(fds.in_use(), 3);
  EXPECT_EQ(dvm.rate_rejected(), 1u);
}

TEST(ExecutorTest, RequiresScheduledTask) {
  Clock clock(ClockMode::kVirtual);
  EventLoop loop(clock);
  auto profile = LaunchBackendProfile::sim_dvm();
  DvmHandle dvm(loop, nullptr, DvmConfig::flat(), profile);
  FdAccountant fds(4096, 0);
  Executor ex(0, profile, fds);
  Rng rng(1);
  TaskRecord r(make_workload(1, 1, 1).tasks[0]);
  EXPECT_THROW(ex.submit(dvm, r, Duration{0}, rng), std::logic_error);
  EXPECT_EQ(ex.name(), "executor.0");
}

TEST(SubmitTest, TenPerSecondIsStable) {
  auto c = zero_overhead(1024, 60);
  c.backend = LaunchBackendProfile::sim_dvm();
  c.backend.fd_limit = 1 << 20;
  c.backend.fd_reserved = 0;
  const auto out = simulate(c, 7);
  EXPECT_EQ(count_failure(out.result, FailureReason::kRateRejected), 0u);
  EXPECT_EQ(count_state(out.result, TaskState::kDone), 1024u);
}

TEST(SubmitTest, OverRateFailureFractionWithinObservedRange) {
  auto c = zero_overhead(10000, 60);
  c.backend.max_rate_hz = 10.0;
  c.backend.fail_prob_over_rate = 0.05;
  const auto out = simulate(c, 2024);
  const double frac =
      static_cast<double>(count_failure(out.result, FailureReason::kRateRejected)) / 10000.0;
  EXPECT_GE(frac, 0.03);
  EXPECT_LE(frac, 0.10);
  EXPECT_EQ(count_state(out.result, TaskState::kDone) +
                count_failure(out.result, FailureReason::kRateRejected),
            10000u);
}

class RecordingListener : public BackendListener {
 public:
  void on_running(const std::string&, Duration) override {}
  void on_completions_ready() override { ++ready; }
  void on_failed(const std::string&, FailureReason, Duration) override {}
  int ready = 0;
};

TEST(CollectCompletionTest, EmptyWhenNothingRuns) {
  Clock clock(ClockMode::kVirtual);
  EventLoop loop(clock);
  DvmHandle dvm(loop, nullptr, DvmConfig::flat(), LaunchBackendProfile::sim_dvm());
  dvm.start(ResourcePool::uniform(1, 4, 0, 0));
  EXPECT_TRUE(dvm.collect_completions().empty());
}

TEST(CollectCompletionTest, ReturnedInEndTimeOrder) {
  Clock clock(ClockMode::kVirtual);
  EventLoop loop(clock);
  DvmConfig cfg = DvmConfig::flat();
  cfg.setup = cfg.launch_msg = LatencySpec::fixed(0);
  // Notify latency larger than every gap so all ten are ready together.
  cfg.notify = LatencySpec::fixed(100);
  auto profile = LaunchBackendProfile::sim_dvm();
  profile.max_rate_hz.reset();
  DvmHandle dvm(loop, nullptr, cfg, profile);
  RecordingListener l;
  dvm.set_listener(&l);
  ResourcePool pool = ResourcePool::uniform(1, 16, 0, 0);
  dvm.start(pool);
  Rng rng(3);
  std::vector<std::pair<Duration, std::string>> expected;
  const int durations[] = {7, 3, 9, 1, 5, 8, 2, 10, 4, 6};
  for (int i = 0; i < 10; ++i) {
    TaskSpec t;
    t.id = "t" + std::to_string(i);
    t.duration = s(durations[i]);
    ASSERT_EQ(dvm.submit(t, *pool.try_schedule(t), Duration{0}, rng), SubmitStatus::kAccepted);
    expected.emplace_back(t.duration, t.id);
  }
  while (loop.step() && l.ready < 10) {
  }
  std::sort(expected.begin(), expected.end());
  const auto got = dvm.collect_completions();
  ASSERT_EQ(got.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(got[i].task_id, expected[i].second);
    EXPECT_EQ(got[i].t_end, expected[i].first);
    EXPECT_EQ(got[i].exit_status, 0);
  }
}

TEST(CollectCompletionTest, DrainStaggerMirrorsStartStagger) {
  auto c = zero_overhead(50, 100);
  c.backend.submit_delay = s(0.1);
  const auto out = simulate(c);
  std::vector<Duration> running, done;
  for (const auto& r : out.result.tasks) {
    running.push_back(*r.timestamp(TaskState::kRunning));
    done.push_back(*r.timestamp(TaskState::kDone));
  }
  std::sort(running.begin(), running.end());
  std::sort(done.begin(), done.end());
  for (std::size_t i = 1; i < running.size(); ++i) {
    EXPECT_EQ(done[i] - done[i - 1], running[i] - running[i - 1]);
    EXPECT_EQ(running[i] - running[i - 1], s(0.1));
  }
}

TEST(PartitionTest, SingleIsIdentity) {
  ResourcePool pool = ResourcePool::uniform(5, 4, 2, 1);
  const auto parts = make_partitions(pool, 1);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0].worker_cores(), pool.worker_cores());
  EXPECT_EQ(parts[0].worker_nodes().front().id, 1);
}

TEST(PartitionTest, EightNodesIntoFour) {
  ResourcePool pool = ResourcePool::uniform(9, 42, 6, 1);
  const auto parts = make_partitions(pool, 4);
  ASSERT_EQ(parts.size(), 4u);
  int next_id = 1;
  for (const auto& p : parts) {
    ASSERT_EQ(p.worker_nodes().size(), 2u);
    for (const auto& n : p.worker_nodes()) EXPECT_EQ(n.id, next_id++);
  }
}

TEST(PartitionTest, InvalidK) {
  ResourcePool pool = ResourcePool::uniform(3, 4, 0, 1);
  EXPECT_THROW(make_partitions(pool, 0), std::invalid_argument);
  EXPECT_THROW(make_partitions(pool, 3), std::invalid_argument);
}

TEST(PartitionTest, RoundRobinSplitsTasksEvenly) {
  RoundRobin rr(4);
  std::vector<int> counts(4);
  for (int i = 0; i < 16384; ++i) ++counts[static_cast<std::size_t>(rr.next())];
  for (int c : counts) EXPECT_EQ(c, 4096);
  EXPECT_THROW(RoundRobin(0), std::invalid_argument);
}

}  // namespace
}  // namespace pilot
