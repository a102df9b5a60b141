#include "pilot/task.h"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "pilot/error.h"

namespace pilot {
namespace {

Duration s(double x) { return from_seconds(x); }

TEST(MakeWorkloadTest, FullScaleWorkload) {
  const Workload w = make_workload(16384, 1, 900);
  ASSERT_EQ(w.tasks.size(), 16384u);
  for (const auto& t : w.tasks) {
    EXPECT_EQ(t.cores, 1);
    EXPECT_EQ(t.duration, s(900));
    EXPECT_FALSE(t.command.has_value());
  }
  EXPECT_TRUE(w.homogeneous());
}

TEST(MakeWorkloadTest, SingleTask) {
  const Workload w = make_workload(1, 1, 5);
  ASSERT_EQ(w.tasks.size(), 1u);
  EXPECT_EQ(w.tasks[0].duration, s(5));
  EXPECT_NO_THROW(w.validate());
}

TEST(MakeWorkloadTest, TotalCoreDemandMatchesFold) {
  const Workload w = make_workload(10, 2, 30);
  const int demand = std::accumulate(w.tasks.begin(), w.tasks.end(), 0,
                                     [](int acc, const TaskSpec& t) { return acc + t.cores; });
  EXPECT_EQ(demand, 20);
}

TEST(MakeWorkloadTest, RejectsBadInput) {
  EXPECT_THROW(make_workload(0, 1, 5), std::invalid_argument);
  EXPECT_THROW(make_workload(-3, 1, 5), std::invalid_argument);
  EXPECT_THROW(make_workload(1, 0, 5), std::invalid_argument);
  EXPECT_THROW(make_workload(1, 1, 0), std::invalid_argument);
  EXPECT_THROW(make_workload(1, 1, -1), std::invalid_argument);
}

TEST(MakeWorkloadTest, IdsPairwiseDistinctProperty) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> n_dist(1, 3000);
  for (int round = 0; round < 25; ++round) {
    const int n = n_dist(rng);
    const Workload w = make_workload(n, 1, 1);
    std::set<std::string> ids;
    for (const auto& t : w.tasks) ids.insert(t.id);
    ASSERT_EQ(ids.size(), static_cast<std::size_t>(n));
  }
}

TEST(WorkloadTest, ValidateRejectsDuplicatesAndEmpty) {
  Workload w;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = make_workload(3, 1, 1);
  w.tasks[2].id = w.tasks[0].id;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = make_workload(3, 1, 1);
  w.bundle_size = 0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(WorkloadTest, HeterogeneousDetected) {
  Workload w = make_workload(3, 1, 1);
  w.tasks[1].cores = 2;
  EXPECT_FALSE(w.homogeneous());
}

TEST(TaskSpecTest, Invariants) {
  TaskSpec t;
  t.id = "t";
  t.cores = 0;
  t.duration = s(1);
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t.cores = 1;
  t.gpus = -1;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t.gpus = 0;
  t.duration = Duration{0};
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t.command = Command{"true", {}};
  EXPECT_NO_THROW(t.validate());
}

TaskRecord fresh() { return TaskRecord(make_workload(1, 1, 900).tasks[0]); }

TEST(AdvanceStateTest, FirstLegalTransition) {
  TaskRecord r = advance_state(fresh(), TaskState::kScheduled, s(0.3));
  EXPECT_EQ(r.state(), TaskState::kScheduled);
  EXPECT_EQ(r.timestamps().at(TaskState::kNew), Duration{0});
  EXPECT_EQ(r.timestamps().at(TaskState::kScheduled), s(0.3));
}

TEST(AdvanceStateTest, ExecutionSpanBySubtraction) {
  TaskRecord r = fresh();
  r = advance_state(std::move(r), TaskState::kScheduled, s(0.1));
  r = advance_state(std::move(r), TaskState::kSubmitted, s(0.2));
  r = advance_state(std::move(r), TaskState::kRunning, s(0.3));
  r = advance_state(std::move(r), TaskState::kDone, s(900.3));
  EXPECT_EQ(*r.timestamp(TaskState::kDone) - *r.timestamp(TaskState::kRunning), s(900));
  EXPECT_EQ(r.timestamps().size(), 5u);
}

TEST(AdvanceStateTest, SkippingSubmittedIsIllegal) {
  TaskRecord r = advance_state(fresh(), TaskState::kScheduled, s(0.1));
  EXPECT_THROW(advance_state(r, TaskState::kRunning, s(0.2)), IllegalTransition);
}

TEST(AdvanceStateTest, TimeRegressionRejected) {
  TaskRecord r = advance_state(fresh(), TaskState::kScheduled, s(1));
  EXPECT_THROW(advance_state(r, TaskState::kSubmitted, s(0.5)), TimeRegression);
}

TEST(AdvanceStateTest, FailedAndCanceledFromAnyLiveState) {
  for (TaskState upto : {TaskState::kNew, TaskState::kScheduled, TaskState::kSubmitted,
                         TaskState::kRunning}) {
    TaskRecord r = fresh();
    const TaskState chain[] = {TaskState::kScheduled, TaskState::kSubmitted, TaskState::kRunning};
    for (TaskState st : chain) {
      if (r.state() == upto) break;
      r.advance(st, r.last_timestamp() + s(1));
    }
    TaskRecord f = r;
    f.fail(FailureReason::kDvmCrashed, f.last_timestamp());
    EXPECT_EQ(f.state(), TaskState::kFailed);
    EXPECT_EQ(f.failure(), FailureReason::kDvmCrashed);
    r.advance(TaskState::kCanceled, r.last_timestamp());
    EXPECT_EQ(r.state(), TaskState::kCanceled);
  }
}

TEST(AdvanceStateTest, TerminalStatesAreFinal) {
  TaskRecord r = fresh();
  r.fail(FailureReason::kFdExhausted, s(1));
  EXPECT_THROW(r.advance(TaskState::kScheduled, s(2)), IllegalTransition);
  EXPECT_THROW(r.fail(FailureReason::kRateRejected, s(2)), IllegalTransition);
}

TEST(AdvanceStateTest, MonotonicityUnderRandomInterleavingProperty) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pick(0, 6);
  std::uniform_int_distribution<int> dt(-5, 20);
  for (int round = 0; round < 2000; ++round) {
    TaskRecord r = fresh();
    for (int step = 0; step < 8; ++step) {
      const auto next = static_cast<TaskState>(pick(rng));
      const Duration t = r.last_timestamp() + from_seconds(dt(rng));
      try {
        r.advance(next, t);
      } catch (const IllegalTransition&) {
      } catch (const TimeRegression&) {
      }
    }
    Duration prev{0};
    for (const auto& [state, t] : r.timestamps()) {
      ASSERT_GE(t, prev) << "state " << to_string(state);
      prev = t;
    }
  }
}

TEST(TaskEnumsTest, ReasonNamesRoundTrip) {
  for (auto r : {FailureReason::kFdExhausted, FailureReason::kRateRejected,
                 FailureReason::kDvmCrashed, FailureReason::kNonzeroExit}) {
    EXPECT_EQ(parse_failure_reason(to_string(r)), r);
  }
  EXPECT_FALSE(parse_failure_reason("bogus").has_value());
}

}  // namespace
}  // namespace pilot
