#include "veg/tasks.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace veg;

namespace {

EntityTrace gap_trace(const std::vector<double>& gaps) {
  EntityTrace tr;
  tr.meta = TraceMeta{static_cast<int>(gaps.size()), 0.4, Actor::Demonstrator, "x"};
  for (std::size_t t = 0; t < gaps.size(); ++t) {
    TraceFrame f;
    f.t = static_cast<int>(t);
    f.entities.push_back(TraceEntity{kHandId, EntityKind::Hand, Vec3::Zero(), {}, gaps[t], false});
    tr.frames.push_back(f);
  }
  return tr;
}

double heading_change_deg(const Vec3& a, const Vec3& b) {
  const double c = a.head<2>().normalized().dot(b.head<2>().normalized());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

}  // namespace

class EveryTask : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryTask, DemoSucceedsValidatesAndSelfImitates) {
  const auto task = builtin_task(GetParam());
  const auto demo = run_demo(task, demo_detector_config(1));
  EXPECT_TRUE(success(task, demo.states.back()).ok);
  EXPECT_NO_THROW(validate_trace(demo.trace));
  EXPECT_EQ(demo.trace.size(), static_cast<std::size_t>(task.T));
  EXPECT_EQ(demo.actions.size(), static_cast<std::size_t>(task.T - 1));
  for (double c : sequence_cost(demo.trace, demo.trace, task.cost)) EXPECT_EQ(c, 0.0);
  for (const auto& s : demo.states) EXPECT_GE(min_footprint_clearance(s), -1e-9);
}

TEST_P(EveryTask, DemoIsDeterministic) {
  const auto task = builtin_task(GetParam());
  EXPECT_EQ(generate_demo(task, 4), generate_demo(task, 4));
}

TEST_P(EveryTask, JsonRoundTripReproducesBuiltin) {
  const auto task = builtin_task(GetParam());
  EXPECT_EQ(task_to_json(task_from_json(task_to_json(task))), task_to_json(task));
}

TEST_P(EveryTask, ShippedSceneFileMatchesBuiltin) {
  const auto path = std::filesystem::path(VEG_SOURCE_DIR) / "scenes" / (GetParam() + ".json");
  EXPECT_EQ(task_to_json(load_task_file(path)), task_to_json(builtin_task(GetParam())));
}

INSTANTIATE_TEST_SUITE_P(Catalog, EveryTask, ::testing::ValuesIn(task_names()),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(Tasks, UnknownTaskListsCatalog) {
  try {
    builtin_task("juggle");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    for (const auto& n : task_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos);
  }
}

TEST(Tasks, SceneJsonRejectsUnknownKeys) {
  auto j = task_to_json(builtin_task("stack"));
  j["colour"] = "red";
  EXPECT_THROW(task_from_json(j), Error);
  auto k = task_to_json(builtin_task("stack"));
  k["weights"]["edges"] = 1.0;
  EXPECT_THROW(task_from_json(k), Error);
}

TEST(Tasks, DefaultEpisodeLengths) {
  for (const auto& n : task_names()) EXPECT_EQ(builtin_task(n).T, n == "pour" ? 20 : 30) << n;
  EXPECT_EQ(builtin_task("push-direction-change").cost.w_object_hand, 50.0);
  EXPECT_EQ(builtin_task("pour").cost.w_object_point, 1.0);
  EXPECT_EQ(builtin_task("push-straight").cost.w_object_point, 0.0);
}

TEST(Demo, PushStraightHandPathIsCollinear) {
  const auto task = builtin_task("push-straight");
  const auto demo = generate_demo(task, 1);
  const Vec3 a = demo.frames.front().at(kHandId).position;
  const Vec3 b = demo.frames.back().at(kHandId).position;
  const Vec3 dir = (b - a).normalized();
  for (const auto& f : demo.frames) {
    const Vec3 d = f.at(kHandId).position - a;
    EXPECT_LT((d - d.dot(dir) * dir).norm(), 1e-6);
  }
}

TEST(Demo, DirectionChangeContainsRightAngleTurn) {
  const auto demo = generate_demo(builtin_task("push-direction-change"), 1);
  // Object path: headings of consecutive nonzero displacements.
  std::vector<Vec3> moves;
  for (std::size_t t = 1; t < demo.size(); ++t) {
    const Vec3 d = demo[t].at("octagon").position - demo[t - 1].at("octagon").position;
    if (d.norm() > 1e-6) moves.push_back(d);
  }
  bool found = false;
  for (std::size_t i = 1; i < moves.size(); ++i) found |= std::abs(heading_change_deg(moves[i - 1], moves[i]) - 90.0) <= 1.0;
  EXPECT_TRUE(found);
  // The hand path turns by a right angle too.
  std::vector<Vec3> hand;
  for (std::size_t t = 1; t < demo.size(); ++t) {
    const Vec3 d = demo[t].at(kHandId).position - demo[t - 1].at(kHandId).position;
    if (d.norm() > 1e-6) hand.push_back(d);
  }
  found = false;
  for (std::size_t i = 1; i < hand.size(); ++i) found |= std::abs(heading_change_deg(hand[i - 1], hand[i]) - 90.0) <= 1.0;
  EXPECT_TRUE(found);
}

TEST(Demo, StackGapSeriesOpensClosesOpens) {
  const auto demo = generate_demo(builtin_task("stack"), 1);
  std::vector<double> runs;
  for (const auto& f : demo.frames) {
    const double g = *f.at(kHandId).finger_gap;
    if (runs.empty() || runs.back() != g) runs.push_back(g);
  }
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0], 0.08);
  EXPECT_EQ(runs[1], 0.01);
  EXPECT_EQ(runs[2], 0.08);
  const auto closed = clone_gripper(demo);
  for (std::size_t t = 0; t < demo.size(); ++t) EXPECT_EQ(closed[t], *demo[t].at(kHandId).finger_gap < 0.03);
}

TEST(Demo, PourEndsRotatedAboveContainer) {
  const auto task = builtin_task("pour");
  const auto demo = run_demo(task, demo_detector_config(1));
  const auto& can = demo.states.back().at("can");
  const auto& mug = demo.states.back().at("mug");
  EXPECT_NEAR(wrap_angle(can.yaw - task.pour_yaw), 0.0, 1e-9);
  EXPECT_LT((can.position - mug.position).head<2>().norm(), 1e-9);
  EXPECT_GT(can.position.z(), mug.top());
}

TEST(CloneGripper, ThresholdExamples) {
  EXPECT_EQ(clone_gripper(gap_trace({0.08, 0.05, 0.02, 0.02, 0.07}), {0.03}),
            (std::vector<bool>{false, false, true, true, false}));
  EXPECT_EQ(clone_gripper(gap_trace({0.08, 0.05, 0.07}), {0.03}), (std::vector<bool>(3, false)));
  EXPECT_EQ(clone_gripper(gap_trace({0.02, 0.01}), {0.005}), (std::vector<bool>(2, false)));
}

TEST(CloneGripper, IdempotentAndMissingHand) {
  const auto tr = gap_trace({0.08, 0.01, 0.03, 0.029});
  EXPECT_EQ(clone_gripper(tr), clone_gripper(tr));
  auto no_hand = tr;
  no_hand.frames[2].entities.clear();
  try {
    clone_gripper(no_hand);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingHand);
  }
}

TEST(Success, PushExamples) {
  const auto task = builtin_task("push-straight");
  auto w = task.scene;
  w.find("octagon")->position.head<2>() = w.at("ring").position.head<2>();
  auto r = success(task, w);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.position_error, 0.0);
  w.find("octagon")->position.x() += 0.011;
  r = success(task, w);
  EXPECT_FALSE(r.ok);
  EXPECT_NEAR(r.position_error, 0.011, 1e-12);
}

TEST(Success, PourYawTolerance) {
  const auto task = builtin_task("pour");
  auto w = task.scene;
  auto* can = w.find("can");
  can->position.head<2>() = w.at("mug").position.head<2>();
  can->yaw = task.pour_yaw + 0.10;
  auto r = success(task, w);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.yaw_error, 0.10, 1e-12);
  can->yaw = task.pour_yaw - 0.2;
  EXPECT_FALSE(success(task, w).ok);
}

TEST(Success, StackNeedsReleasedObjectOnTop) {
  const auto task = builtin_task("stack");
  auto w = task.scene;
  auto* m = w.find("octagon");
  m->position = w.at("ring").position + Vec3(0.01, 0.0, w.at("ring").height);
  EXPECT_TRUE(success(task, w).ok);
  m->position.z() += 0.02;
  EXPECT_FALSE(success(task, w).ok);
}
