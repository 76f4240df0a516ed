#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/error.hpp"
#include "meshret/fixtures.hpp"
#include "meshret/metrics.hpp"

#include <cmath>

using namespace meshret;

namespace {

// Floating sphere (5 cm radius by default) whose keypoint is called left_hand.
KinematicModel ball_model(double radius = 0.05) {
  Link base;
  base.name = "base";
  base.joint.type = JointType::Floating;
  CollisionPrimitive ball{"ball", Shape::sphere(radius), 0, Pose::Identity()};
  return KinematicModel("ball", {base}, {{"left_hand", 0, Vec3::Zero()}}, {ball});
}

SceneDescription box_scene(int frames, const Pose& pose = Pose::Identity()) {
  SceneDescription s;
  s.task = TaskKind::RobotObject;
  SceneObject box;
  box.id = "box";
  box.half_extents = Vec3::Constant(0.1);
  box.track.assign(frames, pose);
  s.objects.push_back(box);
  s.collision_pairs.push_back({"base", PairTarget::Object, "box"});
  return s;
}

// x offset of the sphere center that produces signed distance d to the box.
double center_for(double d, double radius = 0.05) { return 0.1 + radius + d; }

Trajectory ball_track(const std::vector<Vec3>& centers) {
  Trajectory tr;
  for (const auto& c : centers) {
    Configuration q;
    q.base_position = c;
    q.joint_angles = VecX(0);
    tr.frames.push_back(q);
  }
  return tr;
}

Trajectory transformed(const Trajectory& tr, const Pose& T) {
  Trajectory out = tr;
  for (auto& q : out.frames) {
    q.base_position = T * q.base_position;
    q.base_orientation = Quat(T.linear()) * q.base_orientation;
  }
  return out;
}

}  // namespace

TEST_CASE("penetration metrics") {
  const auto m = ball_model();
  const auto scene = box_scene(10);
  std::vector<Vec3> clear(10, Vec3(center_for(0.05), 0, 0));
  auto pm = penetration_metrics(ball_track(clear), m, scene);
  CHECK(pm.duration == 0.0);
  CHECK(pm.max_depth_cm == 0.0);

  std::vector<Vec3> some = clear;
  for (int t = 3; t < 7; ++t) some[t] = Vec3(center_for(-0.03), 0, 0);
  pm = penetration_metrics(ball_track(some), m, scene);
  CHECK(pm.duration == doctest::Approx(0.4));
  CHECK(pm.max_depth_cm == doctest::Approx(3.0).epsilon(1e-12));

  std::vector<Vec3> shallow(10, Vec3(center_for(-0.0005), 0, 0));
  pm = penetration_metrics(ball_track(shallow), m, scene);
  CHECK(pm.duration == 0.0);
  CHECK(pm.max_depth_cm == doctest::Approx(0.05).epsilon(1e-9));

  some[5] = Vec3(center_for(-0.04), 0, 0);
  CHECK(penetration_metrics(ball_track(some), m, scene).max_depth_cm >= 3.0);

  const Pose T = make_pose(Vec3(1.5, -0.7, 0.2), Quat(Eigen::AngleAxisd(2.0, Vec3(0.3, 0.1, 1).normalized())));
  const auto moved = penetration_metrics(transformed(ball_track(some), T), m, transform_scene(scene, T));
  CHECK(moved.duration == penetration_metrics(ball_track(some), m, scene).duration);
  CHECK(moved.max_depth_cm == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("foot skating metrics") {
  const auto m = ball_model();
  const std::vector<FootSpec> feet{{"left_hand", "base", Vec3::Zero()}};
  std::vector<Vec3> slide;
  for (int t = 0; t < 30; ++t) slide.emplace_back(0.02 * t / 30.0, 0, 0);
  std::vector<std::vector<bool>> stance(30, {true});
  MetricOptions opts;
  opts.skating_threshold = 0.5e-3;
  const auto sk = foot_skating_metrics(ball_track(slide), m, feet, stance, opts);
  CHECK(sk.applicable);
  CHECK(sk.duration == doctest::Approx(1.0));
  CHECK(sk.max_velocity_cms == doctest::Approx(2.0).epsilon(1e-9));

  std::vector<Vec3> still(30, Vec3(0.3, 0.2, 0));
  const auto none = foot_skating_metrics(ball_track(still), m, feet, stance);
  CHECK(none.duration == 0.0);
  CHECK(none.max_velocity_cms == 0.0);

  std::vector<std::vector<bool>> swing(30, {false});
  const auto vac = foot_skating_metrics(ball_track(slide), m, feet, swing);
  CHECK_FALSE(vac.applicable);
  CHECK(vac.duration == 0.0);
  CHECK(vac.max_velocity_cms == 0.0);

  std::vector<std::vector<bool>> half(30, {true});
  for (int t = 15; t < 30; ++t) half[t] = {false};
  std::vector<Vec3> partial = still;
  for (int t = 0; t < 30; ++t) partial[t].x() += (t < 10 ? 0.002 * t : 0.02);
  const double shorter = foot_skating_metrics(ball_track(partial), m, feet, half, opts).duration;
  for (int t = 10; t < 30; ++t) partial[t].x() = 0.3 + 0.002 * t;
  CHECK(foot_skating_metrics(ball_track(partial), m, feet, half, opts).duration >= shorter);

  const Pose T = make_pose(Vec3(0.4, 2.0, 0.0), Quat(Eigen::AngleAxisd(0.8, Vec3::UnitZ())));
  const auto rot = foot_skating_metrics(transformed(ball_track(slide), T), m, feet, stance, opts);
  CHECK(rot.duration == sk.duration);
  CHECK(rot.max_velocity_cms == doctest::Approx(sk.max_velocity_cms).epsilon(1e-12));

  CHECK_THROWS_AS(foot_skating_metrics(ball_track(slide), m, feet, std::vector<std::vector<bool>>(29, {true})),
                  ValidationError);
}

TEST_CASE("contact preservation counts held events") {
  const auto m = ball_model();
  const auto scene = box_scene(4);
  ContactSchedule schedule(4, {{"left_hand", PairTarget::Object, 0}});
  std::vector<Vec3> near(4, Vec3(center_for(0.005), 0, 0));
  CHECK(*contact_preservation(ball_track(near), m, scene, schedule) == doctest::Approx(1.0));
  near[2] = Vec3(center_for(0.2), 0, 0);
  CHECK(*contact_preservation(ball_track(near), m, scene, schedule) == doctest::Approx(0.75));
  CHECK_FALSE(contact_preservation(ball_track(near), m, scene, ContactSchedule(4)).has_value());
}

TEST_CASE("contact schedules derived from the source") {
  const auto walk = walking_fixture(30);
  for (const auto& f : derive_contact_schedule(walk.source, walk.scene, TaskKind::RobotOnly)) CHECK(f.empty());

  const auto box = box_pickup_fixture();
  const auto src = scale_source(box.source, box.model.height());
  const auto sched = derive_contact_schedule(src, source_scene(src, box.scene), TaskKind::RobotObject);
  int first = -1, last = -1;
  for (int t = 0; t < static_cast<int>(sched.size()); ++t) {
    if (sched[t].empty()) continue;
    if (first < 0) first = t;
    last = t;
    for (const auto& r : sched[t]) CHECK(r.keypoint.find("hand") != std::string::npos);
  }
  CHECK(std::abs(first - 50) <= 2);
  CHECK(std::abs(last - 200) <= 2);

  const auto climb = terrain_climb_fixture();
  const auto csrc = scale_source(climb.source, climb.model.height());
  const auto cs = derive_contact_schedule(csrc, source_scene(csrc, climb.scene), TaskKind::RobotTerrain);
  int feet_events = 0;
  for (const auto& f : cs)
    for (const auto& r : f)
      feet_events += r.keypoint.find("toe") != std::string::npos || r.keypoint.find("heel") != std::string::npos;
  CHECK(feet_events > 10);
}

TEST_CASE("evaluate on an ideal trajectory and report serialization") {
  const auto m = ball_model(0.01);
  const auto scene = box_scene(12);
  SourceMotion src;
  src.keypoint_names = {"left_hand"};
  std::vector<Vec3> centers;
  for (int t = 0; t < 12; ++t) {
    centers.emplace_back(center_for(0.0, 0.01), 0.005 * t, 0.0);
    src.frames.push_back({centers.back()});
  }
  const auto r = evaluate(ball_track(centers), m, scene, src, TaskKind::RobotObject, {});
  CHECK(r.penetration_duration == 0.0);
  CHECK(r.penetration_max_depth_cm < 1e-9);
  CHECK(r.skating_duration == 0.0);
  CHECK_FALSE(r.skating_applicable);
  REQUIRE(r.contact_preservation.has_value());
  CHECK(*r.contact_preservation == 1.0);

  const std::string text = quality_report_to_json(r);
  CHECK(quality_report_to_json(quality_report_from_json(text)) == text);

  auto short_src = src;
  short_src.frames.pop_back();
  CHECK_THROWS_AS(evaluate(ball_track(centers), m, box_scene(12), short_src, TaskKind::RobotObject, {}),
                  ValidationError);
}
