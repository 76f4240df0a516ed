#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/baselines/baselines.hpp"
#include "meshret/error.hpp"
#include "meshret/fixtures.hpp"
#include "meshret/metrics.hpp"

#include <cmath>

using namespace meshret;

namespace {

// Floating base with four keypoints that pin it, plus a chain of revolute
// joints whose last link carries the "tip" keypoint.
KinematicModel pinned_chain(const std::vector<Vec3>& axes, double limit, double len) {
  std::vector<Link> links(1);
  links[0].name = "base";
  links[0].joint.type = JointType::Floating;
  for (std::size_t j = 0; j < axes.size(); ++j) {
    Link l;
    l.name = "l" + std::to_string(j);
    l.parent = static_cast<int>(j);
    l.origin = make_pose(Vec3(j == 0 ? 0.0 : len, 0, 0), Quat::Identity());
    l.joint = {"j" + std::to_string(j), JointType::Revolute, axes[j], -limit, limit, -10, 10};
    links.push_back(l);
  }
  std::vector<KeypointFrame> kps{{"b0", 0, Vec3::Zero()},
                                 {"b1", 0, Vec3(0, 0.1, 0)},
                                 {"b2", 0, Vec3(0, 0, 0.1)},
                                 {"b3", 0, Vec3(-0.1, 0, 0)},
                                 {"tip", static_cast<int>(axes.size()), Vec3(len, 0, 0)}};
  return KinematicModel("pinned", links, kps, {});
}

SourceMotion motion_of(const KinematicModel& m, const std::vector<Configuration>& qs) {
  Trajectory tr;
  tr.frames = qs;
  return source_from_trajectory(m, tr, 1.0);
}

double keypoint_rms(const KinematicModel& m, const Trajectory& tr, const SourceMotion& src) {
  double s = 0;
  long n = 0;
  for (int t = 0; t < tr.size(); ++t) {
    const auto p = keypoint_positions(m, tr.frames[t], src.keypoint_names);
    for (std::size_t k = 0; k < p.size(); ++k) {
      s += (p[k] - src.frames[t][k]).squaredNorm();
      ++n;
    }
  }
  return std::sqrt(s / n);
}

}  // namespace

TEST_CASE("baseline configuration validation") {
  BaselineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.phc_learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.vm_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.lambda_skate = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(parse_baseline("videomimic") == BaselineMethod::VideoMimic);
  CHECK_THROWS(parse_baseline("omni"));
}

TEST_CASE("phc recovers a feasible self-generated source") {
  const auto fx = round_trip_fixture(30);
  const auto r = phc_retarget(fx.model, fx.source, fx.options);
  CHECK(keypoint_rms(fx.model, r.trajectory, fx.source) <= 0.01);
}

TEST_CASE("phc clamps a joint asked beyond its limit") {
  const auto m = pinned_chain({Vec3::UnitZ()}, 0.5, 0.3);
  KinematicModel wide = pinned_chain({Vec3::UnitZ()}, 2.0, 0.3);
  Configuration q = wide.zero_configuration();
  q.joint_angles[0] = 1.0;
  const auto src = motion_of(wide, {q, q});
  const auto r = phc_retarget(m, src, RetargetOptions::identity(m));
  for (const auto& f : r.trajectory.frames) CHECK(f.joint_angles[0] == 0.5);
}

TEST_CASE("gmr leaves a matched pose unchanged") {
  const auto fx = standing_fixture(3);
  const Configuration home = fx.model.home();
  const auto src = motion_of(fx.model, {home, home, home});
  BaselineConfig cfg;
  cfg.gmr_orientation = false;
  const auto tr = gmr_retarget(fx.model, src, {}, fx.options, cfg);
  for (const auto& f : tr.frames) {
    CHECK(configuration_difference(f, home).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("gmr reaches a reachable orientation target") {
  const auto m = pinned_chain({Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX()}, M_PI, 0.02);
  const Quat target(Eigen::AngleAxisd(M_PI / 2, Vec3(0.2, 1.0, 0.4).normalized()));
  // Grid search over the three wrist joints confirms the target is reachable.
  double best = 1e9;
  const int steps = 36;
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; b <= steps; ++b)
      for (int c = 0; c <= steps; ++c) {
        Configuration q = m.zero_configuration();
        q.joint_angles << -M_PI + a * 2 * M_PI / steps, -M_PI + b * 2 * M_PI / steps, -M_PI + c * 2 * M_PI / steps;
        const auto poses = forward_kinematics(m, q);
        best = std::min(best, rotation_angle_between(Quat(poses[3].linear()), target));
      }
  REQUIRE(best < 0.2);

  const Configuration q0 = m.zero_configuration();
  const auto src = motion_of(m, {q0});
  OrientationTarget o;
  o.link = 3;
  o.frames = {target};
  BaselineConfig cfg;
  cfg.gmr_orientation_weight = 1.0;
  auto opts = RetargetOptions::identity(m);
  opts.first_frame_iters = 100;
  const auto tr = gmr_retarget(m, src, {o}, opts, cfg);
  const auto poses = forward_kinematics(m, tr.frames[0]);
  CHECK(rotation_angle_between(Quat(poses[3].linear()), target) < 5.0 * M_PI / 180.0);
}

TEST_CASE("videomimic scales stay near one on a robot-proportioned source") {
  const auto fx = round_trip_fixture(30);
  const auto r = videomimic_retarget(fx.model, fx.source, fx.scene, fx.options);
  REQUIRE(!r.scales.empty());
  for (double b : r.scales) {
    CHECK(b >= 0.95);
    CHECK(b <= 1.05);
  }
}

TEST_CASE("videomimic with zero penalty weights ignores the penalty terms") {
  const auto fx = walking_fixture(20);
  BaselineConfig cfg;
  cfg.lambda_contact = cfg.lambda_skate = cfg.lambda_collision = cfg.lambda_joint = cfg.lambda_smooth = 0.0;
  cfg.vm_iterations = 60;
  const auto a = videomimic_retarget(fx.model, fx.source, fx.scene, fx.options, cfg);
  auto bare_opts = fx.options;
  bare_opts.feet.clear();
  SceneDescription bare = fx.scene;
  bare.collision_pairs.clear();
  const auto b = videomimic_retarget(fx.model, fx.source, bare, bare_opts, cfg);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (int t = 0; t < a.trajectory.size(); ++t) {
    CHECK(a.trajectory.frames[t].joint_angles == b.trajectory.frames[t].joint_angles);
  }
  CHECK(a.scales == b.scales);
}

TEST_CASE("imma stage one is near identity on a consistent source") {
  const auto fx = round_trip_fixture(30);
  const auto r = imma_retarget(fx.model, fx.source, fx.scene, fx.options);
  REQUIRE(r.warped.size() == 30);
  KeypointTargets kt = KeypointTargets::from(fx.model, fx.source, fx.options);
  double worst = 0;
  for (int t = 0; t < 30; ++t) {
    const PointList src = kt.frame(fx.source, t);
    for (std::size_t k = 0; k < src.size(); ++k) worst = std::max(worst, (r.warped[t][k] - src[k]).norm());
  }
  CHECK(worst <= 1e-3);

  const auto& foot = fx.options.feet[0];
  const auto stance = detect_stance(fx.source, {foot.source_keypoint}, fx.options.stance_threshold);
  const int src_foot = fx.source.keypoint_index(foot.source_keypoint);
  int slot = -1;
  for (std::size_t s = 0; s < kt.source_index.size(); ++s)
    if (kt.source_index[s] == src_foot) slot = static_cast<int>(s);
  REQUIRE(slot >= 0);
  int pinned = 0;
  for (int t = 1; t < 30; ++t) {
    if (!(stance[t - 1][0] && stance[t][0])) continue;
    ++pinned;
    CHECK((r.warped[t][slot] - r.warped[t - 1][slot]).norm() <= 1e-6);
  }
  CHECK(pinned > 0);
}

TEST_CASE("baseline outputs on the comparison fixtures") {
  const auto walk = walking_fixture(90);
  const auto wsrc = scale_source(walk.source, walk.model.height());
  const auto omni_walk =
      evaluate(retarget_motion(walk.model, wsrc, walk.scene, walk.options).trajectory, walk.model, walk.scene,
               wsrc, walk.scene.task, walk.options.feet);
  CHECK(omni_walk.skating_duration == 0.0);
  for (auto m : {BaselineMethod::Phc, BaselineMethod::Gmr, BaselineMethod::VideoMimic, BaselineMethod::Imma}) {
    const auto tr = run_baseline(m, walk.model, walk.source, walk.scene, walk.options);
    CHECK(tr.size() == walk.source.num_frames());
    const auto q = evaluate(tr, walk.model, walk.scene, wsrc, walk.scene.task, walk.options.feet);
    if (m == BaselineMethod::Phc) CHECK(q.skating_duration > 0.0);
  }

  const auto box = box_pickup_fixture();
  const auto bsrc = scale_source(box.source, box.model.height());
  const auto omni_tr = retarget_motion(box.model, bsrc, box.scene, box.options).trajectory;
  const auto omni = evaluate(omni_tr, box.model, box.scene, bsrc, box.scene.task, box.options.feet);
  const auto gmr = evaluate(run_baseline(BaselineMethod::Gmr, box.model, box.source, box.scene, box.options),
                            box.model, box.scene, bsrc, box.scene.task, box.options.feet);
  CHECK(gmr.penetration_duration > 0.0);
  CHECK(gmr.penetration_max_depth_cm > omni.penetration_max_depth_cm);
  const auto phc = evaluate(run_baseline(BaselineMethod::Phc, box.model, box.source, box.scene, box.options),
                            box.model, box.scene, bsrc, box.scene.task, box.options.feet);
  CHECK(phc.penetration_duration > 0.0);
  CHECK(omni.penetration_duration <= 0.05);

  const auto vm = evaluate(run_baseline(BaselineMethod::VideoMimic, box.model, box.source, box.scene, box.options),
                           box.model, box.scene, bsrc, box.scene.task, box.options.feet);
  REQUIRE(vm.contact_preservation.has_value());
  REQUIRE(omni.contact_preservation.has_value());
  CHECK(*vm.contact_preservation < *omni.contact_preservation);
}
