#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/error.hpp"
#include "meshret/fixtures.hpp"
#include "meshret/io/bvh.hpp"
#include "meshret/io/config.hpp"
#include "meshret/io/files.hpp"
#include "support.hpp"

#include <cmath>
#include <string>

using namespace meshret;
using testsupport::data_dir;

namespace {

Mat3 axis_rotation(BvhChannel c, double degrees) {
  const double a = degrees * M_PI / 180.0;
  switch (c) {
    case BvhChannel::Xrotation: return testsupport::rodrigues(Vec3::UnitX(), a);
    case BvhChannel::Yrotation: return testsupport::rodrigues(Vec3::UnitY(), a);
    case BvhChannel::Zrotation: return testsupport::rodrigues(Vec3::UnitZ(), a);
    default: return Mat3::Identity();
  }
}

// World 4x4 of each joint by walking the channel list of every ancestor.
std::vector<Eigen::Matrix4d> bvh_oracle(const BvhDocument& doc, int frame) {
  std::vector<int> first(doc.joints.size());
  int c = 0;
  for (std::size_t j = 0; j < doc.joints.size(); ++j) {
    first[j] = c;
    c += static_cast<int>(doc.joints[j].channels.size());
  }
  std::vector<Eigen::Matrix4d> world(doc.joints.size());
  for (std::size_t j = 0; j < doc.joints.size(); ++j) {
    const auto& J = doc.joints[j];
    Vec3 t = J.offset;
    Mat3 r = Mat3::Identity();
    for (std::size_t k = 0; k < J.channels.size(); ++k) {
      const double v = doc.frames[frame][first[j] + k];
      switch (J.channels[k]) {
        case BvhChannel::Xposition: t.x() += v; break;
        case BvhChannel::Yposition: t.y() += v; break;
        case BvhChannel::Zposition: t.z() += v; break;
        default: r = r * axis_rotation(J.channels[k], v);
      }
    }
    const Eigen::Matrix4d local = testsupport::homogeneous(r, t);
    world[j] = J.parent < 0 ? local : Eigen::Matrix4d(world[J.parent] * local);
  }
  return world;
}

}  // namespace

TEST_CASE("bvh parse and serialize preserve every value") {
  for (const char* name : {"two_joint.bvh", "humanoid22.bvh"}) {
    const auto doc = load_bvh(data_dir() / name);
    const auto again = parse_bvh(serialize_bvh(doc));
    REQUIRE(again.joints.size() == doc.joints.size());
    for (std::size_t j = 0; j < doc.joints.size(); ++j) {
      CHECK(again.joints[j].name == doc.joints[j].name);
      CHECK(again.joints[j].parent == doc.joints[j].parent);
      CHECK(again.joints[j].offset == doc.joints[j].offset);
      CHECK(again.joints[j].channels == doc.joints[j].channels);
      CHECK(again.joints[j].end_site == doc.joints[j].end_site);
    }
    CHECK(again.frame_time == doc.frame_time);
    CHECK(again.frames == doc.frames);
    CHECK(serialize_bvh(again) == serialize_bvh(doc));
  }
  const auto h = load_bvh(data_dir() / "humanoid22.bvh");
  CHECK(h.joints.size() == 22);
  CHECK(h.num_frames() == 40);
  CHECK(h.num_channels() == 6 + 21 * 3);
}

TEST_CASE("bvh errors") {
  try {
    load_bvh(data_dir() / "truncated.bvh");
    FAIL("truncated file parsed");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  CHECK_THROWS_AS(load_bvh(data_dir() / "absent.bvh"), IoError);
  CHECK_THROWS_AS(parse_bvh("HIERARCHY\nROOT A\n{\n  OFFSET 0 0\n}\n"), ParseError);
  auto doc = load_bvh(data_dir() / "two_joint.bvh");
  doc.frames[0].pop_back();
  CHECK_THROWS_AS(doc.validate(), ValidationError);
}

TEST_CASE("bvh forward kinematics") {
  const auto doc = load_bvh(data_dir() / "two_joint.bvh");
  const auto poses = bvh_joint_poses(doc, 0);
  CHECK((poses[0].translation() - Vec3(1, 90, 2)).norm() < 1e-12);
  CHECK((poses[1].translation() - Vec3(1, 100, 2)).norm() < 1e-12);
  CHECK((poses[1].linear() * Vec3::UnitX() - Vec3(0, 0, -1)).norm() < 1e-12);

  auto h = load_bvh(data_dir() / "humanoid22.bvh");
  Rng rng(5);
  const int channels = h.num_channels();
  h.frames.assign(1000, std::vector<double>(channels));
  for (auto& f : h.frames)
    for (auto& v : f) v = rng.uniform(-180.0, 180.0);
  double worst = 0;
  for (int t = 0; t < h.num_frames(); ++t) {
    const auto got = bvh_joint_poses(h, t);
    const auto want = bvh_oracle(h, t);
    for (std::size_t j = 0; j < got.size(); ++j) worst = std::max(worst, (got[j].matrix() - want[j]).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("bvh to source maps y-up file units to z-up meters") {
  const auto doc = load_bvh(data_dir() / "two_joint.bvh");
  BvhImport imp = default_bvh_import(doc);
  imp.demonstrator_height = 1.05;
  const auto src = bvh_to_source(doc, imp);
  CHECK(src.height == 1.05);
  CHECK(src.dt == doctest::Approx(0.0333333));
  const int hips = src.keypoint_index("Hips");
  CHECK((src.frames[0][hips] - Vec3(0.02, 0.01, 0.9)).norm() < 1e-12);
  const int tip = src.keypoint_index("Spine_end");
  CHECK((src.frames[0][tip] - Vec3(0.02, 0.01, 1.05)).norm() < 1e-12);
}

TEST_CASE("pipeline config parsing") {
  const std::string text = R"({
    "model": "robot.json", "source": "walk.bvh", "source_format": "bvh", "seed": 7,
    "retarget": {"stance_threshold": 0.02, "solver": {"max_iters": 7}},
    "bvh": {"unit_scale": 0.025}
  })";
  const auto cfg = parse_config(text, "/data");
  CHECK(cfg.model == std::filesystem::path("/data/robot.json"));
  CHECK(cfg.source_format == SourceFormat::Bvh);
  CHECK(cfg.seed == 7);
  CHECK(cfg.retarget.stance_threshold == 0.02);
  CHECK(cfg.retarget.solver.max_iters == 7);
  CHECK(cfg.bvh.unit_scale == 0.025);
  CHECK_THROWS_AS(parse_config(R"({"model": "a", "mystery": 1})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"retarget": {"solver": {"iters": 3}}})"), ValidationError);
  CHECK_THROWS_AS(parse_config("{"), ParseError);

  const auto back = parse_config(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("trajectory and source files round trip") {
  const auto fx = walking_fixture(12);
  const auto traj = gait_trajectory(fx.model, walking_plan(robot_proportions(), 12));
  const auto text = trajectory_to_json(traj, fx.model);
  const auto back = trajectory_from_json(text, fx.model);
  REQUIRE(back.size() == traj.size());
  for (int t = 0; t < traj.size(); ++t) {
    CHECK(back.frames[t].joint_angles == traj.frames[t].joint_angles);
    CHECK(back.frames[t].base_position == traj.frames[t].base_position);
    CHECK(back.frames[t].base_orientation.coeffs() == traj.frames[t].base_orientation.coeffs());
  }
  CHECK(trajectory_to_json(back, fx.model) == text);
  CHECK(trajectory_reports_from_json(text).empty());

  std::vector<FrameReport> reports(traj.size());
  reports[3].deformation_energy = 0.125;
  reports[3].penetration_flag = true;
  const auto with = trajectory_to_json(traj, fx.model, &reports);
  const auto rr = trajectory_reports_from_json(with);
  REQUIRE(rr.size() == reports.size());
  CHECK(rr[3].deformation_energy == 0.125);
  CHECK(rr[3].penetration_flag);

  const auto single = testsupport::random_chain(2, 1);
  try {
    trajectory_from_json(text, single);
    FAIL("mismatched model accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("chain") != std::string::npos);
  }

  const auto box = box_pickup_fixture();
  const auto s = source_motion_from_json(source_motion_to_json(box.source));
  CHECK(s.keypoint_names == box.source.keypoint_names);
  CHECK(s.frames == box.source.frames);
  CHECK(s.height == box.source.height);
  REQUIRE(s.object_tracks.count("box") == 1);
  CHECK(s.object_tracks.at("box")[100].matrix() == box.source.object_tracks.at("box")[100].matrix());
}

TEST_CASE("augmentation spec and batch files") {
  AugmentationSpec spec;
  spec.delta_p = Vec3(0.1, -0.05, 0);
  spec.t_m = 14;
  spec.anchor = AnchorPreset::None;
  const auto back = augmentation_spec_from_json(augmentation_spec_to_json(spec));
  CHECK(back.delta_p == spec.delta_p);
  CHECK(back.t_m == spec.t_m);
  CHECK(back.anchor == AnchorPreset::None);
  CHECK_THROWS_AS(augmentation_spec_from_json(R"({"tau_p": -1})"), ValidationError);

  const auto grid = augmentation_file_from_json(R"({
    "offsets": {"grid": {"x": [-0.2, 0, 0.2], "y": [-0.2, 0, 0.2]}},
    "t_m": "auto", "tau_p": 0.25, "anchor": {"preset": "lower_body", "feet": true},
    "object_scales": [[1, 1, 1], [1.2, 1, 1]]
  })");
  const auto specs = grid.expand();
  CHECK(specs.size() == 18);
  CHECK_FALSE(specs[0].t_m.has_value());
  CHECK(specs[0].tau_p == 0.25);
  CHECK(specs[0].delta_p == Vec3(-0.2, -0.2, 0));
  CHECK(specs[1].object_scale == Vec3(1.2, 1, 1));

  const char* random = R"({"offsets": {"random": {"count": 5, "min": [-0.1, -0.1, 0], "max": [0.1, 0.1, 0]}},
                           "seed": 3, "terrain_scales": [1.5, [1.0, 2.0]]})";
  const auto a = augmentation_file_from_json(random).expand();
  const auto b = augmentation_file_from_json(random).expand();
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].delta_p == b[i].delta_p);
  CHECK(a[1].terrain_depth_scale == 2.0);
  CHECK_THROWS_AS(augmentation_file_from_json(R"({"t_m": "later"})"), ParseError);
  CHECK(augmentation_file_from_json("{}").expand().size() == 1);
}
