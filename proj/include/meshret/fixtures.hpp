#pragma once

#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/retarget.hpp"

#include <optional>
#include <string>
#include <vector>

namespace meshret {

// Segment lengths of the procedural biped, meters.
struct BipedProportions {
  double foot_height = 0.06;
  double shank = 0.32;
  double thigh = 0.32;
  double pelvis_to_hip = 0.05;
  double hip_width = 0.10;  // lateral hip offset from the pelvis center
  double waist = 0.10;      // pelvis to torso joint
  double torso = 0.30;      // torso joint to shoulder line
  double shoulder_width = 0.18;
  double upper_arm = 0.25;
  double forearm = 0.25;
  double head = 0.17;  // shoulder line to head keypoint

  // Head keypoint height with straight legs.
  double standing_height() const;
  BipedProportions scaled(double factor) const;
};

BipedProportions robot_proportions();
// Human segment ratios scaled so that standing_height() == height.
BipedProportions human_proportions(double height = 1.7);

// 19 revolute joints: waist yaw, 6 per leg, 3 per arm; 17 keypoints.
KinematicModel make_biped(const BipedProportions& p, const std::string& name = "biped");
KinematicModel biped_robot();

// Stance detection and foot-holding links, identity correspondence.
RetargetOptions biped_options(const KinematicModel& model);

const std::vector<std::string>& biped_keypoint_names();

// Footstep of one foot: the ankle moves to (x, z) during [start, start + duration).
struct Footstep {
  double start = 0.0;
  double duration = 0.4;
  double x = 0.0;
  double z = 0.0;
};

struct GaitPlan {
  double dt = 1.0 / 30.0;
  int frames = 300;
  Vec3 left_start = Vec3::Zero();   // ankle positions, world
  Vec3 right_start = Vec3::Zero();
  std::vector<Footstep> left;
  std::vector<Footstep> right;
  double clearance = 0.05;
  double arm_swing = 0.3;  // shoulder pitch amplitude, rad
  double period = 1.0;     // arm swing period, s
};

// Configurations of `model` following the plan with analytic leg inverse
// kinematics (flat feet, zero hip yaw and roll).
Trajectory gait_trajectory(const KinematicModel& model, const GaitPlan& plan);

// Regular forward walking, stride = 0.4 * (thigh + shank).
GaitPlan walking_plan(const BipedProportions& p, int frames, double dt = 1.0 / 30.0);

// Keypoint track of a trajectory as a source motion, with positions divided
// by `alpha` and the demonstrator height set to model height / alpha.
SourceMotion source_from_trajectory(const KinematicModel& model, const Trajectory& traj,
                                    double alpha);

struct Fixture {
  std::string name;
  KinematicModel model;
  SourceMotion source;  // demonstrator scale
  SceneDescription scene;  // robot scale
  RetargetOptions options;
  std::optional<Trajectory> ground_truth;
};

Fixture walking_fixture(int frames = 300);
Fixture standing_fixture(int frames = 100);
// Hands reach 5 cm into the box (after scaling) between frames 50 and 200
// while it is lifted off a table.
Fixture box_pickup_fixture();
Fixture terrain_climb_fixture();
// Source = the robot's own keypoints along a walking trajectory (alpha = 1).
Fixture round_trip_fixture(int frames = 150);

std::vector<std::string> fixture_names();
Fixture make_fixture(const std::string& name);

}  // namespace meshret
