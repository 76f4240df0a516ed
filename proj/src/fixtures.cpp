#include "meshret/fixtures.hpp"

#include "meshret/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace meshret {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHipPitch = -0.35;
constexpr double kKnee = 0.70;
constexpr double kElbow = -0.30;

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

Link revolute(const std::string& name, int parent, const Vec3& origin, const Vec3& axis,
              double lo, double hi, double vmax = 15.0) {
  Link l;
  l.name = name;
  l.parent = parent;
  l.origin = Pose::Identity();
  l.origin.translation() = origin;
  l.joint.name = name;
  l.joint.type = JointType::Revolute;
  l.joint.axis = axis;
  l.joint.q_min = lo;
  l.joint.q_max = hi;
  l.joint.v_min = -vmax;
  l.joint.v_max = vmax;
  return l;
}

CollisionPrimitive primitive(const std::string& name, const Shape& shape, int link,
                             const Vec3& offset) {
  CollisionPrimitive c;
  c.name = name;
  c.shape = shape;
  c.link = link;
  c.local = Pose::Identity();
  c.local.translation() = offset;
  return c;
}

double home_pelvis_height(const BipedProportions& p) {
  return p.foot_height + (p.thigh + p.shank) * std::cos(kHipPitch) + p.pelvis_to_hip;
}

struct FootState {
  Vec3 ankle;       // includes swing clearance
  double support_z;  // height without clearance
};

FootState foot_state(const Vec3& start, const std::vector<Footstep>& steps, double clearance,
                     double t) {
  Vec3 pos = start;
  for (const auto& s : steps) {
    if (t >= s.start + s.duration) {
      pos.x() = s.x;
      pos.z() = s.z;
      continue;
    }
    if (t <= s.start) break;
    const double u = (t - s.start) / s.duration;
    const double h = smoothstep(u);
    FootState st;
    st.ankle = pos;
    st.ankle.x() = pos.x() + (s.x - pos.x()) * h;
    st.support_z = pos.z() + (s.z - pos.z()) * h;
    st.ankle.z() = st.support_z + clearance * std::sin(kPi * u);
    return st;
  }
  return {pos, pos.z()};
}

// Sagittal two-link inverse kinematics with the foot kept level.
void leg_ik(const BipedProportions& p, const Vec3& hip, const Vec3& ankle, double& q_hip,
            double& q_knee, double& q_ankle) {
  const double a = p.thigh;
  const double b = p.shank;
  const double dx = ankle.x() - hip.x();
  const double dz = ankle.z() - hip.z();
  const double D = std::min(std::hypot(dx, dz), 0.999 * (a + b));
  const double cos_knee = std::clamp((a * a + b * b - D * D) / (2 * a * b), -1.0, 1.0);
  q_knee = kPi - std::acos(cos_knee);
  const double phi = std::atan2(-dx, -dz);
  const double cos_beta = std::clamp((a * a + D * D - b * b) / (2 * a * D), -1.0, 1.0);
  q_hip = phi - std::acos(cos_beta);
  q_ankle = -(q_hip + q_knee);
}

// Damped least squares on the three arm joints so that the hand keypoint
// reaches `target`.
void arm_ik(const KinematicModel& model, Configuration& q, const std::string& side,
            const Vec3& target) {
  const int joints[3] = {*model.find_joint(side + "_shoulder_pitch"),
                         *model.find_joint(side + "_shoulder_roll"),
                         *model.find_joint(side + "_elbow")};
  const int hand = model.keypoint_index(side + "_hand");
  const VecX lo = model.q_min();
  const VecX hi = model.q_max();
  for (int it = 0; it < 100; ++it) {
    const auto poses = forward_kinematics(model, q);
    const Vec3 err = target - keypoint_position(model, poses, hand);
    if (err.norm() < 1e-12) break;
    const MatX J = keypoint_jacobian(model, q, side + "_hand");
    Eigen::Matrix3d Ja;
    for (int k = 0; k < 3; ++k) Ja.col(k) = J.col(6 + joints[k]);
    const Eigen::Matrix3d A = Ja.transpose() * Ja + 1e-8 * Eigen::Matrix3d::Identity();
    const Vec3 step = A.ldlt().solve(Ja.transpose() * err);
    for (int k = 0; k < 3; ++k) {
      double& v = q.joint_angles[joints[k]];
      v = std::clamp(v + step[k], lo[joints[k]], hi[joints[k]]);
    }
  }
}

Configuration standing_pose(const KinematicModel& model, const BipedProportions& p) {
  Configuration q = model.zero_configuration();
  q.base_position = Vec3(0.0, 0.0, home_pelvis_height(p));
  for (const std::string side : {"left", "right"}) {
    q.joint_angles[*model.find_joint(side + "_hip_pitch")] = kHipPitch;
    q.joint_angles[*model.find_joint(side + "_knee")] = kKnee;
    q.joint_angles[*model.find_joint(side + "_ankle_pitch")] = -(kHipPitch + kKnee);
    q.joint_angles[*model.find_joint(side + "_elbow")] = kElbow;
    q.joint_angles[*model.find_joint(side + "_shoulder_roll")] = side == "left" ? 0.1 : -0.1;
  }
  return q;
}

SceneDescription biped_ground_scene(TaskKind task) {
  SceneDescription s;
  s.task = task;
  for (const std::string side : {"left", "right"}) {
    s.collision_pairs.push_back({side + "_ankle_roll", PairTarget::Ground, ""});
  }
  return s;
}

double robot_alpha() {
  return robot_proportions().standing_height() / human_proportions().standing_height();
}

Pose translation_pose(const Vec3& t) {
  Pose p = Pose::Identity();
  p.translation() = t;
  return p;
}

}  // namespace

double BipedProportions::standing_height() const {
  return foot_height + shank + thigh + pelvis_to_hip + waist + torso + head;
}

BipedProportions BipedProportions::scaled(double f) const {
  BipedProportions p = *this;
  for (double* v : {&p.foot_height, &p.shank, &p.thigh, &p.pelvis_to_hip, &p.hip_width, &p.waist,
                    &p.torso, &p.shoulder_width, &p.upper_arm, &p.forearm, &p.head}) {
    *v *= f;
  }
  return p;
}

BipedProportions robot_proportions() { return BipedProportions{}; }

BipedProportions human_proportions(double height) {
  BipedProportions p;
  p.foot_height = 0.08;
  p.shank = 0.43;
  p.thigh = 0.45;
  p.pelvis_to_hip = 0.08;
  p.hip_width = 0.09;
  p.waist = 0.12;
  p.torso = 0.40;
  p.shoulder_width = 0.19;
  p.upper_arm = 0.30;
  p.forearm = 0.27;
  p.head = 0.14;
  return p.scaled(height / p.standing_height());
}

const std::vector<std::string>& biped_keypoint_names() {
  static const std::vector<std::string> names = {
      "pelvis",         "torso",         "head",          "left_hip",       "right_hip",
      "left_knee",      "right_knee",    "left_heel",     "right_heel",     "left_toe",
      "right_toe",      "left_shoulder", "right_shoulder", "left_elbow",    "right_elbow",
      "left_hand",      "right_hand"};
  return names;
}

KinematicModel make_biped(const BipedProportions& p, const std::string& name) {
  std::vector<Link> links;
  Link root;
  root.name = "pelvis";
  root.parent = -1;
  root.joint.name = "floating_base";
  root.joint.type = JointType::Floating;
  links.push_back(root);
  links.push_back(revolute("waist_yaw", 0, Vec3(0, 0, p.waist), Vec3::UnitZ(), -1.0, 1.0));
  const int torso = 1;

  std::vector<KeypointFrame> kps;
  std::vector<CollisionPrimitive> prims;
  kps.push_back({"pelvis", 0, Vec3::Zero()});
  kps.push_back({"torso", torso, Vec3(0, 0, 0.5 * p.torso)});
  kps.push_back({"head", torso, Vec3(0, 0, p.torso + p.head)});
  prims.push_back(primitive("torso", Shape::capsule(0.1, 0.5 * p.torso - 0.05), torso,
                            Vec3(0, 0, 0.5 * p.torso)));

  for (const std::string side : {"left", "right"}) {
    const double s = side == "left" ? 1.0 : -1.0;
    const int hy = static_cast<int>(links.size());
    links.push_back(revolute(side + "_hip_yaw", 0, Vec3(0, s * p.hip_width, -p.pelvis_to_hip),
                             Vec3::UnitZ(), -0.8, 0.8));
    links.push_back(revolute(side + "_hip_roll", hy, Vec3::Zero(), Vec3::UnitX(), -0.5, 0.5));
    links.push_back(revolute(side + "_hip_pitch", hy + 1, Vec3::Zero(), Vec3::UnitY(), -2.0, 1.0));
    links.push_back(revolute(side + "_knee", hy + 2, Vec3(0, 0, -p.thigh), Vec3::UnitY(), 0.0, 2.4));
    links.push_back(
        revolute(side + "_ankle_pitch", hy + 3, Vec3(0, 0, -p.shank), Vec3::UnitY(), -0.9, 0.9));
    links.push_back(revolute(side + "_ankle_roll", hy + 4, Vec3::Zero(), Vec3::UnitX(), -0.4, 0.4));
    const int foot = hy + 5;
    kps.push_back({side + "_hip", hy + 2, Vec3::Zero()});
    kps.push_back({side + "_knee", hy + 3, Vec3::Zero()});
    kps.push_back({side + "_heel", foot, Vec3(-0.05, 0, -p.foot_height)});
    kps.push_back({side + "_toe", foot, Vec3(0.11, 0, -p.foot_height)});
    prims.push_back(primitive(side + "_foot", Shape::box(Vec3(0.09, 0.04, 0.02)), foot,
                              Vec3(0.02, 0, 0.02 - p.foot_height)));
  }
  for (const std::string side : {"left", "right"}) {
    const double s = side == "left" ? 1.0 : -1.0;
    const int sp = static_cast<int>(links.size());
    links.push_back(revolute(side + "_shoulder_pitch", torso,
                             Vec3(0, s * p.shoulder_width, p.torso), Vec3::UnitY(), -2.8, 1.5));
    links.push_back(revolute(side + "_shoulder_roll", sp, Vec3::Zero(), Vec3::UnitX(), -1.5, 1.5));
    links.push_back(
        revolute(side + "_elbow", sp + 1, Vec3(0, 0, -p.upper_arm), Vec3::UnitY(), -2.4, 0.1));
    kps.push_back({side + "_shoulder", sp, Vec3::Zero()});
    kps.push_back({side + "_elbow", sp + 2, Vec3::Zero()});
    kps.push_back({side + "_hand", sp + 2, Vec3(0, 0, -p.forearm)});
    prims.push_back(
        primitive(side + "_hand", Shape::sphere(0.04), sp + 2, Vec3(0, 0, -p.forearm)));
  }
  // Keep the keypoint order of biped_keypoint_names().
  std::vector<KeypointFrame> ordered;
  for (const auto& n : biped_keypoint_names()) {
    for (const auto& k : kps) {
      if (k.name == n) ordered.push_back(k);
    }
  }
  KinematicModel model(name, std::move(links), std::move(ordered), std::move(prims));
  model.set_height(p.standing_height());
  model.set_home(standing_pose(model, p));
  return model;
}

KinematicModel biped_robot() { return make_biped(robot_proportions(), "biped19"); }

RetargetOptions biped_options(const KinematicModel& model) {
  RetargetOptions opts = RetargetOptions::identity(model);
  for (const std::string side : {"left", "right"}) {
    opts.feet.push_back({side + "_heel", side + "_ankle_roll", Vec3::Zero()});
  }
  return opts;
}

Trajectory gait_trajectory(const KinematicModel& model, const GaitPlan& plan) {
  // Segment lengths are read back from the model so that any biped built by
  // make_biped works.
  BipedProportions p;
  const auto& links = model.links();
  p.thigh = -links[model.link_index("left_knee")].origin.translation().z();
  p.shank = -links[model.link_index("left_ankle_pitch")].origin.translation().z();
  p.hip_width = links[model.link_index("left_hip_yaw")].origin.translation().y();
  p.pelvis_to_hip = -links[model.link_index("left_hip_yaw")].origin.translation().z();
  const double pelvis_above_ankle = (p.thigh + p.shank) * std::cos(kHipPitch) + p.pelvis_to_hip;

  Trajectory traj;
  traj.dt = plan.dt;
  const Configuration home = model.home();
  for (int f = 0; f < plan.frames; ++f) {
    const double t = f * plan.dt;
    const FootState L = foot_state(plan.left_start, plan.left, plan.clearance, t);
    const FootState R = foot_state(plan.right_start, plan.right, plan.clearance, t);
    Configuration q = home;
    q.base_position = Vec3(0.5 * (L.ankle.x() + R.ankle.x()), 0.0,
                           0.5 * (L.support_z + R.support_z) + pelvis_above_ankle);
    q.base_orientation = Quat::Identity();
    for (const auto& [side, st, s] :
         {std::tuple{std::string("left"), L, 1.0}, std::tuple{std::string("right"), R, -1.0}}) {
      const Vec3 hip = q.base_position + Vec3(0, s * p.hip_width, -p.pelvis_to_hip);
      double qh, qk, qa;
      leg_ik(p, hip, st.ankle, qh, qk, qa);
      q.joint_angles[*model.find_joint(side + "_hip_yaw")] = 0.0;
      q.joint_angles[*model.find_joint(side + "_hip_roll")] = 0.0;
      q.joint_angles[*model.find_joint(side + "_hip_pitch")] = qh;
      q.joint_angles[*model.find_joint(side + "_knee")] = qk;
      q.joint_angles[*model.find_joint(side + "_ankle_pitch")] = qa;
      q.joint_angles[*model.find_joint(side + "_ankle_roll")] = 0.0;
      const double phase = 2.0 * kPi * t / plan.period;
      q.joint_angles[*model.find_joint(side + "_shoulder_pitch")] = s * plan.arm_swing * std::sin(phase);
    }
    q.joint_angles[*model.find_joint("waist_yaw")] = 0.1 * std::sin(2.0 * kPi * t / plan.period);
    traj.frames.push_back(q);
  }
  return traj;
}

GaitPlan walking_plan(const BipedProportions& p, int frames, double dt) {
  GaitPlan plan;
  plan.dt = dt;
  plan.frames = frames;
  const double stride = 0.4 * (p.thigh + p.shank);
  plan.clearance = 0.08 * (p.thigh + p.shank);
  plan.left_start = Vec3(-0.25 * stride, p.hip_width, p.foot_height);
  plan.right_start = Vec3(0.25 * stride, -p.hip_width, p.foot_height);
  const double T = frames * dt;
  double xl = plan.left_start.x();
  double xr = plan.right_start.x();
  for (int k = 0;; ++k) {
    const double start = 0.3 + 0.5 * k;
    if (start + 0.4 > T - 0.3) break;
    if (k % 2 == 0) {
      xl += stride;
      plan.left.push_back({start, 0.4, xl, p.foot_height});
    } else {
      xr += stride;
      plan.right.push_back({start, 0.4, xr, p.foot_height});
    }
  }
  return plan;
}

SourceMotion source_from_trajectory(const KinematicModel& model, const Trajectory& traj,
                                    double alpha) {
  SourceMotion m;
  m.dt = traj.dt;
  m.height = model.height() / alpha;
  for (const auto& k : model.keypoints()) m.keypoint_names.push_back(k.name);
  for (const auto& q : traj.frames) {
    PointList kp = keypoint_positions(model, q, m.keypoint_names);
    for (auto& v : kp) v /= alpha;
    m.frames.push_back(std::move(kp));
  }
  return m;
}

Fixture walking_fixture(int frames) {
  Fixture fx;
  fx.name = "walking";
  fx.model = biped_robot();
  const double alpha = robot_alpha();
  const BipedProportions hp = human_proportions().scaled(alpha);
  const KinematicModel human = make_biped(hp, "human");
  const GaitPlan plan = walking_plan(hp, frames);
  fx.source = source_from_trajectory(human, gait_trajectory(human, plan), alpha);
  fx.scene = biped_ground_scene(TaskKind::RobotOnly);
  const double x_end = std::max(plan.left.empty() ? 0.0 : plan.left.back().x,
                                plan.right.empty() ? 0.0 : plan.right.back().x);
  fx.scene.terrain.grid = GroundGridSpec{{-0.5, -0.5, x_end + 0.5, 0.5}, 0.25};
  fx.options = biped_options(fx.model);
  return fx;
}

Fixture standing_fixture(int frames) {
  Fixture fx;
  fx.name = "standing";
  fx.model = biped_robot();
  const double alpha = robot_alpha();
  const KinematicModel human = make_biped(human_proportions().scaled(alpha), "human");
  Trajectory traj;
  traj.frames.assign(frames, human.home());
  fx.source = source_from_trajectory(human, traj, alpha);
  fx.scene = biped_ground_scene(TaskKind::RobotOnly);
  fx.options = biped_options(fx.model);
  return fx;
}

Fixture box_pickup_fixture() {
  Fixture fx;
  fx.name = "box_pickup";
  fx.model = biped_robot();
  const double alpha = robot_alpha();
  const KinematicModel human = make_biped(human_proportions().scaled(alpha), "human");
  const int frames = 250;
  const double dt = 1.0 / 30.0;

  const double box_x = 0.30, box_half_y = 0.15, rest_z = 0.92, lift = 0.15;
  auto box_z = [&](int f) {
    if (f < 80 || f >= 170) return rest_z;
    if (f < 125) return rest_z + lift * smoothstep((f - 80) / 45.0);
    return rest_z + lift * (1.0 - smoothstep((f - 125) / 45.0));
  };
  const double contact_y = box_half_y - 0.05;  // 5 cm inside the side faces
  const double pre_y = box_half_y + 0.10;

  Trajectory traj;
  traj.dt = dt;
  Configuration q = human.home();
  const auto home_poses = forward_kinematics(human, q);
  SceneObject box;
  box.id = "box";
  box.half_extents = Vec3(0.10, box_half_y, 0.12);
  for (int f = 0; f < frames; ++f) {
    for (const std::string side : {"left", "right"}) {
      const double s = side == "left" ? 1.0 : -1.0;
      const Vec3 rest = keypoint_position(human, home_poses, human.keypoint_index(side + "_hand"));
      const Vec3 pre(box_x, s * pre_y, rest_z);
      Vec3 target;
      if (f <= 40) {
        target = rest + (pre - rest) * smoothstep(f / 40.0);
      } else if (f < 48) {
        target = pre;
      } else if (f < 50) {
        target = pre + (Vec3(box_x, s * contact_y, rest_z) - pre) * ((f - 48) / 2.0);
      } else if (f <= 200) {
        target = Vec3(box_x, s * contact_y, box_z(f));
      } else if (f <= 202) {
        target = Vec3(box_x, s * (contact_y + (pre_y - contact_y) * (f - 200) / 2.0), rest_z);
      } else {
        target = pre + (rest - pre) * smoothstep((f - 202) / 38.0);
      }
      arm_ik(human, q, side, target);
    }
    traj.frames.push_back(q);
    box.track.push_back(translation_pose(Vec3(box_x, 0.0, box_z(f))));
  }
  fx.source = source_from_trajectory(human, traj, alpha);
  std::vector<Pose> raw_track = box.track;
  for (auto& p : raw_track) p.translation() /= alpha;
  fx.source.object_tracks["box"] = raw_track;

  fx.scene = biped_ground_scene(TaskKind::RobotObject);
  fx.scene.objects.push_back(box);
  TerrainBox table;
  table.name = "table";
  table.half_extents = Vec3(0.20, 0.30, 0.40);
  table.pose = translation_pose(Vec3(0.40, 0.0, 0.40));
  fx.scene.terrain.boxes.push_back(table);
  for (const std::string side : {"left", "right"}) {
    fx.scene.collision_pairs.push_back({side + "_elbow", PairTarget::Object, "box"});
    fx.scene.collision_pairs.push_back({side + "_elbow", PairTarget::TerrainBox, "table"});
  }
  fx.scene.collision_pairs.push_back({"waist_yaw", PairTarget::Object, "box"});
  fx.options = biped_options(fx.model);
  return fx;
}

Fixture terrain_climb_fixture() {
  Fixture fx;
  fx.name = "terrain_climb";
  fx.model = biped_robot();
  const double alpha = robot_alpha();
  const BipedProportions hp = human_proportions().scaled(alpha);
  const KinematicModel human = make_biped(hp, "human");
  const double top = 0.10;
  GaitPlan plan;
  plan.frames = 135;
  plan.clearance = 0.06;
  plan.left_start = Vec3(-0.06, hp.hip_width, hp.foot_height);
  plan.right_start = Vec3(0.06, -hp.hip_width, hp.foot_height);
  const double xs_l[] = {0.19, 0.62, 0.88};
  const double xs_r[] = {0.35, 0.75, 1.00};
  const double zs_l[] = {0.0, top, top};
  const double zs_r[] = {0.0, top, top};
  for (int k = 0; k < 3; ++k) {
    plan.left.push_back({0.5 + 1.0 * k, 0.4, xs_l[k], zs_l[k] + hp.foot_height});
    plan.right.push_back({1.0 + 1.0 * k, 0.4, xs_r[k], zs_r[k] + hp.foot_height});
  }
  plan.arm_swing = 0.2;
  fx.source = source_from_trajectory(human, gait_trajectory(human, plan), alpha);

  fx.scene = biped_ground_scene(TaskKind::RobotTerrain);
  TerrainBox platform;
  platform.name = "platform";
  platform.half_extents = Vec3(0.60, 0.50, 0.5 * top);
  platform.pose = translation_pose(Vec3(1.10, 0.0, 0.5 * top));
  fx.scene.terrain.boxes.push_back(platform);
  fx.scene.terrain.grid = GroundGridSpec{{-0.5, -0.5, 0.5, 0.5}, 0.25};
  for (const std::string side : {"left", "right"}) {
    fx.scene.collision_pairs.push_back({side + "_ankle_roll", PairTarget::TerrainBox, "platform"});
  }
  fx.options = biped_options(fx.model);
  return fx;
}

Fixture round_trip_fixture(int frames) {
  Fixture fx;
  fx.name = "round_trip";
  fx.model = biped_robot();
  fx.ground_truth = gait_trajectory(fx.model, walking_plan(robot_proportions(), frames));
  fx.source = source_from_trajectory(fx.model, *fx.ground_truth, 1.0);
  fx.scene = biped_ground_scene(TaskKind::RobotOnly);
  fx.options = biped_options(fx.model);
  return fx;
}

std::vector<std::string> fixture_names() {
  return {"walking", "standing", "box_pickup", "terrain_climb", "round_trip"};
}

Fixture make_fixture(const std::string& name) {
  if (name == "walking") return walking_fixture();
  if (name == "standing") return standing_fixture();
  if (name == "box_pickup") return box_pickup_fixture();
  if (name == "terrain_climb") return terrain_climb_fixture();
  if (name == "round_trip") return round_trip_fixture();
  throw ValidationError("unknown fixture '" + name + "'");
}

}  // namespace meshret
