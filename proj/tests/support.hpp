#pragma once

#include "meshret/geometry/sampling.hpp"
#include "meshret/kinematics.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

using meshret::Configuration;
using meshret::KinematicModel;
using meshret::Mat3;
using meshret::Pose;
using meshret::Quat;
using meshret::Rng;
using meshret::Vec3;
using meshret::VecX;

inline std::filesystem::path data_dir() { return std::filesystem::path(MESHRET_TEST_DATA); }

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline Quat random_quat(Rng& rng) {
  Eigen::Vector4d c(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  c.normalize();
  return Quat(c[0], c[1], c[2], c[3]);
}

// A serial chain (optionally branching) with random origins and axes, one
// keypoint per link and a few collision spheres.
inline KinematicModel random_chain(int joints, std::uint64_t seed, bool branch = false) {
  Rng rng(seed);
  std::vector<meshret::Link> links;
  std::vector<meshret::KeypointFrame> kps;
  std::vector<meshret::CollisionPrimitive> cols;
  meshret::Link root;
  root.name = "root";
  root.joint.type = meshret::JointType::Floating;
  links.push_back(root);
  kps.push_back({"kp_root", 0, Vec3(0.05, -0.02, 0.03)});
  for (int j = 0; j < joints; ++j) {
    meshret::Link l;
    l.name = "link" + std::to_string(j);
    l.parent = (branch && j >= 2 && j % 2 == 0) ? j - 1 : j;
    l.origin = meshret::make_pose(Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                       rng.uniform(0.05, 0.3)),
                                  random_quat(rng));
    l.joint.name = "j" + std::to_string(j);
    l.joint.type = meshret::JointType::Revolute;
    l.joint.axis = random_unit(rng);
    l.joint.q_min = -2.5;
    l.joint.q_max = 2.5;
    l.joint.v_min = -8.0;
    l.joint.v_max = 8.0;
    links.push_back(l);
    kps.push_back({"kp" + std::to_string(j), j + 1,
                   Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1))});
    if (j % 2 == 1) {
      meshret::CollisionPrimitive c;
      c.name = "col" + std::to_string(j);
      c.shape = meshret::Shape::sphere(0.04);
      c.link = j + 1;
      c.local = meshret::make_pose(Vec3(0.02, 0.0, 0.05), Quat::Identity());
      cols.push_back(c);
    }
  }
  return KinematicModel("chain", links, kps, cols);
}

inline Configuration random_configuration(const KinematicModel& m, Rng& rng) {
  Configuration q = m.zero_configuration();
  q.base_position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  q.base_orientation = random_quat(rng);
  for (int j = 0; j < m.num_joints(); ++j) q.joint_angles[j] = rng.uniform(-2.0, 2.0);
  return q;
}

inline Eigen::Matrix4d homogeneous(const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

inline Mat3 rodrigues(const Vec3& axis, double angle) {
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

// Link world transforms by explicit 4x4 products along the parent chain.
inline std::vector<Eigen::Matrix4d> matrix_chain_fk(const KinematicModel& m, const Configuration& q) {
  std::vector<Eigen::Matrix4d> out(m.num_links());
  for (int i = 0; i < m.num_links(); ++i) {
    std::vector<int> path;
    for (int l = i; l >= 0; l = m.links()[l].parent) path.push_back(l);
    Eigen::Matrix4d acc = homogeneous(q.base_orientation.normalized().toRotationMatrix(), q.base_position);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      const auto& link = m.links()[*it];
      if (link.parent < 0) continue;
      acc = acc * link.origin.matrix() *
            homogeneous(rodrigues(link.joint.axis, q.joint_angles[link.joint_index]), Vec3::Zero());
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace testsupport
