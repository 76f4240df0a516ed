#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace meshret {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Pose = Eigen::Isometry3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

using PointList = std::vector<Vec3>;

Mat3 skew(const Vec3& v);

// SO(3) exponential / logarithm on unit quaternions. The rotation vector is
// the axis scaled by the angle; log returns angles in [0, pi].
Quat quat_exp(const Vec3& rotation_vector);
Vec3 quat_log(const Quat& q);

// Inverse of the left Jacobian of SO(3):
//   log(exp(d) * exp(phi)) ~= phi + left_jacobian_inverse(phi) * d
Mat3 left_jacobian_inverse(const Vec3& phi);

// URDF convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 rpy_to_matrix(const Vec3& rpy);

Pose make_pose(const Vec3& translation, const Quat& rotation);

// Pose as [px, py, pz, qw, qx, qy, qz]. The quaternion is normalized on read
// and written with qw >= 0.
Pose pose_from_array(const std::vector<double>& v);
std::array<double, 7> pose_to_array(const Pose& pose);

// Rotational distance of a relative to b, in radians.
double rotation_angle_between(const Quat& a, const Quat& b);

}  // namespace meshret
