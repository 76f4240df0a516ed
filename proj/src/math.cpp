#include "meshret/math.hpp"

#include "meshret/error.hpp"

#include <cmath>

namespace meshret {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Quat quat_exp(const Vec3& rotation_vector) {
  const double theta = rotation_vector.norm();
  const double half = 0.5 * theta;
  double k;  // sin(theta/2) / theta
  if (theta < 1e-8) {
    k = 0.5 - theta * theta / 48.0;
  } else {
    k = std::sin(half) / theta;
  }
  Quat q(std::cos(half), k * rotation_vector.x(), k * rotation_vector.y(),
         k * rotation_vector.z());
  q.normalize();
  return q;
}

Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-10) {
    // theta ~ 2 s, d(theta)/ds -> 2 / w
    return (2.0 / q.w()) * v;
  }
  const double theta = 2.0 * std::atan2(s, q.w());
  return (theta / s) * v;
}

Mat3 left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < 1e-6) {
    return Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  }
  const double coeff =
      1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * w + coeff * w * w;
}

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Pose make_pose(const Vec3& translation, const Quat& rotation) {
  Pose p = Pose::Identity();
  p.linear() = rotation.normalized().toRotationMatrix();
  p.translation() = translation;
  return p;
}

Pose pose_from_array(const std::vector<double>& v) {
  if (v.size() != 7) throw ParseError("pose arrays must have 7 entries [px,py,pz,qw,qx,qy,qz]");
  const Quat q(v[3], v[4], v[5], v[6]);
  if (q.norm() < 1e-12) throw ValidationError("pose quaternion has zero norm");
  return make_pose(Vec3(v[0], v[1], v[2]), q.normalized());
}

std::array<double, 7> pose_to_array(const Pose& pose) {
  Quat q(pose.linear());
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 t = pose.translation();
  return {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()};
}

double rotation_angle_between(const Quat& a, const Quat& b) {
  return quat_log(a * b.conjugate()).norm();
}

}  // namespace meshret
