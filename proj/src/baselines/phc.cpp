#include "meshret/baselines/baselines.hpp"

#include "meshret/error.hpp"

#include <cmath>

namespace meshret {

namespace {

// Gradient of sum_i |f_i(q) - p_i|^2 in increment coordinates.
VecX keypoint_gradient(const KinematicModel& model, const Configuration& q,
                       const KeypointTargets& targets, const PointList& goal) {
  const auto poses = forward_kinematics(model, q);
  VecX g = VecX::Zero(model.tangent_dim());
  for (std::size_t i = 0; i < targets.robot_keypoint.size(); ++i) {
    const int k = targets.robot_keypoint[i];
    const Vec3 p = keypoint_position(model, poses, k);
    const MatX J = point_jacobian(model, q, poses, model.keypoints()[k].link, p);
    g.noalias() += 2.0 * J.transpose() * (p - goal[i]);
  }
  return g;
}

}  // namespace

PhcResult phc_retarget(const KinematicModel& model, const SourceMotion& source,
                       const RetargetOptions& opts, const BaselineConfig& cfg) {
  cfg.validate();
  source.validate();
  const int T = source.num_frames();
  if (T < 1) throw ValidationError("source motion has no frames");
  const KeypointTargets targets = KeypointTargets::from(model, source, opts);
  std::vector<PointList> goals(T);
  for (int t = 0; t < T; ++t) goals[t] = targets.frame(source, t);

  const VecX lo = model.q_min();
  const VecX hi = model.q_max();
  PhcResult out;
  out.trajectory.dt = source.dt;
  Configuration start = model.home();
  clamp_joints(start, lo, hi);
  out.trajectory.frames.assign(T, start);

  std::vector<VecX> grads(T);
  for (int it = 0; it < cfg.phc_iterations; ++it) {
    double norm2 = 0.0;
    for (int t = 0; t < T; ++t) {
      grads[t] = keypoint_gradient(model, out.trajectory.frames[t], targets, goals[t]);
      norm2 += grads[t].squaredNorm();
    }
    out.final_gradient_norm = std::sqrt(norm2);
    if (out.final_gradient_norm < cfg.phc_gradient_tol) break;
    for (int t = 0; t < T; ++t) {
      Configuration& q = out.trajectory.frames[t];
      q = apply_increment(q, VecX(-cfg.phc_learning_rate * grads[t]));
      clamp_joints(q, lo, hi);
    }
    out.iterations = it + 1;
  }
  return out;
}

}  // namespace meshret
