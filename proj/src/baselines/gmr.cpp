#include "meshret/baselines/baselines.hpp"

#include "meshret/error.hpp"
#include "meshret/solver/sequential.hpp"

namespace meshret {

OrientationTarget root_orientation_targets(const KinematicModel&, const SourceMotion& source,
                                           const std::string& left_hip,
                                           const std::string& right_hip) {
  const int l = source.keypoint_index(left_hip);
  const int r = source.keypoint_index(right_hip);
  OrientationTarget out;
  out.link = 0;
  for (int t = 0; t < source.num_frames(); ++t) {
    Vec3 lateral = source.frames[t][l] - source.frames[t][r];
    lateral.z() = 0.0;
    if (lateral.norm() < 1e-9) lateral = Vec3::UnitY();
    const Vec3 y = lateral.normalized();
    const Vec3 z = Vec3::UnitZ();
    Mat3 R;
    R.col(0) = y.cross(z);
    R.col(1) = y;
    R.col(2) = z;
    out.frames.emplace_back(R);
  }
  return out;
}

Trajectory gmr_retarget(const KinematicModel& model, const SourceMotion& source,
                        const std::vector<OrientationTarget>& orientations,
                        const RetargetOptions& opts, const BaselineConfig& cfg) {
  cfg.validate();
  source.validate();
  const int T = source.num_frames();
  if (T < 1) throw ValidationError("source motion has no frames");
  for (const auto& o : orientations) {
    if (static_cast<int>(o.frames.size()) != T) {
      throw ValidationError("orientation targets have " + std::to_string(o.frames.size()) +
                            " frames, source has " + std::to_string(T));
    }
    if (o.link < 0 || o.link >= model.num_links()) {
      throw ValidationError("orientation target on an unknown link");
    }
  }
  const KeypointTargets targets = KeypointTargets::from(model, source, opts);

  Trajectory traj;
  traj.dt = source.dt;
  Configuration q_prev = model.home();
  for (int t = 0; t < T; ++t) {
    const PointList goal = targets.frame(source, t);
    FrameContext ctx;
    ctx.model = &model;
    ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
      assemble_keypoint_cost(model, q, poses, targets.robot_keypoint, goal, 2.0, out);
      if (cfg.gmr_orientation) {
        for (const auto& o : orientations) {
          assemble_orientation_cost(model, poses, o.link, o.frames[t], cfg.gmr_orientation_weight,
                                    out);
        }
      }
    };
    ctx.constraints = [&](const Configuration& q, const std::vector<Pose>&) {
      ConstraintSet cs(model.tangent_dim());
      add_joint_limit_rows(model, q, cs);
      return cs;
    };
    ctx.q_warm = q_prev;
    ctx.joint_lo = model.q_min();
    ctx.joint_hi = model.q_max();
    SequentialOptions so = opts.solver;
    so.max_iters = t == 0 ? std::max(cfg.gmr_iterations, opts.first_frame_iters) : cfg.gmr_iterations;
    q_prev = sequential_solve(ctx, so).q;
    traj.frames.push_back(q_prev);
  }
  return traj;
}

}  // namespace meshret
