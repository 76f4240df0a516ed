#include "meshret/baselines/baselines.hpp"

#include "meshret/error.hpp"
#include "meshret/solver/assemblers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace meshret {

std::vector<std::pair<int, int>> mesh_neighbor_pairs(const SourceMotion& source,
                                                     const KeypointTargets& targets) {
  if (source.num_frames() < 1) throw ValidationError("source motion has no frames");
  std::vector<std::string> names;
  for (std::size_t s = 0; s < targets.source_index.size(); ++s) names.push_back("slot" + std::to_string(s));
  SceneDescription empty;
  empty.terrain.has_ground = false;
  MeshOptions mo;
  mo.include_ground_grid = false;
  const InteractionMesh mesh = build_interaction_mesh(names, targets.frame(source, 0), empty, 0, mo);
  std::set<std::pair<int, int>> out;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    for (int u : mesh.neighbors[v]) {
      const int a = mesh.vertices[v].index;
      const int b = mesh.vertices[u].index;
      if (a < b) out.insert({a, b});
    }
  }
  return {out.begin(), out.end()};
}

namespace {

struct FrameGeometry {
  std::vector<Vec3> foot;        // per foot, world point
  std::vector<MatX> foot_jac;    // per foot, xy rows
};

// Home joints with the base placed on the scaled source root keypoint and
// turned to the hip heading.
Configuration initial_pose(const KinematicModel& model, const SourceMotion& scaled,
                           const KeypointTargets& targets, const std::vector<Quat>& heading,
                           int t) {
  Configuration q = model.home();
  if (!heading.empty()) q.base_orientation = heading[t];
  for (std::size_t s = 0; s < targets.robot_keypoint.size(); ++s) {
    const auto& kp = model.keypoints()[targets.robot_keypoint[s]];
    if (kp.link != 0) continue;
    q.base_position = scaled.frames[t][targets.source_index[s]] - q.base_orientation * kp.offset;
    break;
  }
  return q;
}

}  // namespace

VideoMimicResult videomimic_retarget(const KinematicModel& model, const SourceMotion& demo,
                                     const SceneDescription& scene, const RetargetOptions& opts,
                                     const BaselineConfig& cfg) {
  cfg.validate();
  demo.validate();
  const int T = demo.num_frames();
  if (T < 1) throw ValidationError("source motion has no frames");
  validate_scene(scene, model, T);
  const int n = model.tangent_dim();
  const KeypointTargets targets = KeypointTargets::from(model, demo, opts);
  const SourceMotion scaled = scale_source(demo, model.height());

  VideoMimicResult res;
  res.pairs = mesh_neighbor_pairs(demo, targets);
  const int P = static_cast<int>(res.pairs.size());
  std::vector<double> beta(P, 1.0);

  std::vector<int> foot_link;
  std::vector<std::string> foot_src;
  for (const auto& f : opts.feet) {
    foot_link.push_back(model.link_index(f.robot_link));
    foot_src.push_back(f.source_keypoint);
  }
  const int F = static_cast<int>(foot_link.size());
  const auto stance = T >= 2 && F > 0 ? detect_stance(scaled, foot_src, opts.stance_threshold)
                                      : std::vector<std::vector<bool>>(T, std::vector<bool>(F, false));

  const std::vector<ResolvedPair> pairs = resolve_collision_pairs(scene, model);
  std::vector<std::vector<int>> foot_ground(F);
  for (int i = 0; i < static_cast<int>(pairs.size()); ++i) {
    if (pairs[i].target != PairTarget::Ground) continue;
    const int link = model.collisions()[pairs[i].robot_primitive].link;
    for (int f = 0; f < F; ++f) {
      if (link == foot_link[f]) foot_ground[f].push_back(i);
    }
  }

  std::vector<PointList> demo_kp(T);
  for (int t = 0; t < T; ++t) demo_kp[t] = targets.frame(demo, t);
  // Curvature of the pairwise term along each scale; steps on the scales
  // are divided by it.
  std::vector<double> pair_energy(P, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int p = 0; p < P; ++p) {
      pair_energy[p] += (demo_kp[t][res.pairs[p].first] - demo_kp[t][res.pairs[p].second]).squaredNorm();
    }
  }

  std::vector<Quat> heading;
  if (scaled.find_keypoint("left_hip") && scaled.find_keypoint("right_hip")) {
    heading = root_orientation_targets(model, scaled, "left_hip", "right_hip").frames;
  }
  std::vector<Configuration> q(T);
  for (int t = 0; t < T; ++t) q[t] = initial_pose(model, scaled, targets, heading, t);
  const VecX lo = model.q_min();
  const VecX hi = model.q_max();

  std::vector<VecX> grad(T, VecX::Zero(n));
  std::vector<double> gbeta(P, 0.0);
  std::vector<FrameGeometry> geo(T);

  auto objective_and_gradient = [&]() {
    double obj = 0.0;
    std::fill(gbeta.begin(), gbeta.end(), 0.0);
    for (int t = 0; t < T; ++t) {
      VecX& g = grad[t];
      g.setZero();
      const auto poses = forward_kinematics(model, q[t]);
      const int S = static_cast<int>(targets.robot_keypoint.size());
      std::vector<Vec3> x(S);
      std::vector<MatX> J(S);
      for (int s = 0; s < S; ++s) {
        const int k = targets.robot_keypoint[s];
        x[s] = keypoint_position(model, poses, k);
        J[s] = point_jacobian(model, q[t], poses, model.keypoints()[k].link, x[s]);
      }
      for (int p = 0; p < P; ++p) {
        const auto [a, b] = res.pairs[p];
        const Vec3 d = demo_kp[t][a] - demo_kp[t][b];
        const Vec3 r = (x[a] - x[b]) - beta[p] * d;
        obj += r.squaredNorm();
        g.noalias() += 2.0 * (J[a] - J[b]).transpose() * r;
        gbeta[p] -= 2.0 * d.dot(r);
      }
      for (int f = 0; f < F; ++f) {
        if (!stance[t][f]) continue;
        for (int i : foot_ground[f]) {
          const SdfResult sdf = evaluate_pair(model, poses, scene, pairs[i], t);
          obj += cfg.lambda_contact * sdf.distance * sdf.distance;
          g.noalias() += 2.0 * cfg.lambda_contact * sdf.distance *
                         sdf_jacobian_row(model, q[t], poses, pairs[i], sdf);
        }
      }
      if (cfg.lambda_collision > 0.0) {
        for (const auto& pair : pairs) {
          const SdfResult sdf = evaluate_pair(model, poses, scene, pair, t);
          if (sdf.distance >= 0.0) continue;
          obj += cfg.lambda_collision * sdf.distance * sdf.distance;
          g.noalias() += 2.0 * cfg.lambda_collision * sdf.distance *
                         sdf_jacobian_row(model, q[t], poses, pair, sdf);
        }
      }
      for (int j = 0; j < model.num_joints(); ++j) {
        const double v = q[t].joint_angles[j];
        const double over = std::max(0.0, v - hi[j]) - std::max(0.0, lo[j] - v);
        obj += cfg.lambda_joint * over * over;
        g[6 + j] += 2.0 * cfg.lambda_joint * over;
      }
      geo[t].foot.resize(F);
      geo[t].foot_jac.resize(F);
      for (int f = 0; f < F; ++f) {
        geo[t].foot[f] = poses[foot_link[f]] * opts.feet[f].offset;
        geo[t].foot_jac[f] =
            point_jacobian(model, q[t], poses, foot_link[f], geo[t].foot[f]).topRows(2);
      }
    }
    for (int t = 1; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        if (!(stance[t - 1][f] && stance[t][f])) continue;
        const Eigen::Vector2d e = (geo[t].foot[f] - geo[t - 1].foot[f]).head<2>();
        obj += cfg.lambda_skate * e.squaredNorm();
        grad[t].noalias() += 2.0 * cfg.lambda_skate * geo[t].foot_jac[f].transpose() * e;
        grad[t - 1].noalias() -= 2.0 * cfg.lambda_skate * geo[t - 1].foot_jac[f].transpose() * e;
      }
      const VecX d = configuration_difference(q[t], q[t - 1]);
      obj += cfg.lambda_smooth * d.squaredNorm();
      grad[t].noalias() += 2.0 * cfg.lambda_smooth * d;
      grad[t - 1].noalias() -= 2.0 * cfg.lambda_smooth * d;
    }
    return obj;
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<Configuration> best_q = q;
  std::vector<double> best_beta = beta;
  double last = std::numeric_limits<double>::infinity();
  int rising = 0;
  for (int it = 0; it < cfg.vm_iterations; ++it) {
    const double obj = objective_and_gradient();
    if (!std::isfinite(obj)) {
      res.diverged = true;
      break;
    }
    if (obj < best) {
      best = obj;
      best_q = q;
      best_beta = beta;
    }
    rising = obj > last ? rising + 1 : 0;
    last = obj;
    if (rising >= cfg.vm_divergence_window) {
      res.diverged = true;
      break;
    }
    for (int t = 0; t < T; ++t) q[t] = apply_increment(q[t], VecX(-cfg.vm_learning_rate * grad[t]));
    for (int p = 0; p < P; ++p) {
      if (pair_energy[p] > 0.0) beta[p] -= cfg.vm_scale_learning_rate * gbeta[p] / (2.0 * pair_energy[p]);
    }
    res.iterations = it + 1;
  }
  if (!res.diverged) {
    const double obj = objective_and_gradient();
    if (obj < best) {
      best = obj;
      best_q = q;
      best_beta = beta;
    }
  }
  res.best_objective = best;
  res.scales = best_beta;
  res.trajectory.dt = demo.dt;
  res.trajectory.frames = best_q;
  return res;
}

}  // namespace meshret
