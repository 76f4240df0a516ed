#include "meshret/baselines/baselines.hpp"

#include "meshret/error.hpp"
#include "meshret/geometry/sampling.hpp"
#include "meshret/solver/sequential.hpp"
#include "meshret/solver/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace meshret {

void keypoint_bones(const KinematicModel& model, const std::vector<int>& slot_keypoints,
                    std::vector<std::pair<int, int>>& bones, std::vector<double>& lengths) {
  bones.clear();
  lengths.clear();
  std::vector<std::vector<int>> slots_on_link(model.num_links());
  for (int s = 0; s < static_cast<int>(slot_keypoints.size()); ++s) {
    slots_on_link[model.keypoints()[slot_keypoints[s]].link].push_back(s);
  }
  const auto home = forward_kinematics(model, model.home());
  std::vector<std::vector<Pose>> samples;
  {
    Rng rng(17);
    const VecX lo = model.q_min();
    const VecX hi = model.q_max();
    for (int k = 0; k < 8; ++k) {
      Configuration q = model.home();
      for (int j = 0; j < q.joint_angles.size(); ++j) q.joint_angles[j] = rng.uniform(lo[j], hi[j]);
      samples.push_back(forward_kinematics(model, q));
    }
  }
  auto rigid = [&](int a, int b, double len) {
    for (const auto& poses : samples) {
      const double d = (keypoint_position(model, poses, slot_keypoints[a]) -
                        keypoint_position(model, poses, slot_keypoints[b])).norm();
      if (std::abs(d - len) > 1e-9) return false;
    }
    return true;
  };
  for (int s = 0; s < static_cast<int>(slot_keypoints.size()); ++s) {
    const Vec3 b = keypoint_position(model, home, slot_keypoints[s]);
    std::vector<int> candidates;
    int link = model.keypoints()[slot_keypoints[s]].link;
    for (int c : slots_on_link[link]) {
      if (c == s) break;
      candidates.push_back(c);
    }
    for (link = model.links()[link].parent; link >= 0; link = model.links()[link].parent) {
      candidates.insert(candidates.end(), slots_on_link[link].begin(), slots_on_link[link].end());
    }
    for (int parent : candidates) {
      const double len = (keypoint_position(model, home, slot_keypoints[parent]) - b).norm();
      if (!rigid(parent, s, len)) continue;
      bones.emplace_back(parent, s);
      lengths.push_back(len);
      break;
    }
  }
}

namespace {

// Distance above the ground plane and outside every terrain box.
double floor_distance(const SceneDescription& scene, const Vec3& p) {
  double d = std::numeric_limits<double>::infinity();
  if (scene.terrain.has_ground) {
    const Pose& g = scene.terrain.ground_pose;
    d = (g.inverse() * p).z();
  }
  for (const auto& box : scene.terrain.boxes) {
    d = std::min(d, point_signed_distance(Shape::box(box.half_extents), box.pose, p));
  }
  return d;
}

Vec3 floor_gradient(const SceneDescription& scene, const Vec3& p) {
  const double h = 1e-6;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 a = p, b = p;
    a[k] += h;
    b[k] -= h;
    g[k] = (floor_distance(scene, a) - floor_distance(scene, b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

ImmaResult imma_retarget(const KinematicModel& model, const SourceMotion& source,
                         const SceneDescription& scene, const RetargetOptions& opts,
                         const BaselineConfig& cfg) {
  cfg.validate();
  source.validate();
  const int T = source.num_frames();
  if (T < 1) throw ValidationError("source motion has no frames");
  validate_scene(scene, model, T);
  const KeypointTargets targets = KeypointTargets::from(model, source, opts);
  const int S = static_cast<int>(targets.robot_keypoint.size());
  const int n = 3 * S;

  ImmaResult res;
  keypoint_bones(model, targets.robot_keypoint, res.bones, res.bone_lengths);

  std::vector<std::string> slot_names;
  for (int k : targets.robot_keypoint) slot_names.push_back(model.keypoints()[k].name);
  const SceneDescription src_scene = source_scene(source, scene);
  const InteractionMesh mesh = build_interaction_mesh(
      slot_names, targets.frame(source, opts.mesh_reference_frame), src_scene,
      opts.mesh_reference_frame, opts.mesh);
  const int V = mesh.num_vertices();
  std::vector<int> slot_vertex(S, -1);
  for (int v = 0; v < V; ++v) {
    if (mesh.vertices[v].kind == VertexKind::Keypoint) slot_vertex[mesh.vertices[v].index] = v;
  }
  // Laplacian rows restricted to the free keypoint columns.
  MatX M = MatX::Zero(V, S);
  {
    std::vector<int> vertex_slot(V, -1);
    for (int s = 0; s < S; ++s) vertex_slot[slot_vertex[s]] = s;
    for (int i = 0; i < V; ++i) {
      if (vertex_slot[i] >= 0) M(i, vertex_slot[i]) += 1.0;
      for (std::size_t k = 0; k < mesh.neighbors[i].size(); ++k) {
        const int s = vertex_slot[mesh.neighbors[i][k]];
        if (s >= 0) M(i, s) -= mesh.weights[i][k];
      }
    }
  }
  const MatX MtM = M.transpose() * M;
  MatX H = MatX::Zero(n, n);
  for (int a = 0; a < S; ++a) {
    for (int b = 0; b < S; ++b) H.block<3, 3>(3 * a, 3 * b) = 2.0 * MtM(a, b) * Mat3::Identity();
  }
  H.diagonal().array() += 1e-9;

  std::vector<int> foot_slot;
  std::vector<std::string> foot_src;
  for (const auto& f : opts.feet) {
    const int src = source.keypoint_index(f.source_keypoint);
    const auto it = std::find(targets.source_index.begin(), targets.source_index.end(), src);
    foot_slot.push_back(it == targets.source_index.end()
                            ? -1
                            : static_cast<int>(it - targets.source_index.begin()));
    foot_src.push_back(f.source_keypoint);
  }
  const int F = static_cast<int>(foot_slot.size());
  const auto stance = T >= 2 && F > 0
                          ? detect_stance(source, foot_src, opts.stance_threshold)
                          : std::vector<std::vector<bool>>(T, std::vector<bool>(F, false));

  const int B = static_cast<int>(res.bones.size());
  res.warped.resize(T);
  res.stage1_feasible.assign(T, true);
  for (int t = 0; t < T; ++t) {
    const PointList src = targets.frame(source, t);
    const PointList L_src = laplacian_coordinates(mesh, mesh_vertex_positions(mesh, src, src_scene, t));
    std::vector<int> pinned;
    for (int f = 0; f < F; ++f) {
      if (t > 0 && foot_slot[f] >= 0 && stance[t - 1][f] && stance[t][f]) pinned.push_back(f);
    }
    PointList x = src;
    bool ok = true;
    for (int it = 0; it < cfg.imma_stage1_iterations; ++it) {
      const PointList r = laplacian_coordinates(mesh, mesh_vertex_positions(mesh, x, scene, t));
      ConvexSubproblem p(n);
      p.H = H;
      for (int s = 0; s < S; ++s) {
        Vec3 gs = Vec3::Zero();
        for (int i = 0; i < V; ++i) gs += 2.0 * M(i, s) * (r[i] - L_src[i]);
        p.g.segment<3>(3 * s) = gs;
      }
      const int E = B + 3 * static_cast<int>(pinned.size());
      p.A_eq = MatX::Zero(E, n);
      p.b_eq = VecX::Zero(E);
      for (int k = 0; k < B; ++k) {
        const auto [a, b] = res.bones[k];
        const Vec3 d = x[a] - x[b];
        const double len = d.norm();
        const Vec3 u = len > 1e-12 ? Vec3(d / len) : Vec3::UnitZ();
        p.A_eq.block<1, 3>(k, 3 * a) = u.transpose();
        p.A_eq.block<1, 3>(k, 3 * b) = -u.transpose();
        p.b_eq[k] = res.bone_lengths[k] - len;
      }
      for (std::size_t j = 0; j < pinned.size(); ++j) {
        const int s = foot_slot[pinned[j]];
        p.A_eq.block<3, 3>(B + 3 * j, 3 * s) = Mat3::Identity();
        p.b_eq.segment<3>(B + 3 * j) = res.warped[t - 1][s] - x[s];
      }
      p.A_in = MatX::Zero(S, n);
      p.b_in = VecX::Zero(S);
      for (int s = 0; s < S; ++s) {
        p.A_in.block<1, 3>(s, 3 * s) = floor_gradient(scene, x[s]).transpose();
        p.b_in[s] = floor_distance(scene, x[s]);
      }
      p.trust_radius = opts.solver.trust_radius;
      const SubproblemSolution sol = solve_subproblem(p);
      if (sol.status == SubproblemStatus::Infeasible) {
        ok = false;
        break;
      }
      for (int s = 0; s < S; ++s) x[s] += sol.dq.segment<3>(3 * s);
      if (sol.dq.norm() < 1e-10) break;
    }
    double worst = 0.0;
    for (int k = 0; k < B; ++k) {
      const auto [a, b] = res.bones[k];
      worst = std::max(worst, std::abs((x[a] - x[b]).norm() - res.bone_lengths[k]));
    }
    for (int f : pinned) worst = std::max(worst, (x[foot_slot[f]] - res.warped[t - 1][foot_slot[f]]).norm());
    for (int s = 0; s < S; ++s) worst = std::max(worst, -floor_distance(scene, x[s]));
    res.stage1_feasible[t] = ok && worst <= 1e-6;
    res.warped[t] = x;
  }

  res.trajectory.dt = source.dt;
  Configuration q_prev = model.home();
  for (int t = 0; t < T; ++t) {
    FrameContext ctx;
    ctx.model = &model;
    ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
      assemble_keypoint_cost(model, q, poses, targets.robot_keypoint, res.warped[t], 2.0, out);
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
    so.max_iters = t == 0 ? std::max(cfg.imma_ik_iterations, opts.first_frame_iters)
                          : cfg.imma_ik_iterations;
    q_prev = sequential_solve(ctx, so).q;
    res.trajectory.frames.push_back(q_prev);
  }
  return res;
}

}  // namespace meshret
