#include "meshret/retarget.hpp"

#include "meshret/error.hpp"

#include <cmath>
#include <set>

namespace meshret {

std::optional<int> SourceMotion::find_keypoint(std::string_view name) const {
  for (int i = 0; i < num_keypoints(); ++i) {
    if (keypoint_names[i] == name) return i;
  }
  return std::nullopt;
}

int SourceMotion::keypoint_index(std::string_view name) const {
  if (auto i = find_keypoint(name)) return *i;
  throw ValidationError("source motion has no keypoint '" + std::string(name) + "'");
}

void SourceMotion::validate() const {
  if (!(dt > 0.0)) throw ValidationError("source motion dt must be positive");
  if (!(height > 0.0)) throw ValidationError("demonstrator height must be positive");
  std::set<std::string> seen;
  for (const auto& n : keypoint_names) {
    if (!seen.insert(n).second) throw ValidationError("duplicate source keypoint '" + n + "'");
  }
  for (int t = 0; t < num_frames(); ++t) {
    if (static_cast<int>(frames[t].size()) != num_keypoints()) {
      throw ValidationError("source frame " + std::to_string(t) + " has " +
                            std::to_string(frames[t].size()) + " keypoints, expected " +
                            std::to_string(num_keypoints()));
    }
    for (const auto& p : frames[t]) {
      if (!p.allFinite()) {
        throw ValidationError("source frame " + std::to_string(t) + " has non-finite values");
      }
    }
  }
  for (const auto& [id, track] : object_tracks) {
    if (static_cast<int>(track.size()) != num_frames()) {
      throw ValidationError("source object track '" + id + "' has " +
                            std::to_string(track.size()) + " frames, motion has " +
                            std::to_string(num_frames()));
    }
  }
}

SourceMotion scale_source(const SourceMotion& motion, double h_robot) {
  if (!(h_robot > 0.0) || !(motion.height > 0.0)) {
    throw ValidationError("heights must be positive for source scaling");
  }
  const double alpha = h_robot / motion.height;
  SourceMotion out = motion;
  for (auto& frame : out.frames) {
    for (auto& p : frame) p *= alpha;
  }
  for (auto& [id, track] : out.object_tracks) {
    for (auto& pose : track) pose.translation() *= alpha;
  }
  out.height = h_robot;
  return out;
}

std::vector<std::vector<bool>> detect_stance(const SourceMotion& motion,
                                             const std::vector<std::string>& foot_keypoints,
                                             double threshold) {
  const int T = motion.num_frames();
  if (T < 2) throw ValidationError("stance detection needs at least 2 frames");
  std::vector<int> idx;
  for (const auto& name : foot_keypoints) idx.push_back(motion.keypoint_index(name));
  std::vector<std::vector<bool>> stance(T, std::vector<bool>(idx.size(), false));
  for (int t = 0; t < T; ++t) {
    const int a = t == 0 ? 0 : t - 1;
    const int b = t == T - 1 ? T - 1 : t + 1;
    const double span = (b - a) * motion.dt;
    for (std::size_t f = 0; f < idx.size(); ++f) {
      const Vec3 d = motion.frames[b][idx[f]] - motion.frames[a][idx[f]];
      const double speed = d.head<2>().norm() / span;
      stance[t][f] = speed < threshold;
    }
  }
  return stance;
}

SceneDescription source_scene(const SourceMotion& motion, const SceneDescription& scene) {
  SceneDescription out = scene;
  for (auto& obj : out.objects) {
    auto it = motion.object_tracks.find(obj.id);
    if (it != motion.object_tracks.end()) obj.track = it->second;
  }
  return out;
}

RetargetOptions RetargetOptions::identity(const KinematicModel& model) {
  RetargetOptions opts;
  for (const auto& kp : model.keypoints()) opts.correspondence.emplace_back(kp.name, kp.name);
  return opts;
}

VecX default_smoothness(const KinematicModel& model) {
  VecX q = VecX::Constant(model.tangent_dim(), 0.1);
  q.head<6>().setOnes();
  return q;
}

void resolve_correspondence(const KinematicModel& model, const SourceMotion& source,
                            const RetargetOptions& opts, std::vector<int>& source_index,
                            std::vector<int>& robot_keypoint) {
  source_index.clear();
  robot_keypoint.clear();
  std::set<int> used;
  for (const auto& [src, robot] : opts.correspondence) {
    source_index.push_back(source.keypoint_index(src));
    const int k = model.keypoint_index(robot);
    if (!used.insert(k).second) {
      throw ValidationError("correspondence maps two source keypoints onto robot keypoint '" +
                            robot + "'");
    }
    robot_keypoint.push_back(k);
  }
  if (source_index.empty()) throw ValidationError("keypoint correspondence is empty");
}

namespace {

bool use_object_frame(const RetargetOptions& opts, const SceneDescription& scene) {
  switch (opts.mesh_frame) {
    case MeshFrameMode::World: return false;
    case MeshFrameMode::Object:
      if (scene.objects.empty()) throw ValidationError("object-frame mesh requested without objects");
      return true;
    case MeshFrameMode::Auto: return scene.task == TaskKind::RobotObject && !scene.objects.empty();
  }
  return false;
}

double energy_of(const PointList& r) {
  double e = 0.0;
  for (const auto& v : r) e += v.squaredNorm();
  return e;
}

}  // namespace

RetargetResult retarget_with_scenes(const KinematicModel& model, const SourceMotion& source,
                                    const SceneDescription& source_scene_desc,
                                    const SceneDescription& target_scene,
                                    const RetargetOptions& opts, const RetargetExtras& extras) {
  source.validate();
  const int T = source.num_frames();
  if (T < 1) throw ValidationError("source motion has no frames");
  validate_scene(target_scene, model, T);
  validate_scene(source_scene_desc, model, T);
  if (opts.mesh_reference_frame < 0 || opts.mesh_reference_frame >= T) {
    throw ValidationError("mesh reference frame outside the motion");
  }
  if (extras.nominal != nullptr && extras.nominal->size() != T) {
    throw ValidationError("nominal trajectory has " + std::to_string(extras.nominal->size()) +
                          " frames, source has " + std::to_string(T));
  }
  if ((extras.anchor_feet || extras.anchor_weights.size() > 0) && extras.nominal == nullptr) {
    throw ValidationError("anchoring needs a nominal trajectory");
  }
  const int n = model.tangent_dim();
  const VecX Q = opts.smoothness.size() > 0 ? opts.smoothness : default_smoothness(model);
  if (Q.size() != n) throw ValidationError("smoothness weights do not match the model");
  if (extras.anchor_weights.size() > 0 && extras.anchor_weights.size() != n) {
    throw ValidationError("anchor weights do not match the model");
  }

  std::vector<int> src_idx, robot_kp;
  resolve_correspondence(model, source, opts, src_idx, robot_kp);
  std::vector<std::string> slot_names;
  for (int k : robot_kp) slot_names.push_back(model.keypoints()[k].name);

  std::vector<int> foot_link;
  std::vector<std::string> foot_src;
  for (const auto& f : opts.feet) {
    foot_link.push_back(model.link_index(f.robot_link));
    foot_src.push_back(f.source_keypoint);
  }
  RetargetResult result;
  result.stance = T >= 2 && !foot_src.empty()
                      ? detect_stance(source, foot_src, opts.stance_threshold)
                      : std::vector<std::vector<bool>>(T, std::vector<bool>(foot_src.size(), false));

  const std::vector<ResolvedPair> pairs = opts.collision_constraints
                                              ? resolve_collision_pairs(target_scene, model)
                                              : std::vector<ResolvedPair>{};
  const bool object_frame = use_object_frame(opts, target_scene);

  auto source_keypoints = [&](int t) {
    PointList kp;
    kp.reserve(src_idx.size());
    for (int i : src_idx) kp.push_back(source.frames[t][i]);
    return kp;
  };
  auto build_mesh = [&](int t) {
    return build_interaction_mesh(slot_names, source_keypoints(t), source_scene_desc, t, opts.mesh);
  };

  InteractionMesh mesh = build_mesh(opts.rebuild_mesh_per_frame ? 0 : opts.mesh_reference_frame);
  result.mesh = mesh;
  result.trajectory.dt = source.dt;
  result.trajectory.frames.reserve(T);
  result.reports.reserve(T);

  Configuration q_prev;
  for (int t = 0; t < T; ++t) {
    if (opts.rebuild_mesh_per_frame && t > 0) mesh = build_mesh(t);
    const PointList src_kp = source_keypoints(t);
    const PointList src_pos = mesh_vertex_positions(mesh, src_kp, source_scene_desc, t);
    const Mat3 R_src =
        object_frame ? Mat3(source_scene_desc.objects[0].track[t].linear()) : Mat3::Identity();
    MeshCostInput input;
    input.mesh = &mesh;
    input.slot_keypoints = robot_kp;
    input.positions = mesh_vertex_positions(mesh, src_kp, target_scene, t);
    input.source_laplacians = laplacian_coordinates(mesh, src_pos);
    for (auto& l : input.source_laplacians) l = R_src.transpose() * l;
    input.frame_rotation =
        object_frame ? Mat3(target_scene.objects[0].track[t].linear()) : Mat3::Identity();

    ConstraintInputs ci;
    ci.scene = &target_scene;
    ci.pairs = &pairs;
    ci.frame = t;
    ci.dt = source.dt;
    if (t > 0) {
      ci.q_prev = &q_prev;
      const auto prev_poses = forward_kinematics(model, q_prev);
      for (std::size_t f = 0; f < opts.feet.size(); ++f) {
        if (result.stance[t - 1][f] && result.stance[t][f]) {
          ci.stance.push_back({foot_link[f], opts.feet[f].offset,
                               prev_poses[foot_link[f]] * opts.feet[f].offset});
        }
      }
    } else if (extras.anchor_feet) {
      const auto nominal_poses = forward_kinematics(model, extras.nominal->frames[0]);
      for (std::size_t f = 0; f < opts.feet.size(); ++f) {
        ci.anchors.push_back({foot_link[f], opts.feet[f].offset,
                              nominal_poses[foot_link[f]] * opts.feet[f].offset});
      }
    }

    FrameContext ctx;
    ctx.model = &model;
    const Configuration* anchor_ref = extras.nominal != nullptr && extras.anchor_weights.size() > 0
                                          ? &extras.nominal->frames[t]
                                          : nullptr;
    ctx.cost = [&, t](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
      assemble_mesh_cost(input, model, q, poses, out, 2.0);
      if (t == 0) {
        assemble_smoothness_cost(q, q, opts.first_frame_damping * Q, out);
      } else {
        assemble_smoothness_cost(q, q_prev, Q, out);
      }
      if (anchor_ref != nullptr) assemble_smoothness_cost(q, *anchor_ref, extras.anchor_weights, out);
    };
    ctx.constraints = [&](const Configuration& q, const std::vector<Pose>& poses) {
      return assemble_constraints(model, q, poses, ci);
    };
    if (extras.warm_start_nominal && extras.nominal != nullptr) {
      ctx.q_warm = extras.nominal->frames[t];
    } else if (t == 0) {
      ctx.q_warm = extras.initial_guess ? *extras.initial_guess : model.home();
    } else {
      ctx.q_warm = q_prev;
    }
    joint_bounds(model, t > 0 ? &q_prev : nullptr, source.dt, ctx.joint_lo, ctx.joint_hi);

    SequentialOptions so = opts.solver;
    if (t == 0) so.max_iters = std::max(so.max_iters, opts.first_frame_iters);

    FrameReport fr;
    {
      Configuration warm = ctx.q_warm;
      clamp_joints(warm, ctx.joint_lo, ctx.joint_hi);
      fr.warm_start_energy = energy_of(mesh_residuals(input, model, forward_kinematics(model, warm)));
    }
    SequentialResult sr = sequential_solve(ctx, so);
    fr.solve = sr.report;
    fr.deformation_energy = energy_of(mesh_residuals(input, model, forward_kinematics(model, sr.q)));
    fr.penetration_flag = sr.report.min_signed_distance < -opts.penetration_tol;
    result.reports.push_back(fr);
    result.trajectory.frames.push_back(sr.q);
    q_prev = sr.q;
  }
  return result;
}

RetargetResult retarget_motion(const KinematicModel& model, const SourceMotion& source,
                               const SceneDescription& scene, const RetargetOptions& opts) {
  return retarget_with_scenes(model, source, source_scene(source, scene), scene, opts);
}

}  // namespace meshret
