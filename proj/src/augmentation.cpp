#include "meshret/augmentation.hpp"

#include "meshret/error.hpp"
#include "meshret/geometry/sampling.hpp"
#include "meshret/parallel.hpp"

#include <cmath>

namespace meshret {

const char* anchor_preset_name(AnchorPreset p) {
  switch (p) {
    case AnchorPreset::None: return "none";
    case AnchorPreset::LowerBody: return "lower_body";
    case AnchorPreset::Custom: return "custom";
  }
  return "none";
}

AnchorPreset parse_anchor_preset(std::string_view name) {
  if (name == "none") return AnchorPreset::None;
  if (name == "lower_body") return AnchorPreset::LowerBody;
  if (name == "custom") return AnchorPreset::Custom;
  throw ParseError("unknown anchor preset '" + std::string(name) + "'");
}

void AugmentationSpec::validate() const {
  if (!(tau_p > 0.0) || !(tau_theta > 0.0)) {
    throw ValidationError("decay constants must be positive");
  }
  if (!(object_scale.minCoeff() > 0.0)) throw ValidationError("object scale factors must be positive");
  if (!(terrain_height_scale > 0.0) || !(terrain_depth_scale > 0.0)) {
    throw ValidationError("terrain scale factors must be positive");
  }
  if (!delta_p.allFinite() || !delta_theta.coeffs().allFinite()) {
    throw ValidationError("augmentation offset is not finite");
  }
  if (anchor == AnchorPreset::Custom && anchor_weights.size() > 0 &&
      anchor_weights.minCoeff() < 0.0) {
    throw ValidationError("anchor weights must be nonnegative");
  }
  if (t_m && *t_m < 0) throw ValidationError("motion onset frame is negative");
}

int detect_motion_onset(const std::vector<Pose>& track, double dt, double speed) {
  const int T = static_cast<int>(track.size());
  if (T == 0) throw ValidationError("object track is empty");
  for (int t = 0; t + 1 < T; ++t) {
    if ((track[t + 1].translation() - track[t].translation()).norm() / dt > speed) return t;
  }
  return T - 1;
}

std::vector<Pose> augment_object_trajectory(const std::vector<Pose>& track,
                                            const AugmentationSpec& spec, double dt) {
  spec.validate();
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const int T = static_cast<int>(track.size());
  const int t_m = spec.t_m ? *spec.t_m : detect_motion_onset(track, dt);
  if (t_m < 0 || t_m >= T) {
    throw ValidationError("motion onset frame " + std::to_string(t_m) + " outside the track of " +
                          std::to_string(T) + " frames");
  }
  const Vec3 log_dtheta = quat_log(spec.delta_theta.normalized());
  std::vector<Pose> out(T);
  for (int t = 0; t < T; ++t) {
    Vec3 p;
    Quat r;
    if (t < t_m) {
      p = spec.delta_p + track[0].translation();
      r = spec.delta_theta.normalized() * Quat(track[0].linear());
    } else {
      const double elapsed = (t - t_m) * dt;
      p = spec.delta_p * std::exp(-elapsed / spec.tau_p) + track[t].translation();
      r = quat_exp(std::exp(-elapsed / spec.tau_theta) * log_dtheta) * Quat(track[t].linear());
    }
    out[t] = make_pose(p, r.normalized());
  }
  return out;
}

SceneDescription scale_object(const SceneDescription& scene, const Vec3& factors) {
  if (!(factors.minCoeff() > 0.0)) throw ValidationError("object scale factors must be positive");
  SceneDescription out = scene;
  for (auto& o : out.objects) o.half_extents = o.half_extents.cwiseProduct(factors);
  return out;
}

SceneDescription scale_terrain(const SceneDescription& scene, double height, double depth) {
  if (!(height > 0.0) || !(depth > 0.0)) {
    throw ValidationError("terrain scale factors must be positive");
  }
  SceneDescription out = scene;
  for (auto& b : out.terrain.boxes) {
    const Vec3 old = b.half_extents;
    b.half_extents.z() *= height;
    b.half_extents.x() *= depth;
    const Vec3 shift_local(b.half_extents.x() - old.x(), 0.0, b.half_extents.z() - old.z());
    b.pose.translation() += b.pose.linear() * shift_local;
  }
  return out;
}

SceneDescription augment_scene(const SceneDescription& scene, const AugmentationSpec& spec,
                               double dt) {
  SceneDescription out = scale_terrain(scale_object(scene, spec.object_scale),
                                       spec.terrain_height_scale, spec.terrain_depth_scale);
  for (auto& o : out.objects) o.track = augment_object_trajectory(o.track, spec, dt);
  return out;
}

VecX lower_body_weights(const KinematicModel& model) {
  VecX w = VecX::Zero(model.tangent_dim());
  w.head<6>().setOnes();
  const auto& names = model.joint_names();
  for (int j = 0; j < model.num_joints(); ++j) {
    const std::string& n = names[j];
    if (n.find("hip") != std::string::npos || n.find("knee") != std::string::npos ||
        n.find("ankle") != std::string::npos) {
      w[6 + j] = 1.0;
    }
  }
  return w;
}

VecX anchor_weights(const KinematicModel& model, const AugmentationSpec& spec) {
  switch (spec.anchor) {
    case AnchorPreset::None: return VecX();
    case AnchorPreset::LowerBody: return lower_body_weights(model);
    case AnchorPreset::Custom:
      if (spec.anchor_weights.size() != model.tangent_dim()) {
        throw ValidationError("custom anchor weights need " + std::to_string(model.tangent_dim()) +
                              " entries");
      }
      return spec.anchor_weights;
  }
  return VecX();
}

RetargetResult augment_retarget(const KinematicModel& model, const Trajectory& nominal,
                                const SourceMotion& source, const SceneDescription& scene,
                                const AugmentationSpec& spec, const RetargetOptions& opts) {
  spec.validate();
  if (nominal.size() != source.num_frames()) {
    throw ValidationError("nominal trajectory has " + std::to_string(nominal.size()) +
                          " frames, source has " + std::to_string(source.num_frames()));
  }
  const SceneDescription src_scene = source_scene(source, scene);
  const SceneDescription target = augment_scene(scene, spec, source.dt);
  RetargetExtras extras;
  extras.nominal = &nominal;
  extras.anchor_weights = anchor_weights(model, spec);
  extras.anchor_feet = spec.anchor_feet && !opts.feet.empty();
  extras.warm_start_nominal = true;
  return retarget_with_scenes(model, source, src_scene, target, opts, extras);
}

std::vector<AugmentationSpec> offset_grid(const AugmentationSpec& base,
                                          const std::vector<double>& xs,
                                          const std::vector<double>& ys) {
  std::vector<AugmentationSpec> out;
  for (double x : xs) {
    for (double y : ys) {
      AugmentationSpec s = base;
      s.delta_p = Vec3(x, y, 0.0);
      out.push_back(s);
    }
  }
  return out;
}

std::vector<AugmentationSpec> sample_specs(const AugmentationSpec& base,
                                           const SamplerRanges& ranges, int count,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AugmentationSpec> out;
  for (int i = 0; i < count; ++i) {
    AugmentationSpec s = base;
    for (int k = 0; k < 3; ++k) {
      s.delta_p[k] = ranges.offset_min[k] + (ranges.offset_max[k] - ranges.offset_min[k]) * rng.uniform();
      s.object_scale[k] = ranges.scale_min[k] + (ranges.scale_max[k] - ranges.scale_min[k]) * rng.uniform();
    }
    const double yaw = ranges.yaw_max * rng.uniform(-1.0, 1.0);
    s.delta_theta = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    out.push_back(s);
  }
  return out;
}

std::vector<BatchEntry> generate_batch(const KinematicModel& model, const Trajectory& nominal,
                                       const SourceMotion& source, const SceneDescription& scene,
                                       const std::vector<AugmentationSpec>& specs,
                                       const RetargetOptions& opts, int threads) {
  std::vector<BatchEntry> out(specs.size());
  parallel_for(static_cast<int>(specs.size()), threads, [&](int i) {
    BatchEntry& e = out[i];
    e.spec = specs[i];
    try {
      e.result = augment_retarget(model, nominal, source, scene, specs[i], opts);
      e.ok = true;
      e.feasible = true;
      for (const auto& r : e.result.reports) {
        if (r.solve.relaxed || r.solve.status == SolveStatus::InfeasibleSubproblem) {
          e.feasible = false;
        }
      }
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
  });
  return out;
}

}  // namespace meshret
