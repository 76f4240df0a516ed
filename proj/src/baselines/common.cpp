#include "meshret/baselines/baselines.hpp"

#include "meshret/error.hpp"

namespace meshret {

const char* baseline_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::Phc: return "phc";
    case BaselineMethod::Gmr: return "gmr";
    case BaselineMethod::VideoMimic: return "videomimic";
    case BaselineMethod::Imma: return "imma";
  }
  return "phc";
}

BaselineMethod parse_baseline(std::string_view name) {
  if (name == "phc") return BaselineMethod::Phc;
  if (name == "gmr") return BaselineMethod::Gmr;
  if (name == "videomimic") return BaselineMethod::VideoMimic;
  if (name == "imma") return BaselineMethod::Imma;
  throw ParseError("unknown baseline method '" + std::string(name) + "'");
}

void BaselineConfig::validate() const {
  if (!(phc_learning_rate > 0.0) || !(vm_learning_rate > 0.0) || !(vm_scale_learning_rate > 0.0)) {
    throw ValidationError("baseline learning rates must be positive");
  }
  if (phc_iterations < 1 || gmr_iterations < 1 || vm_iterations < 1 || vm_divergence_window < 1 ||
      imma_stage1_iterations < 1 || imma_ik_iterations < 1) {
    throw ValidationError("baseline iteration budgets must be at least 1");
  }
  if (phc_gradient_tol < 0.0 || gmr_orientation_weight < 0.0 || lambda_contact < 0.0 ||
      lambda_skate < 0.0 || lambda_collision < 0.0 || lambda_joint < 0.0 || lambda_smooth < 0.0) {
    throw ValidationError("baseline weights and tolerances must be nonnegative");
  }
}

KeypointTargets KeypointTargets::from(const KinematicModel& model, const SourceMotion& source,
                                      const RetargetOptions& opts) {
  KeypointTargets t;
  resolve_correspondence(model, source, opts, t.source_index, t.robot_keypoint);
  return t;
}

PointList KeypointTargets::frame(const SourceMotion& source, int t) const {
  PointList out;
  out.reserve(source_index.size());
  for (int i : source_index) out.push_back(source.frames[t][i]);
  return out;
}

Trajectory run_baseline(BaselineMethod method, const KinematicModel& model,
                        const SourceMotion& demo, const SceneDescription& scene,
                        const RetargetOptions& opts, const BaselineConfig& cfg) {
  if (method == BaselineMethod::VideoMimic) {
    return videomimic_retarget(model, demo, scene, opts, cfg).trajectory;
  }
  const SourceMotion scaled = scale_source(demo, model.height());
  switch (method) {
    case BaselineMethod::Phc: return phc_retarget(model, scaled, opts, cfg).trajectory;
    case BaselineMethod::Gmr: {
      std::vector<OrientationTarget> orient;
      if (cfg.gmr_orientation && scaled.find_keypoint("left_hip") &&
          scaled.find_keypoint("right_hip")) {
        orient.push_back(root_orientation_targets(model, scaled, "left_hip", "right_hip"));
      }
      return gmr_retarget(model, scaled, orient, opts, cfg);
    }
    case BaselineMethod::Imma:
      return imma_retarget(model, scaled, scene, opts, cfg).trajectory;
    case BaselineMethod::VideoMimic: break;
  }
  throw ValidationError("unhandled baseline method");
}

}  // namespace meshret
