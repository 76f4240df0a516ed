#pragma once

#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/retarget.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace meshret {

enum class AnchorPreset { None, LowerBody, Custom };

const char* anchor_preset_name(AnchorPreset p);
AnchorPreset parse_anchor_preset(std::string_view name);

struct AugmentationSpec {
  Vec3 delta_p = Vec3::Zero();
  Quat delta_theta = Quat::Identity();
  std::optional<int> t_m;  // motion onset frame; nullopt = detect
  double tau_p = 0.5;      // s
  double tau_theta = 0.5;  // s
  Vec3 object_scale = Vec3::Ones();
  double terrain_height_scale = 1.0;
  double terrain_depth_scale = 1.0;
  AnchorPreset anchor = AnchorPreset::LowerBody;
  VecX anchor_weights;  // used with AnchorPreset::Custom
  bool anchor_feet = true;

  void validate() const;  // throws ValidationError
};

// First frame whose forward-difference speed exceeds `speed` (m/s); the last
// frame when the track never moves.
int detect_motion_onset(const std::vector<Pose>& track, double dt, double speed = 0.01);

// Transient offset applied before onset and decayed afterwards: position
// dp * exp(-(t - t_m) / tau_p) + p(t), orientation
// exp(exp(-(t - t_m) / tau_theta) * log(dtheta)) * theta(t).
std::vector<Pose> augment_object_trajectory(const std::vector<Pose>& track,
                                            const AugmentationSpec& spec, double dt);

// Multiplies the half extents of every object componentwise.
SceneDescription scale_object(const SceneDescription& scene, const Vec3& factors);
// Multiplies every terrain box's height (local z) and depth (local x)
// extents. The bottom face and the local -x face stay in place.
SceneDescription scale_terrain(const SceneDescription& scene, double height, double depth);

// Object tracks augmented, objects and terrain scaled.
SceneDescription augment_scene(const SceneDescription& scene, const AugmentationSpec& spec,
                               double dt);

// 1 on the base and on joints whose name mentions hip, knee or ankle.
VecX lower_body_weights(const KinematicModel& model);
VecX anchor_weights(const KinematicModel& model, const AugmentationSpec& spec);

// Re-solves the scaled source against the augmented scene with the anchor
// cost and, if requested, both feet pinned at frame 0 to their nominal
// positions. `scene` is the nominal scene; the source mesh keeps it.
RetargetResult augment_retarget(const KinematicModel& model, const Trajectory& nominal,
                                const SourceMotion& source, const SceneDescription& scene,
                                const AugmentationSpec& spec, const RetargetOptions& opts);

struct BatchEntry {
  AugmentationSpec spec;
  bool ok = false;  // solved without a validation or solver error
  // Every frame solved its subproblems without relaxing stance or anchors.
  bool feasible = false;
  std::string error;
  RetargetResult result;
};

// Offsets on the Cartesian product xs x ys (z = 0), other fields from base.
std::vector<AugmentationSpec> offset_grid(const AugmentationSpec& base,
                                          const std::vector<double>& xs,
                                          const std::vector<double>& ys);

struct SamplerRanges {
  Vec3 offset_min = Vec3(-0.2, -0.2, 0.0);
  Vec3 offset_max = Vec3(0.2, 0.2, 0.0);
  double yaw_max = 0.0;  // rad, |yaw| of delta_theta
  Vec3 scale_min = Vec3::Ones();
  Vec3 scale_max = Vec3::Ones();
};

std::vector<AugmentationSpec> sample_specs(const AugmentationSpec& base,
                                           const SamplerRanges& ranges, int count,
                                           std::uint64_t seed);

// Solves every spec independently; failures are recorded and the batch
// continues. Results are in spec order regardless of `threads`.
std::vector<BatchEntry> generate_batch(const KinematicModel& model, const Trajectory& nominal,
                                       const SourceMotion& source, const SceneDescription& scene,
                                       const std::vector<AugmentationSpec>& specs,
                                       const RetargetOptions& opts, int threads = 1);

}  // namespace meshret
