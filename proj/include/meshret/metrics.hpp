#pragma once

#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/retarget.hpp"

#include <optional>
#include <string>
#include <vector>

namespace meshret {

struct MetricOptions {
  double penetration_tol = 1e-3;          // m
  double contact_threshold = 0.02;        // m
  double source_contact_distance = 0.03;  // m
  double skating_threshold = 1e-3;        // m per frame
  double stance_threshold = 0.01;         // m/s, source stance detection
};

struct PenetrationMetrics {
  double duration = 0.0;      // fraction of frames
  double max_depth_cm = 0.0;
  std::vector<double> min_distance;  // per frame, m (+inf without pairs)
};

// Frames whose smallest monitored signed distance is below -penetration_tol.
PenetrationMetrics penetration_metrics(const Trajectory& traj, const KinematicModel& model,
                                       const SceneDescription& scene,
                                       const MetricOptions& opts = {});

struct SkatingMetrics {
  double duration = 0.0;             // fraction of stance frames
  double max_velocity_cms = 0.0;     // over skating frames
  bool applicable = true;            // false when no stance frames exist
  std::vector<double> speed_cms;     // per frame, largest stance-foot xy speed
};

// Foot xy velocity of every stance foot by central differences inside each
// contiguous stance interval, one-sided at the interval ends; a stance frame
// skates when the foot moves more than skating_threshold per frame. A stance
// interval of a single frame has no velocity.
SkatingMetrics foot_skating_metrics(const Trajectory& traj, const KinematicModel& model,
                                    const std::vector<FootSpec>& feet,
                                    const std::vector<std::vector<bool>>& stance,
                                    const MetricOptions& opts = {});

// A robot keypoint required to touch a scene target.
struct ContactRequirement {
  std::string keypoint;
  PairTarget target = PairTarget::Object;
  int target_index = 0;
};

using ContactSchedule = std::vector<std::vector<ContactRequirement>>;  // per frame

// Hands against objects for robot-object tasks, hands, toes and heels
// against terrain boxes for robot-terrain tasks, nothing for robot-only.
// A requirement is set where the scaled source keypoint lies within
// source_contact_distance of the target surface (or inside it). The scene
// must carry the source object tracks.
ContactSchedule derive_contact_schedule(const SourceMotion& source, const SceneDescription& scene,
                                        TaskKind task, const MetricOptions& opts = {});

// Distance from a robot keypoint's link geometry to a target; the keypoint
// point itself is used when its link has no collision primitives.
double keypoint_target_distance(const KinematicModel& model, const std::vector<Pose>& link_poses,
                                int keypoint, const SceneDescription& scene, PairTarget target,
                                int target_index, int frame);

// Fraction of required frame-contact events held within contact_threshold;
// nullopt for an empty schedule.
std::optional<double> contact_preservation(const Trajectory& traj, const KinematicModel& model,
                                           const SceneDescription& scene,
                                           const ContactSchedule& schedule,
                                           const MetricOptions& opts = {});

struct QualityReport {
  double penetration_duration = 0.0;
  double penetration_max_depth_cm = 0.0;
  double skating_duration = 0.0;
  double skating_max_velocity_cms = 0.0;
  bool skating_applicable = true;
  std::optional<double> contact_preservation;
  std::vector<double> min_distance;  // per frame, m
  std::vector<double> foot_speed_cms;
  MetricOptions thresholds;
};

// scene: robot-scale scene the trajectory was produced against. source:
// scaled source motion (stance and contact schedule).
QualityReport evaluate(const Trajectory& traj, const KinematicModel& model,
                       const SceneDescription& scene, const SourceMotion& source, TaskKind task,
                       const std::vector<FootSpec>& feet, const MetricOptions& opts = {});

std::string quality_report_to_json(const QualityReport& report);
QualityReport quality_report_from_json(std::string_view text);

}  // namespace meshret
