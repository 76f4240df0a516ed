#pragma once

#include "meshret/geometry/interaction_mesh.hpp"
#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/solver/sequential.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace meshret {

struct SourceMotion {
  std::vector<std::string> keypoint_names;
  std::vector<PointList> frames;  // frames x keypoints, meters
  double dt = 1.0 / 30.0;
  double height = 1.7;  // demonstrator height, meters
  // Optional per-frame object poses keyed by scene object id.
  std::map<std::string, std::vector<Pose>> object_tracks;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int num_keypoints() const { return static_cast<int>(keypoint_names.size()); }
  std::optional<int> find_keypoint(std::string_view name) const;
  int keypoint_index(std::string_view name) const;  // throws ValidationError
  // Throws ValidationError on shape mismatches, non-finite values, dt <= 0
  // or height <= 0.
  void validate() const;
};

// Multiplies keypoints and object positions by h_robot / height about the
// world origin; orientations are unchanged.
SourceMotion scale_source(const SourceMotion& motion, double h_robot);

// stance[t][f]: horizontal speed of foot keypoint f at frame t below
// threshold (central differences, one-sided at the ends).
std::vector<std::vector<bool>> detect_stance(const SourceMotion& motion,
                                             const std::vector<std::string>& foot_keypoints,
                                             double threshold);

// Scene copy whose object tracks come from the source motion where given.
SceneDescription source_scene(const SourceMotion& motion, const SceneDescription& scene);

struct FootSpec {
  std::string source_keypoint;  // used for stance detection
  std::string robot_link;       // the link origin is held during stance
  Vec3 offset = Vec3::Zero();
};

enum class MeshFrameMode { Auto, World, Object };

struct RetargetOptions {
  // (source keypoint, robot keypoint) pairs; the order fixes the mesh slots.
  std::vector<std::pair<std::string, std::string>> correspondence;
  SequentialOptions solver;
  int first_frame_iters = 50;
  // Frame 0 replaces the smoothness term by a proximal term around the
  // current iterate, weighted by this factor times Q.
  double first_frame_damping = 0.01;
  double stance_threshold = 0.01;  // m/s
  std::vector<FootSpec> feet;
  MeshOptions mesh;
  bool rebuild_mesh_per_frame = false;
  int mesh_reference_frame = 0;
  // Auto picks object-frame Laplacians for robot-object scenes.
  MeshFrameMode mesh_frame = MeshFrameMode::Auto;
  // Diagonal of Q over the increment coordinates; empty selects 1.0 on the
  // base translation and rotation and 0.1 on every joint.
  VecX smoothness;
  bool collision_constraints = true;
  double penetration_tol = 0.02;  // m, reporting threshold only

  // Identity correspondence over every model keypoint.
  static RetargetOptions identity(const KinematicModel& model);
};

VecX default_smoothness(const KinematicModel& model);

struct FrameReport {
  SolveReport solve;
  double deformation_energy = 0.0;
  double warm_start_energy = 0.0;
  bool penetration_flag = false;
};

struct RetargetResult {
  Trajectory trajectory;
  std::vector<FrameReport> reports;
  std::vector<std::vector<bool>> stance;
  InteractionMesh mesh;  // topology used at frame 0
};

// Additions used when re-solving an augmented scenario.
struct RetargetExtras {
  const Trajectory* nominal = nullptr;
  VecX anchor_weights;  // W diagonal over increment coordinates; empty = no anchor cost
  bool anchor_feet = false;
  // Frame-0 warm start instead of the model's home pose.
  std::optional<Configuration> initial_guess;
  // Warm-start every frame at the nominal configuration of that frame.
  bool warm_start_nominal = false;
};

// Solves the per-frame program for every frame. `source` must already be
// scaled to the robot. The source mesh uses `source_scene_desc`, the robot
// side `target_scene`.
RetargetResult retarget_with_scenes(const KinematicModel& model, const SourceMotion& source,
                                    const SceneDescription& source_scene_desc,
                                    const SceneDescription& target_scene,
                                    const RetargetOptions& opts, const RetargetExtras& extras = {});

RetargetResult retarget_motion(const KinematicModel& model, const SourceMotion& source,
                               const SceneDescription& scene, const RetargetOptions& opts);

// Mesh slot names and model keypoint indices implied by a correspondence.
void resolve_correspondence(const KinematicModel& model, const SourceMotion& source,
                            const RetargetOptions& opts, std::vector<int>& source_index,
                            std::vector<int>& robot_keypoint);

}  // namespace meshret
