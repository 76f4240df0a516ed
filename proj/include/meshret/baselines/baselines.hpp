#pragma once

#include "meshret/geometry/interaction_mesh.hpp"
#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/retarget.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace meshret {

enum class BaselineMethod { Phc, Gmr, VideoMimic, Imma };

const char* baseline_name(BaselineMethod m);
BaselineMethod parse_baseline(std::string_view name);

struct BaselineConfig {
  // PHC: whole-trajectory keypoint descent.
  double phc_learning_rate = 1e-2;
  int phc_iterations = 2000;
  double phc_gradient_tol = 1e-6;

  // GMR: per-frame keypoint and orientation matching.
  bool gmr_orientation = true;
  double gmr_orientation_weight = 0.1;
  int gmr_iterations = 10;

  // VideoMimic: descent over the trajectory and the pairwise scales.
  double vm_learning_rate = 5e-3;        // joint and base coordinates
  double vm_scale_learning_rate = 0.5;   // pairwise scales, per unit curvature
  int vm_iterations = 400;
  int vm_divergence_window = 50;
  double lambda_contact = 10.0;
  double lambda_skate = 10.0;
  double lambda_collision = 10.0;
  double lambda_joint = 10.0;
  double lambda_smooth = 1.0;

  // IMMA: keypoint warp, then inverse kinematics.
  int imma_stage1_iterations = 10;
  int imma_ik_iterations = 10;

  void validate() const;  // throws ValidationError
};

// Keypoint targets shared by the per-frame baselines: model keypoint index
// and source column for every correspondence entry.
struct KeypointTargets {
  std::vector<int> robot_keypoint;
  std::vector<int> source_index;

  static KeypointTargets from(const KinematicModel& model, const SourceMotion& source,
                              const RetargetOptions& opts);
  PointList frame(const SourceMotion& source, int t) const;
};

struct PhcResult {
  Trajectory trajectory;
  int iterations = 0;
  double final_gradient_norm = 0.0;
};

// Gradient descent on sum_t sum_i |f_i(q_t) - p_ti|^2 over every frame at
// once, clamping joints into their limits after each step. The base
// orientation moves along the exponential map. `source` is robot-scaled.
PhcResult phc_retarget(const KinematicModel& model, const SourceMotion& source,
                       const RetargetOptions& opts, const BaselineConfig& cfg = {});

// World orientation targets for one link, one per frame.
struct OrientationTarget {
  int link = 0;
  std::vector<Quat> frames;
};

// Heading of the pelvis from the hip keypoints: x forward, z up.
OrientationTarget root_orientation_targets(const KinematicModel& model, const SourceMotion& source,
                                           const std::string& left_hip,
                                           const std::string& right_hip);

// Per frame, warm-started from the previous one: keypoint least squares
// plus weighted orientation residuals, subject only to joint-limit boxes.
Trajectory gmr_retarget(const KinematicModel& model, const SourceMotion& source,
                        const std::vector<OrientationTarget>& orientations,
                        const RetargetOptions& opts, const BaselineConfig& cfg = {});

struct VideoMimicResult {
  Trajectory trajectory;
  std::vector<std::pair<int, int>> pairs;  // correspondence slots
  std::vector<double> scales;              // one per pair
  int iterations = 0;
  bool diverged = false;
  double best_objective = 0.0;
};

// Correspondence slot pairs joined by an edge of the interaction mesh built
// from the source keypoints at frame 0 (no scene vertices).
std::vector<std::pair<int, int>> mesh_neighbor_pairs(const SourceMotion& source,
                                                     const KeypointTargets& targets);

// Descent over q_{0:T} and the pairwise scales with soft contact, skating,
// collision, joint-limit and smoothness penalties. `demo` is the
// demonstrator motion at its original scale; stance comes from opts.feet.
VideoMimicResult videomimic_retarget(const KinematicModel& model, const SourceMotion& demo,
                                     const SceneDescription& scene, const RetargetOptions& opts,
                                     const BaselineConfig& cfg = {});

struct ImmaResult {
  Trajectory trajectory;
  std::vector<PointList> warped;          // stage-1 keypoints per frame, by slot
  std::vector<bool> stage1_feasible;      // per frame
  std::vector<std::pair<int, int>> bones; // slot pairs
  std::vector<double> bone_lengths;
};

// Slot pairs (parent, child) along the kinematic tree with their lengths
// at the home configuration. Each child is paired with the nearest earlier
// keypoint on its own link or an ancestor link whose distance to it does not
// change with the joint angles; keypoints without such a partner get no bone.
void keypoint_bones(const KinematicModel& model, const std::vector<int>& slot_keypoints,
                    std::vector<std::pair<int, int>>& bones, std::vector<double>& lengths);

// Stage 1 moves free keypoints to minimize Laplacian deformation under
// bone-length, floor and stance-foot constraints; stage 2 fits the robot to
// them by inverse kinematics within the joint limits.
ImmaResult imma_retarget(const KinematicModel& model, const SourceMotion& source,
                         const SceneDescription& scene, const RetargetOptions& opts,
                         const BaselineConfig& cfg = {});

// Runs one method on a demonstrator-scale motion; scales the source to the
// robot where the method expects it.
Trajectory run_baseline(BaselineMethod method, const KinematicModel& model,
                        const SourceMotion& demo, const SceneDescription& scene,
                        const RetargetOptions& opts, const BaselineConfig& cfg = {});

}  // namespace meshret
