#pragma once

#include "meshret/geometry/interaction_mesh.hpp"
#include "meshret/geometry/scene.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/solver/subproblem.hpp"

#include <vector>

namespace meshret {

// Local quadratic model of a cost around the current iterate:
//   f(q (+) dq) ~= value + g' dq + 0.5 dq' H dq
struct QuadraticModel {
  MatX H;
  VecX g;
  double value = 0.0;

  explicit QuadraticModel(int n = 0) : H(MatX::Zero(n, n)), g(VecX::Zero(n)) {}
  int dim() const { return static_cast<int>(g.size()); }
};

enum class RowKind { JointLimit, VelocityLimit, Sdf, Stance, Anchor, Other };

const char* row_kind_name(RowKind kind);

// Linearized constraints at the current iterate:
//   A_in dq + b_in >= 0,  A_eq dq = b_eq.
// b_in holds the constraint values at the iterate and b_eq the remaining
// equality residual, so the nonlinear violation at the iterate is
// max(-b_in, |b_eq|).
struct ConstraintSet {
  int n = 0;
  std::vector<VecX> in_rows;
  std::vector<double> in_values;
  std::vector<RowKind> in_kind;
  std::vector<VecX> eq_rows;
  std::vector<double> eq_residuals;
  std::vector<RowKind> eq_kind;

  explicit ConstraintSet(int dim = 0) : n(dim) {}

  int num_inequalities() const { return static_cast<int>(in_rows.size()); }
  int num_equalities() const { return static_cast<int>(eq_rows.size()); }

  void add_inequality(const VecX& row, double value, RowKind kind);
  void add_equalities(const MatX& rows, const VecX& residual, RowKind kind);

  MatX A_in() const;
  VecX b_in() const;
  MatX A_eq() const;
  VecX b_eq() const;

  double max_violation() const;
  // Smallest constraint value among inequality rows of the given kind
  // (+inf if none).
  double min_value(RowKind kind) const;
  // Largest |residual| among equality rows of the given kind (0 if none).
  double max_residual(RowKind kind) const;
};

// Mesh cost inputs for one frame. Robot keypoint vertices move with the
// configuration; every other vertex is fixed at `positions`.
struct MeshCostInput {
  const InteractionMesh* mesh = nullptr;
  // Model keypoint index for every mesh keypoint slot.
  std::vector<int> slot_keypoints;
  // World position of every vertex at this frame (keypoint entries ignored).
  PointList positions;
  // Source Laplacian coordinates, expressed in the cost frame.
  PointList source_laplacians;
  // Rotation of the cost frame (identity for world-frame Laplacians, the
  // object orientation for object-frame meshes).
  Mat3 frame_rotation = Mat3::Identity();
};

// Gauss-Newton model of 0.5 * weight * sum_i |L_i(q) - L_i^source|^2:
//   H += w J_L' J_L,  g += w J_L' r.
void assemble_mesh_cost(const MeshCostInput& input, const KinematicModel& model,
                        const Configuration& q, const std::vector<Pose>& link_poses,
                        QuadraticModel& out, double weight = 1.0);

// Target-side vertex positions and Laplacian residuals r_i at q.
PointList mesh_target_positions(const MeshCostInput& input, const KinematicModel& model,
                                const std::vector<Pose>& link_poses);
PointList mesh_residuals(const MeshCostInput& input, const KinematicModel& model,
                         const std::vector<Pose>& link_poses);

// |q (+) dq - reference|_Q^2 with the orientation difference measured in the
// tangent space; Q is the diagonal (length tangent_dim), all entries >= 0.
void assemble_smoothness_cost(const Configuration& q, const Configuration& reference,
                              const VecX& Q, QuadraticModel& out);

// 0.5 * weight * sum_k |p_k(q) - target_k|^2 over model keypoints.
void assemble_keypoint_cost(const KinematicModel& model, const Configuration& q,
                            const std::vector<Pose>& link_poses,
                            const std::vector<int>& keypoints, const PointList& targets,
                            double weight, QuadraticModel& out);

// 0.5 * weight * |log(R_link R_target^T)|^2.
void assemble_orientation_cost(const KinematicModel& model, const std::vector<Pose>& link_poses,
                               int link, const Quat& target, double weight, QuadraticModel& out);

// A point on a link pinned to a world position.
struct PointTarget {
  int link = 0;
  Vec3 offset = Vec3::Zero();  // link-local
  Vec3 target = Vec3::Zero();
};

struct ConstraintInputs {
  const SceneDescription* scene = nullptr;
  const std::vector<ResolvedPair>* pairs = nullptr;
  int frame = 0;
  // Previous frame's solution; velocity rows are emitted only when set.
  const Configuration* q_prev = nullptr;
  double dt = 1.0 / 30.0;
  std::vector<PointTarget> stance;
  std::vector<PointTarget> anchors;
};

void add_joint_limit_rows(const KinematicModel& model, const Configuration& q, ConstraintSet& out);
void add_velocity_limit_rows(const KinematicModel& model, const Configuration& q,
                             const Configuration& q_prev, double dt, ConstraintSet& out);
void add_point_rows(const KinematicModel& model, const Configuration& q,
                    const std::vector<Pose>& link_poses, const std::vector<PointTarget>& points,
                    RowKind kind, ConstraintSet& out);
void add_sdf_rows(const KinematicModel& model, const Configuration& q,
                  const std::vector<Pose>& link_poses, const SceneDescription& scene,
                  const std::vector<ResolvedPair>& pairs, int frame, ConstraintSet& out);

// Row of d(phi)/d(dq) for a resolved pair with the SDF already evaluated.
VecX sdf_jacobian_row(const KinematicModel& model, const Configuration& q,
                      const std::vector<Pose>& link_poses, const ResolvedPair& pair,
                      const SdfResult& sdf);

// SDF rows, joint limit rows, velocity rows (when q_prev is set), three
// equality rows per stance point and three per anchor.
ConstraintSet assemble_constraints(const KinematicModel& model, const Configuration& q,
                                   const std::vector<Pose>& link_poses,
                                   const ConstraintInputs& inputs);

// Joint bounds implied by the limit and velocity rows.
void joint_bounds(const KinematicModel& model, const Configuration* q_prev, double dt, VecX& lo,
                  VecX& hi);

}  // namespace meshret
