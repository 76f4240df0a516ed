#include "meshret/solver/assemblers.hpp"

#include "meshret/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace meshret {

const char* row_kind_name(RowKind kind) {
  switch (kind) {
    case RowKind::JointLimit: return "joint-limit";
    case RowKind::VelocityLimit: return "velocity-limit";
    case RowKind::Sdf: return "sdf";
    case RowKind::Stance: return "stance";
    case RowKind::Anchor: return "anchor";
    case RowKind::Other: return "other";
  }
  return "other";
}

void ConstraintSet::add_inequality(const VecX& row, double value, RowKind kind) {
  if (row.size() != n) throw ValidationError("constraint row has the wrong dimension");
  in_rows.push_back(row);
  in_values.push_back(value);
  in_kind.push_back(kind);
}

void ConstraintSet::add_equalities(const MatX& rows, const VecX& residual, RowKind kind) {
  if (rows.cols() != n || rows.rows() != residual.size()) {
    throw ValidationError("equality block has the wrong dimension");
  }
  for (int i = 0; i < rows.rows(); ++i) {
    eq_rows.push_back(rows.row(i).transpose());
    eq_residuals.push_back(residual[i]);
    eq_kind.push_back(kind);
  }
}

namespace {

MatX stack(const std::vector<VecX>& rows, int n) {
  MatX A(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(i) = rows[i].transpose();
  return A;
}

VecX to_vec(const std::vector<double>& v) {
  return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

MatX ConstraintSet::A_in() const { return stack(in_rows, n); }
VecX ConstraintSet::b_in() const { return to_vec(in_values); }
MatX ConstraintSet::A_eq() const { return stack(eq_rows, n); }
VecX ConstraintSet::b_eq() const { return to_vec(eq_residuals); }

double ConstraintSet::max_violation() const {
  double v = 0.0;
  for (double b : in_values) v = std::max(v, -b);
  for (double b : eq_residuals) v = std::max(v, std::abs(b));
  return v;
}

double ConstraintSet::min_value(RowKind kind) const {
  double v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < num_inequalities(); ++i) {
    if (in_kind[i] == kind) v = std::min(v, in_values[i]);
  }
  return v;
}

double ConstraintSet::max_residual(RowKind kind) const {
  double v = 0.0;
  for (int i = 0; i < num_equalities(); ++i) {
    if (eq_kind[i] == kind) v = std::max(v, std::abs(eq_residuals[i]));
  }
  return v;
}

namespace {

void check_mesh_input(const MeshCostInput& input) {
  if (input.mesh == nullptr) throw ValidationError("mesh cost has no mesh");
  const int nv = input.mesh->num_vertices();
  if (static_cast<int>(input.positions.size()) != nv ||
      static_cast<int>(input.source_laplacians.size()) != nv) {
    throw ValidationError("mesh cost inputs do not match the vertex count");
  }
  for (const auto& v : input.mesh->vertices) {
    if (v.kind == VertexKind::Keypoint &&
        (v.index < 0 || v.index >= static_cast<int>(input.slot_keypoints.size()) ||
         input.slot_keypoints[v.index] < 0)) {
      throw ValidationError("mesh keypoint vertex '" + v.keypoint +
                            "' does not resolve to a model keypoint");
    }
  }
}

}  // namespace

PointList mesh_target_positions(const MeshCostInput& input, const KinematicModel& model,
                                const std::vector<Pose>& link_poses) {
  check_mesh_input(input);
  PointList pos = input.positions;
  const auto& verts = input.mesh->vertices;
  for (int i = 0; i < input.mesh->num_vertices(); ++i) {
    if (verts[i].kind == VertexKind::Keypoint) {
      pos[i] = keypoint_position(model, link_poses, input.slot_keypoints[verts[i].index]);
    }
  }
  return pos;
}

PointList mesh_residuals(const MeshCostInput& input, const KinematicModel& model,
                         const std::vector<Pose>& link_poses) {
  const PointList pos = mesh_target_positions(input, model, link_poses);
  const Mat3 Rt = input.frame_rotation.transpose();
  PointList r(pos.size());
  for (int i = 0; i < input.mesh->num_vertices(); ++i) {
    r[i] = Rt * laplacian_coordinate(*input.mesh, pos, i) - input.source_laplacians[i];
  }
  return r;
}

void assemble_mesh_cost(const MeshCostInput& input, const KinematicModel& model,
                        const Configuration& q, const std::vector<Pose>& link_poses,
                        QuadraticModel& out, double weight) {
  const InteractionMesh& mesh = *input.mesh;
  const int n = model.tangent_dim();
  if (out.dim() != n) throw ValidationError("mesh cost: quadratic model dimension mismatch");
  const PointList r = mesh_residuals(input, model, link_poses);

  // Jacobian of every mesh vertex position (zero for fixed vertices).
  std::vector<MatX> jv(mesh.num_vertices());
  std::vector<bool> moving(mesh.num_vertices(), false);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const VertexTag& v = mesh.vertices[i];
    if (v.kind != VertexKind::Keypoint) continue;
    const int k = input.slot_keypoints[v.index];
    const Vec3 p = keypoint_position(model, link_poses, k);
    jv[i] = point_jacobian(model, q, link_poses, model.keypoints()[k].link, p);
    moving[i] = true;
  }

  const Mat3 Rt = input.frame_rotation.transpose();
  MatX JL = MatX::Zero(3, n);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    JL.setZero();
    bool any = false;
    if (moving[i]) {
      JL += jv[i];
      any = true;
    }
    const auto& nb = mesh.neighbors[i];
    const auto& w = mesh.weights[i];
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (!moving[nb[k]]) continue;
      JL -= w[k] * jv[nb[k]];
      any = true;
    }
    out.value += 0.5 * weight * r[i].squaredNorm();
    if (!any) continue;
    const MatX J = Rt * JL;
    out.H.noalias() += weight * J.transpose() * J;
    out.g.noalias() += weight * J.transpose() * r[i];
  }
}

void assemble_smoothness_cost(const Configuration& q, const Configuration& reference,
                              const VecX& Q, QuadraticModel& out) {
  const int n = q.tangent_dim();
  if (Q.size() != n || out.dim() != n) {
    throw ValidationError("smoothness weights do not match the increment dimension");
  }
  if ((Q.array() < 0.0).any()) throw ValidationError("smoothness weights must be nonnegative");
  const VecX r = configuration_difference(q, reference);
  MatX J = MatX::Identity(n, n);
  J.block<3, 3>(3, 3) = left_jacobian_inverse(r.segment<3>(3));
  const MatX QJ = Q.asDiagonal() * J;
  out.H.noalias() += 2.0 * J.transpose() * QJ;
  out.g.noalias() += 2.0 * QJ.transpose() * r;
  out.value += r.dot(Q.asDiagonal() * r);
}

void assemble_keypoint_cost(const KinematicModel& model, const Configuration& q,
                            const std::vector<Pose>& link_poses,
                            const std::vector<int>& keypoints, const PointList& targets,
                            double weight, QuadraticModel& out) {
  if (keypoints.size() != targets.size()) {
    throw ValidationError("keypoint cost: one target per keypoint required");
  }
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    const Vec3 p = keypoint_position(model, link_poses, keypoints[k]);
    const MatX J = point_jacobian(model, q, link_poses, model.keypoints()[keypoints[k]].link, p);
    const Vec3 r = p - targets[k];
    out.H.noalias() += weight * J.transpose() * J;
    out.g.noalias() += weight * J.transpose() * r;
    out.value += 0.5 * weight * r.squaredNorm();
  }
}

void assemble_orientation_cost(const KinematicModel& model, const std::vector<Pose>& link_poses,
                               int link, const Quat& target, double weight, QuadraticModel& out) {
  const Quat R(link_poses[link].linear());
  const Vec3 r = quat_log(R * target.conjugate());
  const MatX J = left_jacobian_inverse(r) * angular_jacobian(model, link_poses, link);
  out.H.noalias() += weight * J.transpose() * J;
  out.g.noalias() += weight * J.transpose() * r;
  out.value += 0.5 * weight * r.squaredNorm();
}

void add_joint_limit_rows(const KinematicModel& model, const Configuration& q, ConstraintSet& out) {
  const VecX lo = model.q_min();
  const VecX hi = model.q_max();
  VecX row = VecX::Zero(model.tangent_dim());
  for (int j = 0; j < model.num_joints(); ++j) {
    row.setZero();
    row[6 + j] = 1.0;
    out.add_inequality(row, q.joint_angles[j] - lo[j], RowKind::JointLimit);
    row[6 + j] = -1.0;
    out.add_inequality(row, hi[j] - q.joint_angles[j], RowKind::JointLimit);
  }
}

void add_velocity_limit_rows(const KinematicModel& model, const Configuration& q,
                             const Configuration& q_prev, double dt, ConstraintSet& out) {
  const VecX vlo = model.v_min();
  const VecX vhi = model.v_max();
  VecX row = VecX::Zero(model.tangent_dim());
  for (int j = 0; j < model.num_joints(); ++j) {
    const double d = q.joint_angles[j] - q_prev.joint_angles[j];
    row.setZero();
    row[6 + j] = 1.0;
    out.add_inequality(row, d - vlo[j] * dt, RowKind::VelocityLimit);
    row[6 + j] = -1.0;
    out.add_inequality(row, vhi[j] * dt - d, RowKind::VelocityLimit);
  }
}

void add_point_rows(const KinematicModel& model, const Configuration& q,
                    const std::vector<Pose>& link_poses, const std::vector<PointTarget>& points,
                    RowKind kind, ConstraintSet& out) {
  for (const auto& pt : points) {
    const Vec3 p = link_poses.at(pt.link) * pt.offset;
    out.add_equalities(point_jacobian(model, q, link_poses, pt.link, p), pt.target - p, kind);
  }
}

VecX sdf_jacobian_row(const KinematicModel& model, const Configuration& q,
                      const std::vector<Pose>& link_poses, const ResolvedPair& pair,
                      const SdfResult& sdf) {
  const auto& prims = model.collisions();
  auto twist_row = [&](int prim, const Vec6& grad) {
    const int link = prims[prim].link;
    const Vec3 c = primitive_pose(model, link_poses, prim).translation();
    const MatX Jv = point_jacobian(model, q, link_poses, link, c);
    const MatX Jw = angular_jacobian(model, link_poses, link);
    return VecX(Jv.transpose() * grad.head<3>() + Jw.transpose() * grad.tail<3>());
  };
  VecX row = twist_row(pair.robot_primitive, sdf.grad_a);
  if (pair.target == PairTarget::RobotLink) row += twist_row(pair.target_index, sdf.grad_b);
  return row;
}

void add_sdf_rows(const KinematicModel& model, const Configuration& q,
                  const std::vector<Pose>& link_poses, const SceneDescription& scene,
                  const std::vector<ResolvedPair>& pairs, int frame, ConstraintSet& out) {
  for (const auto& pair : pairs) {
    const SdfResult sdf = evaluate_pair(model, link_poses, scene, pair, frame);
    out.add_inequality(sdf_jacobian_row(model, q, link_poses, pair, sdf), sdf.distance,
                       RowKind::Sdf);
  }
}

ConstraintSet assemble_constraints(const KinematicModel& model, const Configuration& q,
                                   const std::vector<Pose>& link_poses,
                                   const ConstraintInputs& inputs) {
  ConstraintSet out(model.tangent_dim());
  if (inputs.scene != nullptr && inputs.pairs != nullptr) {
    add_sdf_rows(model, q, link_poses, *inputs.scene, *inputs.pairs, inputs.frame, out);
  }
  add_joint_limit_rows(model, q, out);
  if (inputs.q_prev != nullptr) add_velocity_limit_rows(model, q, *inputs.q_prev, inputs.dt, out);
  add_point_rows(model, q, link_poses, inputs.stance, RowKind::Stance, out);
  add_point_rows(model, q, link_poses, inputs.anchors, RowKind::Anchor, out);
  return out;
}

void joint_bounds(const KinematicModel& model, const Configuration* q_prev, double dt, VecX& lo,
                  VecX& hi) {
  lo = model.q_min();
  hi = model.q_max();
  if (q_prev == nullptr) return;
  lo = lo.cwiseMax(q_prev->joint_angles + model.v_min() * dt);
  hi = hi.cwiseMin(q_prev->joint_angles + model.v_max() * dt);
  // A previous frame outside the limits leaves an empty interval; fall back
  // to the position limits' nearest point.
  for (int j = 0; j < lo.size(); ++j) {
    if (lo[j] > hi[j]) lo[j] = hi[j] = std::clamp(q_prev->joint_angles[j], model.q_min()[j],
                                                  model.q_max()[j]);
  }
}

}  // namespace meshret
