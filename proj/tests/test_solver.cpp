#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/error.hpp"
#include "meshret/geometry/interaction_mesh.hpp"
#include "meshret/retarget.hpp"
#include "meshret/solver/assemblers.hpp"
#include "meshret/solver/sequential.hpp"
#include "meshret/solver/subproblem.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <cmath>

using namespace meshret;

namespace {

KinematicModel point_body(std::vector<CollisionPrimitive> cols = {}) {
  Link base;
  base.name = "base";
  base.joint.type = JointType::Floating;
  return KinematicModel("point", {base}, {{"center", 0, Vec3::Zero()}}, std::move(cols));
}

// Planar chain with z axes and unit-x offsets scaled by `len`.
KinematicModel planar_chain(int joints, double len, double limit) {
  std::vector<Link> links(1);
  links[0].name = "base";
  links[0].joint.type = JointType::Floating;
  for (int j = 0; j < joints; ++j) {
    Link l;
    l.name = "l" + std::to_string(j);
    l.parent = j;
    l.origin = make_pose(Vec3(j == 0 ? 0.0 : len, 0, 0), Quat::Identity());
    l.joint = {"j" + std::to_string(j), JointType::Revolute, Vec3::UnitZ(), -limit, limit, -5, 5};
    links.push_back(l);
  }
  return KinematicModel("planar", links, {{"tip", joints, Vec3(len, 0, 0)}}, {});
}

}  // namespace

TEST_CASE("unconstrained and ball-projected quadratics") {
  ConvexSubproblem p(3);
  p.H.setIdentity();
  p.g = VecX::Zero(3);
  p.g[0] = -2.0;
  p.trust_radius = 10.0;
  auto s = solve_subproblem(p);
  CHECK(s.status == SubproblemStatus::Optimal);
  CHECK((s.dq - 2.0 * VecX::Unit(3, 0)).norm() < 1e-8);
  p.trust_radius = 1.0;
  s = solve_subproblem(p);
  CHECK(s.status == SubproblemStatus::Optimal);
  CHECK((s.dq - VecX::Unit(3, 0)).norm() < 1e-7);
  CHECK(s.dq.norm() <= 1.0 + 1e-8);
}

TEST_CASE("equalities beyond the trust region are infeasible") {
  ConvexSubproblem p(2);
  p.H.setIdentity();
  p.A_eq = MatX::Identity(2, 2);
  p.b_eq = VecX::Constant(2, 1.0);
  p.trust_radius = 0.5;
  CHECK(solve_subproblem(p).status == SubproblemStatus::Infeasible);
}

TEST_CASE("subproblem validation") {
  ConvexSubproblem p(2);
  p.H(0, 1) = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  ConvexSubproblem q(2);
  q.trust_radius = 0.0;
  CHECK_THROWS_AS(q.validate(), ValidationError);
}

TEST_CASE("random subproblems match the active-set enumeration oracle") {
  Rng rng(2024);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = oracle::random_problem(rng, 3, rng.index(3), rng.index(2));
    const auto oracle = oracle::enumerate_active_sets(p);
    const auto s = solve_subproblem(p);
    if (!oracle.feasible) {
      CHECK(s.status != SubproblemStatus::Optimal);
      continue;
    }
    ++feasible;
    REQUIRE(s.status == SubproblemStatus::Optimal);
    CHECK(std::abs(s.objective - oracle.objective) <= 1e-6);
    CHECK(s.kkt_residual <= 1e-6);
    CHECK(s.dq.norm() <= p.trust_radius + 1e-8);
    if (p.A_in.rows() > 0) CHECK((p.A_in * s.dq + p.b_in).minCoeff() >= -1e-8);
    if (p.A_eq.rows() > 0) CHECK((p.A_eq * s.dq - p.b_eq).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(feasible > 100);
}

TEST_CASE("sequential solve moves a free base onto its target") {
  const auto m = point_body();
  const Vec3 target(0.05, -0.08, 0.1);
  FrameContext ctx;
  ctx.model = &m;
  ctx.q_warm = m.zero_configuration();
  ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
    assemble_keypoint_cost(m, q, poses, {0}, {target}, 1.0, out);
  };
  const auto r = sequential_solve(ctx);
  CHECK(r.report.iterations <= 3);
  CHECK(r.report.status == SolveStatus::Converged);
  CHECK((r.q.base_position - target).norm() <= 1e-6);
}

TEST_CASE("trust region limits each step") {
  const auto m = point_body();
  const Vec3 target(1.0, 0, 0);
  FrameContext ctx;
  ctx.model = &m;
  ctx.q_warm = m.zero_configuration();
  ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
    assemble_keypoint_cost(m, q, poses, {0}, {target}, 1.0, out);
  };
  SequentialOptions opts;
  opts.trust_radius = 0.2;
  double prev = 1.0;
  int first_done = -1;
  for (int k = 1; k <= 8; ++k) {
    opts.max_iters = k;
    const double d = (sequential_solve(ctx, opts).q.base_position - target).norm();
    CHECK(d <= prev + 1e-12);
    CHECK(prev - d <= 0.2 + 1e-8);
    if (d <= opts.tol_dq && first_done < 0) first_done = k;
    prev = d;
  }
  CHECK(first_done >= 5);
}

TEST_CASE("joint limits bind when the target is out of reach") {
  const double limit = 0.5;
  const auto m = planar_chain(4, 0.3, limit);
  const Vec3 target(-0.1, 0.7, 0.0);
  VecX Q = VecX::Zero(m.tangent_dim());
  Q.head<6>().setConstant(1e8);
  const Configuration anchor = m.zero_configuration();
  FrameContext ctx;
  ctx.model = &m;
  ctx.q_warm = anchor;
  ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
    assemble_keypoint_cost(m, q, poses, {0}, {target}, 1.0, out);
    assemble_smoothness_cost(q, anchor, Q, out);
  };
  ctx.constraints = [&](const Configuration& q, const std::vector<Pose>&) {
    ConstraintSet c(m.tangent_dim());
    add_joint_limit_rows(m, q, c);
    return c;
  };
  SequentialOptions opts;
  opts.max_iters = 60;
  const auto r = sequential_solve(ctx, opts);
  const double solved = (keypoint_positions(m, r.q, {"tip"})[0] - target).norm();

  // Grid search over the joint box with the base fixed.
  const int steps = 40;
  double best = 1e9;
  Eigen::Vector4d best_q;
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; b <= steps; ++b)
      for (int c = 0; c <= steps; ++c)
        for (int d = 0; d <= steps; ++d) {
          const Eigen::Vector4d th = Eigen::Vector4d(a, b, c, d) * (2 * limit / steps) -
                                     Eigen::Vector4d::Constant(limit);
          double ang = 0, x = 0, y = 0;
          for (int k = 0; k < 4; ++k) {
            ang += th[k];
            x += 0.3 * std::cos(ang);
            y += 0.3 * std::sin(ang);
          }
          const double dist = std::hypot(x - target.x(), y - target.y());
          if (dist < best) {
            best = dist;
            best_q = th;
          }
        }
  CHECK(solved <= best + 1e-9);
  for (int k = 0; k < 4; ++k) {
    if (std::abs(std::abs(best_q[k]) - limit) < 1e-12) {
      CHECK(std::abs(std::abs(r.q.joint_angles[k]) - limit) <= 1e-8);
    }
    CHECK(r.q.joint_angles[k] <= limit + 1e-8);
    CHECK(r.q.joint_angles[k] >= -limit - 1e-8);
  }
}

TEST_CASE("objective is non-increasing on a convex problem") {
  const auto m = point_body();
  const Vec3 target(0.7, -0.4, 0.3);
  const VecX Q = VecX::Constant(6, 0.5);
  Configuration ref = m.zero_configuration();
  ref.base_position = Vec3(0.2, 0.2, 0.2);
  FrameContext ctx;
  ctx.model = &m;
  ctx.q_warm = m.zero_configuration();
  ctx.cost = [&](const Configuration& q, const std::vector<Pose>& poses, QuadraticModel& out) {
    assemble_keypoint_cost(m, q, poses, {0}, {target}, 1.0, out);
    assemble_smoothness_cost(q, ref, Q, out);
  };
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 8; ++k) {
    SequentialOptions opts;
    opts.max_iters = k;
    const double obj = sequential_solve(ctx, opts).report.final_objective;
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
}

TEST_CASE("mesh cost assembly") {
  const auto m = testsupport::random_chain(5, 31);
  Rng rng(32);
  const auto q = testsupport::random_configuration(m, rng);
  const auto poses = forward_kinematics(m, q);

  InteractionMesh mesh;
  mesh.vertices.resize(4);
  mesh.vertices[0].kind = VertexKind::Keypoint;
  mesh.vertices[0].index = 0;
  for (int i = 1; i < 4; ++i) mesh.vertices[i].kind = VertexKind::ObjectSample;
  mesh.neighbors = {{1, 2, 3}, {2, 3}, {1, 3}, {1, 2}};
  mesh.weights = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  MeshCostInput in;
  in.mesh = &mesh;
  in.slot_keypoints = {4};
  in.positions = {Vec3::Zero(), Vec3(0.3, 0, 0), Vec3(0, 0.3, 0), Vec3(0, 0, 0.3)};
  in.source_laplacians.assign(4, Vec3::Zero());
  const PointList current = mesh_target_positions(in, m, poses);
  in.source_laplacians = laplacian_coordinates(mesh, current);

  QuadraticModel zero(m.tangent_dim());
  assemble_mesh_cost(in, m, q, poses, zero);
  CHECK(zero.g.norm() < 1e-14);

  in.source_laplacians[0] += Vec3(0.01, 0.02, -0.03);
  QuadraticModel qm(m.tangent_dim());
  assemble_mesh_cost(in, m, q, poses, qm);
  const MatX Jk = keypoint_jacobian(m, q, m.keypoints()[4].name);
  CHECK((qm.H - Jk.transpose() * Jk).norm() < 1e-12);
  const Vec3 r0 = mesh_residuals(in, m, poses)[0];
  CHECK((qm.g - Jk.transpose() * r0).norm() < 1e-12);

  in.slot_keypoints = {-1};
  CHECK_THROWS_AS(assemble_mesh_cost(in, m, q, poses, qm), ValidationError);
}

TEST_CASE("mesh cost gradient matches the energy's directional derivative") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = testsupport::random_chain(6, 40 + s);
    Rng rng(41 + s);
    const auto q = testsupport::random_configuration(m, rng);
    std::vector<std::string> names;
    for (const auto& kp : m.keypoints()) names.push_back(kp.name);
    SceneDescription scene;
    const auto mesh = build_interaction_mesh(m, names, scene, q, 0);
    MeshCostInput in;
    in.mesh = &mesh;
    for (int i = 0; i < static_cast<int>(names.size()); ++i) in.slot_keypoints.push_back(i);
    in.positions.assign(mesh.num_vertices(), Vec3::Zero());
    in.source_laplacians.assign(mesh.num_vertices(), Vec3::Zero());
    PointList src = mesh_target_positions(in, m, forward_kinematics(m, q));
    for (auto& p : src) p += Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    in.source_laplacians = laplacian_coordinates(mesh, src);

    QuadraticModel qm(m.tangent_dim());
    assemble_mesh_cost(in, m, q, forward_kinematics(m, q), qm);
    auto energy = [&](const Configuration& c) {
      return deformation_energy(mesh, src, mesh_target_positions(in, m, forward_kinematics(m, c)));
    };
    VecX d(m.tangent_dim());
    for (int i = 0; i < d.size(); ++i) d[i] = rng.normal();
    const double h = 1e-6;
    const double fd = (energy(apply_increment(q, VecX(h * d))) - energy(apply_increment(q, VecX(-h * d)))) / (2 * h);
    CHECK(std::abs(fd - 2.0 * qm.g.dot(d)) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("smoothness cost") {
  const auto m = testsupport::random_chain(1, 3);
  Configuration a = m.zero_configuration();
  QuadraticModel same(m.tangent_dim());
  assemble_smoothness_cost(a, a, default_smoothness(m), same);
  CHECK(same.g.norm() == 0.0);

  Configuration b = a;
  b.joint_angles[0] = 0.3;
  b.base_position = Vec3(1, 2, 3);
  QuadraticModel none(m.tangent_dim());
  assemble_smoothness_cost(b, a, VecX::Zero(m.tangent_dim()), none);
  CHECK(none.g.norm() == 0.0);
  CHECK(none.H.norm() == 0.0);

  VecX Q = VecX::Zero(m.tangent_dim());
  Q[6] = 2.0;
  QuadraticModel one(m.tangent_dim());
  assemble_smoothness_cost(b, a, Q, one);
  CHECK(one.g[6] == doctest::Approx(1.2).epsilon(1e-14));
  CHECK_THROWS_AS(assemble_smoothness_cost(b, a, VecX::Constant(m.tangent_dim(), -1.0), one),
                  ValidationError);
}

TEST_CASE("constraint blocks") {
  const auto m = testsupport::random_chain(4, 8);
  Rng rng(9);
  const auto q = testsupport::random_configuration(m, rng);
  const auto poses = forward_kinematics(m, q);
  Configuration prev = q;
  ConstraintInputs in;
  in.q_prev = &prev;
  auto c = assemble_constraints(m, q, poses, in);
  CHECK(c.num_inequalities() == 4 * m.num_joints());
  CHECK(c.num_equalities() == 0);
  for (auto k : c.in_kind) CHECK((k == RowKind::JointLimit || k == RowKind::VelocityLimit));

  const auto& kp = m.keypoints()[3];
  in.stance = {{kp.link, kp.offset, poses[kp.link] * kp.offset}};
  c = assemble_constraints(m, q, poses, in);
  REQUIRE(c.num_equalities() == 3);
  CHECK((c.A_eq() - keypoint_jacobian(m, q, kp.name)).norm() < 1e-14);
  CHECK(c.b_eq().norm() < 1e-15);
}

TEST_CASE("one solve removes a sphere-ground penetration") {
  CollisionPrimitive ball{"ball", Shape::sphere(0.1), 0, Pose::Identity()};
  const auto m = point_body({ball});
  SceneDescription scene;
  scene.collision_pairs.push_back({"base", PairTarget::Ground, ""});
  const auto pairs = resolve_collision_pairs(scene, m);
  Configuration q = m.zero_configuration();
  q.base_position = Vec3(0.3, -0.1, 0.05);
  const auto poses = forward_kinematics(m, q);
  ConstraintInputs in;
  in.scene = &scene;
  in.pairs = &pairs;
  const auto cons = assemble_constraints(m, q, poses, in);
  REQUIRE(cons.num_inequalities() == 1);
  CHECK(cons.in_values[0] == doctest::Approx(-0.05).epsilon(1e-12));
  QuadraticModel cost(m.tangent_dim());
  cost.H.setIdentity();
  const auto s = solve_subproblem(make_subproblem(cost, cons, 0.2, false, 0.0));
  REQUIRE(s.status == SubproblemStatus::Optimal);
  const auto q2 = apply_increment(q, s.dq);
  const double phi = evaluate_pair(m, forward_kinematics(m, q2), scene, pairs[0], 0).distance;
  CHECK(phi >= -1e-6);
}
