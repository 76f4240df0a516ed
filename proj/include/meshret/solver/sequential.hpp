#pragma once

#include "meshret/kinematics.hpp"
#include "meshret/solver/assemblers.hpp"
#include "meshret/solver/subproblem.hpp"

#include <functional>
#include <vector>

namespace meshret {

struct SequentialOptions {
  int max_iters = 10;
  double trust_radius = 0.2;
  double tol_dq = 1e-5;
  double kkt_tol = 1e-6;
  bool relax_on_infeasible = true;
  double relax_weight = 1e4;
  // Equality residual (m) above which extra projection steps run after the
  // main loop.
  double equality_tol = 1e-9;
  int restoration_iters = 5;
};

enum class SolveStatus { Converged, MaxIterations, InfeasibleSubproblem };

const char* solve_status_name(SolveStatus s);
SolveStatus parse_solve_status(std::string_view name);

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double final_objective = 0.0;
  // Largest nonlinear constraint violation at the returned configuration.
  double max_violation = 0.0;
  // Smallest monitored signed distance (+inf without pairs).
  double min_signed_distance = 0.0;
  // Stance or anchor equalities were turned into penalties.
  bool relaxed = false;
};

using CostCallback =
    std::function<void(const Configuration&, const std::vector<Pose>&, QuadraticModel&)>;
using ConstraintCallback =
    std::function<ConstraintSet(const Configuration&, const std::vector<Pose>&)>;

struct FrameContext {
  const KinematicModel* model = nullptr;
  CostCallback cost;
  ConstraintCallback constraints;  // may be empty
  Configuration q_warm;
  // Interval the warm start's joints are clamped into before iterating;
  // empty vectors leave the warm start untouched.
  VecX joint_lo;
  VecX joint_hi;
};

struct SequentialResult {
  Configuration q;
  SolveReport report;
};

// Iterates q <- q (+) dq* with dq* from the convex subproblem linearized at
// q. A step with |dq| <= tol_dq ends the loop without being applied.
SequentialResult sequential_solve(const FrameContext& ctx, const SequentialOptions& opts = {});

// Builds the subproblem for one linearization; relaxed stance and anchor
// rows move into the cost as 0.5 * weight * |a'dq - b|^2.
ConvexSubproblem make_subproblem(const QuadraticModel& cost, const ConstraintSet& cons,
                                 double trust_radius, bool relax, double relax_weight);

}  // namespace meshret
