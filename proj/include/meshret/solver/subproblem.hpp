#pragma once

#include "meshret/math.hpp"

namespace meshret {

// minimize   0.5 dq' H dq + g' dq
// subject to A_in dq + b_in >= 0
//            A_eq dq = b_eq
//            ||dq||_2 <= trust_radius
struct ConvexSubproblem {
  MatX H;
  VecX g;
  MatX A_in;
  VecX b_in;
  MatX A_eq;
  VecX b_eq;
  double trust_radius = 0.2;

  explicit ConvexSubproblem(int n = 0);

  int dim() const { return static_cast<int>(g.size()); }
  // Throws ValidationError on inconsistent sizes, asymmetric H or eps <= 0.
  void validate() const;
};

enum class SubproblemStatus { Optimal, Infeasible, NotConverged };

const char* subproblem_status_name(SubproblemStatus s);

struct SubproblemSolution {
  SubproblemStatus status = SubproblemStatus::NotConverged;
  VecX dq;
  VecX dual_in;      // >= 0, one per inequality row
  VecX dual_eq;      // one per equality row
  VecX dual_cone;    // (t, v) paired with (trust_radius, dq)
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct SubproblemOptions {
  int max_iters = 80;
  double tol = 1e-10;  // scaled residual and duality gap
};

// Primal-dual interior point method for the conic form
//   G dq + s = h,  s in R_+^m x Q^(n+1),
// where the second-order cone block is (trust_radius, dq). Mehrotra
// predictor-corrector steps with Nesterov-Todd scaling.
SubproblemSolution solve_subproblem(const ConvexSubproblem& p, const SubproblemOptions& opts = {});

// max(stationarity, primal infeasibility, dual infeasibility,
// complementarity) at (dq, duals).
double kkt_residual(const ConvexSubproblem& p, const VecX& dq, const VecX& dual_in,
                    const VecX& dual_eq, const VecX& dual_cone);

}  // namespace meshret
