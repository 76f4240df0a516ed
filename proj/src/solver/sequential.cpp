#include "meshret/solver/sequential.hpp"

#include "meshret/error.hpp"

#include <cmath>
#include <limits>

namespace meshret {

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::InfeasibleSubproblem: return "infeasible-subproblem";
  }
  return "max-iterations";
}

SolveStatus parse_solve_status(std::string_view name) {
  if (name == "converged") return SolveStatus::Converged;
  if (name == "max-iterations") return SolveStatus::MaxIterations;
  if (name == "infeasible-subproblem") return SolveStatus::InfeasibleSubproblem;
  throw ParseError("unknown solve status '" + std::string(name) + "'");
}

namespace {

bool relaxable(RowKind k) { return k == RowKind::Stance || k == RowKind::Anchor; }

struct Evaluation {
  std::vector<Pose> poses;
  QuadraticModel cost;
  ConstraintSet cons;
};

Evaluation evaluate(const FrameContext& ctx, const Configuration& q) {
  const int n = ctx.model->tangent_dim();
  Evaluation e{forward_kinematics(*ctx.model, q), QuadraticModel(n), ConstraintSet(n)};
  ctx.cost(q, e.poses, e.cost);
  if (ctx.constraints) e.cons = ctx.constraints(q, e.poses);
  return e;
}

bool acceptable(const SubproblemSolution& s, const ConvexSubproblem& p, double kkt_tol) {
  if (s.status == SubproblemStatus::Optimal) return true;
  if (s.status == SubproblemStatus::Infeasible) return false;
  return s.kkt_residual <= kkt_tol * (1.0 + p.g.cwiseAbs().maxCoeff());
}

}  // namespace

ConvexSubproblem make_subproblem(const QuadraticModel& cost, const ConstraintSet& cons,
                                 double trust_radius, bool relax, double relax_weight) {
  const int n = cost.dim();
  ConvexSubproblem p(n);
  p.H = cost.H;
  p.g = cost.g;
  p.trust_radius = trust_radius;
  p.A_in = cons.A_in();
  p.b_in = cons.b_in();
  std::vector<int> kept;
  for (int i = 0; i < cons.num_equalities(); ++i) {
    if (relax && relaxable(cons.eq_kind[i])) {
      const VecX& a = cons.eq_rows[i];
      p.H.noalias() += relax_weight * a * a.transpose();
      p.g.noalias() -= relax_weight * cons.eq_residuals[i] * a;
    } else {
      kept.push_back(i);
    }
  }
  p.A_eq.resize(static_cast<int>(kept.size()), n);
  p.b_eq.resize(static_cast<int>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    p.A_eq.row(k) = cons.eq_rows[kept[k]].transpose();
    p.b_eq[k] = cons.eq_residuals[kept[k]];
  }
  // Guard against round-off asymmetry from the accumulated products.
  p.H = 0.5 * (p.H + p.H.transpose()).eval();
  return p;
}

SequentialResult sequential_solve(const FrameContext& ctx, const SequentialOptions& opts) {
  if (ctx.model == nullptr || !ctx.cost) throw ValidationError("frame context is incomplete");
  if (opts.max_iters < 1) throw ValidationError("max_iters must be at least 1");
  check_dimension(*ctx.model, ctx.q_warm);

  Configuration q = ctx.q_warm;
  if (ctx.joint_lo.size() == q.joint_angles.size() &&
      ctx.joint_hi.size() == q.joint_angles.size()) {
    clamp_joints(q, ctx.joint_lo, ctx.joint_hi);
  }

  SolveReport report;
  bool relaxed = false;
  bool failed = false;
  bool converged = false;
  Evaluation ev = evaluate(ctx, q);
  int it = 0;
  while (it < opts.max_iters) {
    ++it;
    ConvexSubproblem p = make_subproblem(ev.cost, ev.cons, opts.trust_radius, relaxed,
                                         opts.relax_weight);
    SubproblemSolution s = solve_subproblem(p);
    if (!acceptable(s, p, opts.kkt_tol) && !relaxed && opts.relax_on_infeasible &&
        ev.cons.num_equalities() > 0) {
      relaxed = true;
      p = make_subproblem(ev.cost, ev.cons, opts.trust_radius, true, opts.relax_weight);
      s = solve_subproblem(p);
    }
    if (!acceptable(s, p, opts.kkt_tol)) {
      failed = true;
      break;
    }
    if (s.dq.norm() <= opts.tol_dq) {
      converged = true;
      break;
    }
    q = apply_increment(q, s.dq);
    ev = evaluate(ctx, q);
  }

  // Linearization leaves a second-order residual on the equalities; project
  // it away with minimum-norm steps that keep the linearized inequalities.
  if (!failed && !relaxed) {
    for (int r = 0; r < opts.restoration_iters; ++r) {
      double eq_res = 0.0;
      for (double b : ev.cons.eq_residuals) eq_res = std::max(eq_res, std::abs(b));
      if (eq_res <= opts.equality_tol) break;
      QuadraticModel prox(ctx.model->tangent_dim());
      prox.H.setIdentity();
      const ConvexSubproblem p = make_subproblem(prox, ev.cons, opts.trust_radius, false, 0.0);
      const SubproblemSolution s = solve_subproblem(p);
      if (!acceptable(s, p, opts.kkt_tol)) break;
      q = apply_increment(q, s.dq);
      ev = evaluate(ctx, q);
    }
  }

  report.iterations = it;
  report.relaxed = relaxed;
  report.status = failed ? SolveStatus::InfeasibleSubproblem
                         : (converged ? SolveStatus::Converged : SolveStatus::MaxIterations);
  report.final_objective = ev.cost.value;
  report.max_violation = ev.cons.max_violation();
  report.min_signed_distance = ev.cons.min_value(RowKind::Sdf);
  return {q, report};
}

}  // namespace meshret
