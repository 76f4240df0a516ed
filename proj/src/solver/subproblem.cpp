#include "meshret/solver/subproblem.hpp"

#include "meshret/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace meshret {

ConvexSubproblem::ConvexSubproblem(int n)
    : H(MatX::Zero(n, n)),
      g(VecX::Zero(n)),
      A_in(0, n),
      b_in(0),
      A_eq(0, n),
      b_eq(0) {}

void ConvexSubproblem::validate() const {
  const int n = dim();
  if (H.rows() != n || H.cols() != n) throw ValidationError("subproblem: H must be n x n");
  if (A_in.cols() != n || A_in.rows() != b_in.size()) {
    throw ValidationError("subproblem: inequality block sizes are inconsistent");
  }
  if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) {
    throw ValidationError("subproblem: equality block sizes are inconsistent");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw ValidationError("subproblem: H is not symmetric");
  }
  if (!(trust_radius > 0.0)) throw ValidationError("subproblem: trust radius must be positive");
  if (!H.allFinite() || !g.allFinite() || !A_in.allFinite() || !b_in.allFinite() ||
      !A_eq.allFinite() || !b_eq.allFinite()) {
    throw ValidationError("subproblem: non-finite data");
  }
}

const char* subproblem_status_name(SubproblemStatus s) {
  switch (s) {
    case SubproblemStatus::Optimal: return "optimal";
    case SubproblemStatus::Infeasible: return "infeasible";
    case SubproblemStatus::NotConverged: return "not-converged";
  }
  return "unknown";
}

double kkt_residual(const ConvexSubproblem& p, const VecX& dq, const VecX& dual_in,
                    const VecX& dual_eq, const VecX& dual_cone) {
  const double eps = p.trust_radius;
  const int n = p.dim();
  VecX stat = p.H * dq + p.g - dual_cone.tail(n);
  if (p.A_in.rows() > 0) stat -= p.A_in.transpose() * dual_in;
  if (p.A_eq.rows() > 0) stat -= p.A_eq.transpose() * dual_eq;
  double r = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (p.A_eq.rows() > 0) r = std::max(r, (p.A_eq * dq - p.b_eq).cwiseAbs().maxCoeff());
  // Cone block: (eps, dq) and (t, v) both in the second-order cone and
  // orthogonal.
  const double t = dual_cone[0];
  r = std::max({r, dq.norm() - eps, dual_cone.tail(n).norm() - t,
                std::abs(eps * t + dq.dot(dual_cone.tail(n)))});
  if (p.A_in.rows() > 0) {
    const VecX c = p.A_in * dq + p.b_in;
    for (int i = 0; i < c.size(); ++i) {
      r = std::max({r, -c[i], -dual_in[i], std::abs(dual_in[i] * c[i])});
    }
  }
  return r;
}

namespace {

double objective(const ConvexSubproblem& p, const VecX& x) {
  return 0.5 * x.dot(p.H * x) + p.g.dot(x);
}

// Minimizes 0.5 w'Hw + g'w on the sphere ||w|| = rho (rho > 0). Returns the
// shift lambda >= max(0, -lambda_min) with (H + lambda I) w = -g, or nullopt
// in the hard case.
std::optional<std::pair<VecX, double>> sphere_qp(const MatX& H, const VecX& g, double rho) {
  const int n = static_cast<int>(g.size());
  Eigen::SelfAdjointEigenSolver<MatX> eig(H);
  const VecX lam = eig.eigenvalues();
  const VecX gam = eig.eigenvectors().transpose() * g;
  auto norm_at = [&](double shift) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::pow(gam[i] / (lam[i] + shift), 2);
    return std::sqrt(acc);
  };
  const double lo0 = std::max(0.0, -lam[0]);
  double lo = lo0;
  if (std::abs(gam[0]) < 1e-12 * (1.0 + gam.norm())) return std::nullopt;
  double hi = lo + 1.0 + g.norm() / rho;
  while (norm_at(hi) > rho) hi *= 2.0;
  // Newton on 1/||w(lambda)|| - 1/rho from the right, with bisection as a guard.
  double x = hi;
  for (int it = 0; it < 200; ++it) {
    double nw = 0.0, dnw = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = lam[i] + x;
      nw += gam[i] * gam[i] / (d * d);
      dnw += -2.0 * gam[i] * gam[i] / (d * d * d);
    }
    const double r = std::sqrt(nw);
    if (r > rho) lo = x; else hi = x;
    const double phi = 1.0 / r - 1.0 / rho;
    const double dphi = -0.5 * dnw / (nw * r);
    double next = x - phi / dphi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-16 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  VecX c(n);
  for (int i = 0; i < n; ++i) c[i] = -gam[i] / (lam[i] + x);
  if (x < lo0) return std::nullopt;
  return std::make_pair(VecX(eig.eigenvectors() * c), x);
}

// Re-solves the problem with the given active set held as equalities. Fills
// sol on success and returns false when the active set does not yield a
// KKT point.
bool polish_active_set(const ConvexSubproblem& p, const std::vector<int>& active, bool ball_active,
                       SubproblemSolution& sol) {
  const int n = p.dim();
  const int mi = static_cast<int>(p.A_in.rows());
  const int me = static_cast<int>(p.A_eq.rows());
  const int k = me + static_cast<int>(active.size());
  const double eps = p.trust_radius;

  VecX x0 = VecX::Zero(n);
  MatX N = MatX::Identity(n, n);
  MatX E(k, n);
  if (k > 0) {
    VecX f(k);
    if (me > 0) {
      E.topRows(me) = p.A_eq;
      f.head(me) = p.b_eq;
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      E.row(me + a) = p.A_in.row(active[a]);
      f[me + a] = -p.b_in[active[a]];
    }
    Eigen::JacobiSVD<MatX> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    const int rank = static_cast<int>(svd.rank());
    x0 = svd.solve(f);
    if ((E * x0 - f).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + f.cwiseAbs().maxCoeff())) return false;
    N = svd.matrixV().rightCols(n - rank);
  }
  const double rho2 = eps * eps - x0.squaredNorm();
  if (rho2 < 0.0) return false;
  const MatX Hr = N.transpose() * p.H * N;
  const VecX gr = N.transpose() * (p.H * x0 + p.g);

  VecX x = x0;
  double mu = 0.0;
  if (N.cols() > 0) {
    if (ball_active) {
      if (rho2 <= 0.0) return false;
      const auto w = sphere_qp(Hr, gr, std::sqrt(rho2));
      if (!w) return false;
      x = x0 + N * w->first;
      mu = w->second;
    } else {
      Eigen::LDLT<MatX> ldlt(Hr);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
      const VecX w = ldlt.solve(-gr);
      x = x0 + N * w;
      if (x.norm() > eps) return false;
    }
  } else if (ball_active) {
    return false;
  }

  // Multipliers from stationarity: H x + g + mu x = E' lambda.
  VecX lam = VecX::Zero(k);
  if (k > 0) {
    const VecX r = p.H * x + p.g + mu * x;
    lam = E.transpose().completeOrthogonalDecomposition().solve(r);
  }
  VecX dual_in = VecX::Zero(mi);
  for (std::size_t a = 0; a < active.size(); ++a) dual_in[active[a]] = lam[me + a];
  VecX dual_cone(n + 1);
  dual_cone[0] = mu * eps;
  dual_cone.tail(n) = -mu * x;

  const double res = kkt_residual(p, x, dual_in, me ? VecX(lam.head(me)) : VecX(0), dual_cone);
  if (!(res < sol.kkt_residual)) return false;
  sol.dq = x;
  if (sol.dq.norm() > eps) sol.dq *= eps / sol.dq.norm();
  sol.dual_in = dual_in;
  sol.dual_eq = me ? VecX(lam.head(me)) : VecX(0);
  sol.dual_cone = dual_cone;
  sol.objective = objective(p, sol.dq);
  sol.kkt_residual = res;
  return true;
}

// Cone K = R_+^ml x Q^(nq). Vectors are stored as [linear part; cone part].
struct Cone {
  int ml;
  int nq;

  int size() const { return ml + nq; }
  double degree() const { return ml + 1.0; }

  VecX identity() const {
    VecX e = VecX::Zero(size());
    e.head(ml).setOnes();
    e[ml] = 1.0;
    return e;
  }

  // u0^2 - |u1|^2 for the cone block, floored at a tiny positive value.
  double cone_det(const Eigen::Ref<const VecX>& uq) const {
    const double r = uq.tail(nq - 1).norm();
    return std::max((uq[0] - r) * (uq[0] + r), 1e-300);
  }

  // Jordan product.
  VecX product(const VecX& u, const VecX& v) const {
    VecX w(size());
    w.head(ml) = u.head(ml).cwiseProduct(v.head(ml));
    const auto uq = u.tail(nq);
    const auto vq = v.tail(nq);
    w[ml] = uq.dot(vq);
    w.tail(nq - 1) = uq[0] * vq.tail(nq - 1) + vq[0] * uq.tail(nq - 1);
    return w;
  }

  // Solves u o x = w for x.
  VecX divide(const VecX& u, const VecX& w) const {
    VecX x(size());
    x.head(ml) = w.head(ml).cwiseQuotient(u.head(ml));
    const auto uq = u.tail(nq);
    const auto wq = w.tail(nq);
    const double det = cone_det(uq);
    const double x0 = (uq[0] * wq[0] - uq.tail(nq - 1).dot(wq.tail(nq - 1))) / det;
    x[ml] = x0;
    x.tail(nq - 1) = (wq.tail(nq - 1) - x0 * uq.tail(nq - 1)) / uq[0];
    return x;
  }

  // Largest alpha (capped at cap) keeping u + alpha du in the cone.
  double max_step(const VecX& u, const VecX& du, double cap) const {
    double a_max = cap;
    for (int i = 0; i < ml; ++i) {
      if (du[i] < 0.0) a_max = std::min(a_max, -u[i] / du[i]);
    }
    const auto uq = u.tail(nq);
    const auto dq = du.tail(nq);
    const double a = dq[0] * dq[0] - dq.tail(nq - 1).squaredNorm();
    const double b = 2.0 * (uq[0] * dq[0] - uq.tail(nq - 1).dot(dq.tail(nq - 1)));
    const double c = uq[0] * uq[0] - uq.tail(nq - 1).squaredNorm();
    // f(alpha) = a alpha^2 + b alpha + c, f(0) = c > 0; first positive root.
    double root = std::numeric_limits<double>::infinity();
    if (std::abs(a) < 1e-300) {
      if (b < 0.0) root = -c / b;
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        for (double r : {q / a, c / q}) {
          if (r > 0.0 && r < root) root = r;
        }
      }
    }
    // The first coordinate must stay positive as well.
    if (dq[0] < 0.0) root = std::min(root, -uq[0] / dq[0]);
    return std::min(a_max, root);
  }
};

// Nesterov-Todd scaling W (symmetric, block diagonal) with W z = W^{-1} s.
struct Scaling {
  VecX d;       // linear block: W = diag(d)
  double beta;  // cone block
  VecX w;       // normalized cone scaling point, w0^2 - |w1|^2 = 1

  // Applies W (inverse = false) or W^{-1} to v.
  VecX apply(const Cone& K, const VecX& v, bool inverse) const {
    VecX out(K.size());
    if (inverse) {
      out.head(K.ml) = v.head(K.ml).cwiseQuotient(d);
    } else {
      out.head(K.ml) = v.head(K.ml).cwiseProduct(d);
    }
    const auto vq = v.tail(K.nq);
    const double w0 = w[0];
    const auto w1 = w.tail(K.nq - 1);
    const double sgn = inverse ? -1.0 : 1.0;
    const double f = inverse ? 1.0 / beta : beta;
    const double t = w1.dot(vq.tail(K.nq - 1));
    out[K.ml] = f * (w0 * vq[0] + sgn * t);
    out.tail(K.nq - 1) =
        f * (sgn * vq[0] * w1 + vq.tail(K.nq - 1) + (t / (1.0 + w0)) * w1);
    return out;
  }

  // Dense W^{-2} for the cone block.
  MatX cone_inverse_squared(const Cone& K) const {
    MatX Winv(K.nq, K.nq);
    const double w0 = w[0];
    const VecX w1 = w.tail(K.nq - 1);
    Winv(0, 0) = w0;
    Winv.block(0, 1, 1, K.nq - 1) = -w1.transpose();
    Winv.block(1, 0, K.nq - 1, 1) = -w1;
    Winv.block(1, 1, K.nq - 1, K.nq - 1) =
        MatX::Identity(K.nq - 1, K.nq - 1) + w1 * w1.transpose() / (1.0 + w0);
    Winv /= beta;
    return Winv * Winv;
  }
};

Scaling nt_scaling(const Cone& K, const VecX& s, const VecX& z) {
  Scaling W;
  W.d = (s.head(K.ml).cwiseQuotient(z.head(K.ml))).cwiseSqrt();
  const auto sq = s.tail(K.nq);
  const auto zq = z.tail(K.nq);
  const double sn = std::sqrt(K.cone_det(sq));
  const double zn = std::sqrt(K.cone_det(zq));
  const VecX sb = sq / sn;
  const VecX zb = zq / zn;
  const double gamma = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), 1e-300));
  W.w.resize(K.nq);
  W.w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
  W.w.tail(K.nq - 1) = (sb.tail(K.nq - 1) - zb.tail(K.nq - 1)) / (2.0 * gamma);
  W.beta = std::sqrt(sn / zn);
  return W;
}

}  // namespace

SubproblemSolution solve_subproblem(const ConvexSubproblem& p, const SubproblemOptions& opts) {
  p.validate();
  const int n = p.dim();
  const int mi = static_cast<int>(p.A_in.rows());
  const int me = static_cast<int>(p.A_eq.rows());
  const double eps = p.trust_radius;

  SubproblemSolution sol;
  sol.dq = VecX::Zero(n);
  sol.dual_in = VecX::Zero(mi);
  sol.dual_eq = VecX::Zero(me);
  sol.dual_cone = VecX::Zero(n + 1);

  VecX x = VecX::Zero(n);
  if (me > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(p.A_eq);
    const VecX x_ln = cod.solve(p.b_eq);
    const double resid = (p.A_eq * x_ln - p.b_eq).cwiseAbs().maxCoeff();
    const double norm = x_ln.norm();
    if (resid > 1e-9 * (1.0 + p.b_eq.cwiseAbs().maxCoeff()) || norm > eps * (1.0 + 1e-12)) {
      sol.status = SubproblemStatus::Infeasible;
      sol.dq = norm > eps ? VecX(x_ln * (eps / norm)) : x_ln;
      sol.objective = objective(p, sol.dq);
      sol.dual_cone = VecX::Zero(n + 1);
      sol.kkt_residual = kkt_residual(p, sol.dq, sol.dual_in, sol.dual_eq, sol.dual_cone);
      return sol;
    }
    x = x_ln;
  }

  // Conic form: G x + s = h, s in K, with s = [A_in x + b_in; eps; x].
  const Cone K{mi, n + 1};
  const int m = K.size();
  MatX G = MatX::Zero(m, n);
  VecX h = VecX::Zero(m);
  if (mi > 0) {
    G.topRows(mi) = -p.A_in;
    h.head(mi) = p.b_in;
  }
  G.bottomRows(n) = -MatX::Identity(n, n);
  h[mi] = eps;

  VecX s = h - G * x;
  {
    double shift = -(s[mi] - s.tail(n).norm());
    if (mi > 0) shift = std::max(shift, -s.head(mi).minCoeff());
    if (shift >= -1e-8) s += (1.0 + shift) * K.identity();
  }
  VecX z = K.identity();
  VecX y = VecX::Zero(me);

  const double scale_x = 1.0 + p.g.cwiseAbs().maxCoeff() + p.H.cwiseAbs().maxCoeff() * eps;
  const double scale_y = 1.0 + (me ? p.b_eq.cwiseAbs().maxCoeff() : 0.0);
  const double scale_z = 1.0 + h.cwiseAbs().maxCoeff();
  const double tol = opts.tol;

  MatX M(n + me, n + me);
  bool converged = false;
  double best_merit = std::numeric_limits<double>::infinity();
  VecX bx = x, by = y, bz = z, bs = s;
  double best_rz = 0.0;
  int stall = 0;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    VecX rx = p.H * x + p.g + G.transpose() * z;
    if (me > 0) rx += p.A_eq.transpose() * y;
    const VecX ry = me > 0 ? VecX(p.A_eq * x - p.b_eq) : VecX(0);
    const VecX rz = G * x + s - h;
    const double gap = s.dot(z);
    const double mu = gap / K.degree();
    const double rz_norm = rz.cwiseAbs().maxCoeff();
    const double rx_norm = rx.cwiseAbs().maxCoeff();
    const double ry_norm = me ? ry.cwiseAbs().maxCoeff() : 0.0;
    const double merit = std::max(
        {rx_norm / scale_x, ry_norm / scale_y, rz_norm / scale_z, std::abs(gap) / scale_z});
    if (!std::isfinite(merit) || z.cwiseAbs().maxCoeff() > 1e14) break;
    if (merit < best_merit) {
      stall = merit < 0.9 * best_merit ? 0 : stall + 1;
      best_merit = merit;
      bx = x;
      by = y;
      bz = z;
      bs = s;
      best_rz = rz_norm;
    } else {
      ++stall;
    }
    if (merit <= tol) {
      converged = true;
      break;
    }
    if (stall >= 6) break;

    const Scaling W = nt_scaling(K, s, z);
    const VecX lambda = W.apply(K, z, false);

    // W^{-2} as a block operator.
    VecX winv2_lin = W.d.cwiseProduct(W.d).cwiseInverse();
    const MatX winv2_cone = W.cone_inverse_squared(K);
    auto winv2 = [&](const VecX& v) {
      VecX out(m);
      out.head(mi) = winv2_lin.head(mi).cwiseProduct(v.head(mi));
      out.tail(K.nq) = winv2_cone * v.tail(K.nq);
      return out;
    };
    MatX Kx = p.H;
    if (mi > 0) {
      Kx.noalias() += p.A_in.transpose() * winv2_lin.asDiagonal() * p.A_in;
    }
    // G_q = [0; -I]: G_q' W^-2 G_q is the trailing block of winv2_cone.
    Kx += winv2_cone.bottomRightCorner(n, n);
    M.setZero();
    M.topLeftCorner(n, n) = Kx;
    if (me > 0) {
      M.topRightCorner(n, me) = p.A_eq.transpose();
      M.bottomLeftCorner(me, n) = p.A_eq;
    }
    Eigen::PartialPivLU<MatX> lu(M);

    // Solves  H dx + G'dz + Aeq'dy = e1,  Aeq dx = e2,  G dx + ds = e3,
    // W^{-1} ds + W dz = e4.
    auto linear_solve = [&](const VecX& e1, const VecX& e2, const VecX& e3, const VecX& e4,
                            VecX& dx, VecX& dy, VecX& dz, VecX& ds) {
      const VecX t = W.apply(K, e4, false) - e3;
      VecX rhs(n + me);
      rhs.head(n) = e1 - G.transpose() * winv2(t);
      if (me > 0) rhs.tail(me) = e2;
      const VecX v = lu.solve(rhs);
      dx = v.head(n);
      dy = me > 0 ? VecX(v.tail(me)) : VecX(0);
      dz = winv2(G * dx + t);
      ds = e3 - G * dx;
    };
    auto newton = [&](const VecX& ds_rhs, VecX& dx, VecX& dy, VecX& dz, VecX& ds) {
      const VecX e1 = -rx;
      const VecX e2 = -ry;
      const VecX e3 = -rz;
      const VecX e4 = K.divide(lambda, ds_rhs);
      linear_solve(e1, e2, e3, e4, dx, dy, dz, ds);
    };

    VecX dx, dy, dz, ds;
    const VecX ll = K.product(lambda, lambda);
    newton(-ll, dx, dy, dz, ds);
    const double a_aff = std::min(K.max_step(s, ds, 1.0), K.max_step(z, dz, 1.0));
    const double sigma =
        std::pow(std::clamp((s + a_aff * ds).dot(z + a_aff * dz) / gap, 0.0, 1.0), 3);
    const VecX corr = K.product(W.apply(K, ds, true), W.apply(K, dz, false));
    newton(-ll - corr + sigma * mu * K.identity(), dx, dy, dz, ds);
    const double a_max = std::min(K.max_step(s, ds, 1e300), K.max_step(z, dz, 1e300));
    const double a = std::min(1.0, 0.99 * a_max);
    x += a * dx;
    y += a * dy;
    z += a * dz;
    s += a * ds;
  }

  x = bx;
  const double xn = x.norm();
  if (xn > eps) x *= eps / xn;
  sol.dq = x;
  sol.dual_in = bz.head(mi);
  sol.dual_eq = -by;
  sol.dual_cone = bz.tail(n + 1);
  sol.iterations = it;
  sol.objective = objective(p, x);
  sol.kkt_residual = kkt_residual(p, x, sol.dual_in, sol.dual_eq, sol.dual_cone);
  if (best_merit <= 1e-4) {
    std::vector<int> active;
    for (int i = 0; i < mi; ++i) {
      if (bz[i] > bs[i]) active.push_back(i);
    }
    const double slack = bs[mi] - bs.tail(n).norm();
    const bool ball_active = bz[mi] > slack;
    polish_active_set(p, active, ball_active, sol);
  }
  const double kkt_scale = std::max({scale_x, scale_y, scale_z});
  if (converged || sol.kkt_residual <= 1e-9 * kkt_scale) {
    sol.status = SubproblemStatus::Optimal;
  } else if (best_rz > 1e-6 * scale_z || bz.cwiseAbs().maxCoeff() > 1e14) {
    sol.status = SubproblemStatus::Infeasible;
  } else {
    sol.status = SubproblemStatus::NotConverged;
  }
  return sol;
}

}  // namespace meshret
