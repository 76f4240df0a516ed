#pragma once

// Independent reference implementations used only by the tests.

#include "meshret/geometry/delaunay.hpp"
#include "meshret/geometry/sampling.hpp"
#include "meshret/math.hpp"
#include "meshret/solver/subproblem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

using meshret::MatX;
using meshret::VecX;

// Minimizes 0.5 w'Hw + g'w over ||w|| <= rho via eigen-decomposition and
// bisection on the secular equation.
inline VecX ball_qp(const MatX& H, const VecX& g, double rho) {
  const int n = static_cast<int>(g.size());
  if (n == 0) return VecX(0);
  Eigen::SelfAdjointEigenSolver<MatX> eig(H);
  const VecX lam = eig.eigenvalues();
  const MatX V = eig.eigenvectors();
  const VecX gam = V.transpose() * g;
  auto w_of = [&](double shift) {
    VecX c(n);
    for (int i = 0; i < n; ++i) c[i] = -gam[i] / (lam[i] + shift);
    return c;
  };
  if (lam.minCoeff() > 1e-12) {
    const VecX c = w_of(0.0);
    if (c.norm() <= rho) return V * c;
  }
  double lo = std::max(0.0, -lam.minCoeff()) + 1e-15;
  double hi = lo + 1.0;
  while (w_of(hi).norm() > rho) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (w_of(mid).norm() > rho) lo = mid; else hi = mid;
  }
  return V * w_of(hi);
}

// Brute-force optimum by enumerating every subset of active inequalities.
struct QpOracleResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  VecX x;
};

inline QpOracleResult enumerate_active_sets(const meshret::ConvexSubproblem& p) {
  const int n = p.dim();
  const int mi = static_cast<int>(p.A_in.rows());
  const int me = static_cast<int>(p.A_eq.rows());
  QpOracleResult best;
  for (int mask = 0; mask < (1 << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i) if (mask & (1 << i)) act.push_back(i);
    const int k = me + static_cast<int>(act.size());
    VecX x0 = VecX::Zero(n);
    MatX N = MatX::Identity(n, n);
    if (k > 0) {
      MatX E(k, n);
      VecX f(k);
      if (me > 0) {
        E.topRows(me) = p.A_eq;
        f.head(me) = p.b_eq;
      }
      for (std::size_t a = 0; a < act.size(); ++a) {
        E.row(me + a) = p.A_in.row(act[a]);
        f[me + a] = -p.b_in[act[a]];
      }
      Eigen::CompleteOrthogonalDecomposition<MatX> cod(E);
      x0 = cod.solve(f);
      if ((E * x0 - f).norm() > 1e-9) continue;
      Eigen::JacobiSVD<MatX> svd(E, Eigen::ComputeFullV);
      const int rank = static_cast<int>(
          (svd.singularValues().array() > 1e-10 * std::max(1.0, svd.singularValues()(0))).count());
      N = svd.matrixV().rightCols(n - rank);
    }
    const double rho2 = p.trust_radius * p.trust_radius - x0.squaredNorm();
    if (rho2 < -1e-12) continue;
    const double rho = std::sqrt(std::max(0.0, rho2));
    VecX x = x0;
    if (N.cols() > 0) {
      const MatX Hr = N.transpose() * p.H * N;
      const VecX gr = N.transpose() * (p.H * x0 + p.g);
      x = x0 + N * ball_qp(Hr, gr, rho);
    }
    bool ok = true;
    if (mi > 0) ok = ((p.A_in * x + p.b_in).array() >= -1e-9).all();
    if (!ok) continue;
    const double obj = 0.5 * x.dot(p.H * x) + p.g.dot(x);
    if (obj < best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.x = x;
    }
  }
  return best;
}

// Random H >= 0, inequality offsets >= 0 (so dq = 0 satisfies them) and
// small equality offsets.
inline meshret::ConvexSubproblem random_problem(meshret::Rng& rng, int n, int mi, int me) {
  meshret::ConvexSubproblem p(n);
  MatX B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = rng.normal();
  p.H = B * B.transpose() * rng.uniform(0.0, 1.0);
  if (rng.uniform() < 0.3) p.H.setZero();
  for (int i = 0; i < n; ++i) p.g[i] = 3.0 * rng.normal();
  p.A_in.resize(mi, n);
  p.b_in.resize(mi);
  for (int r = 0; r < mi; ++r) {
    for (int c = 0; c < n; ++c) p.A_in(r, c) = rng.normal();
    p.b_in[r] = rng.uniform(0.0, 0.5);
  }
  p.A_eq.resize(me, n);
  p.b_eq.resize(me);
  for (int r = 0; r < me; ++r) {
    for (int c = 0; c < n; ++c) p.A_eq(r, c) = rng.normal();
    p.b_eq[r] = rng.uniform(-0.1, 0.1);
  }
  p.trust_radius = rng.uniform(0.05, 2.0);
  return p;
}

// Circumcenter from the 3x3 linear system 2(b-a).c = |b|^2 - |a|^2 etc.
inline bool empty_circumsphere(const meshret::PointList& pts, const meshret::Tetrahedron& t, double tol) {
  using meshret::Mat3;
  using meshret::Vec3;
  const Vec3& a = pts[t[0]];
  Mat3 A;
  Vec3 rhs;
  for (int k = 0; k < 3; ++k) {
    const Vec3& b = pts[t[k + 1]];
    A.row(k) = 2.0 * (b - a).transpose();
    rhs[k] = b.squaredNorm() - a.squaredNorm();
  }
  const Vec3 c = A.fullPivLu().solve(rhs);
  const double r = (a - c).norm();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::find(t.begin(), t.end(), static_cast<int>(i)) != t.end()) continue;
    if ((pts[i] - c).norm() < r - tol) return false;
  }
  return true;
}

}  // namespace oracle
