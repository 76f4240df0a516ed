#include "meshret/geometry/delaunay.hpp"

#include "meshret/error.hpp"
#include "meshret/geometry/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace meshret {

namespace {

using Real = long double;
using P3 = Eigen::Matrix<Real, 3, 1>;

Real orient(const P3& a, const P3& b, const P3& c, const P3& d) {
  const P3 u = b - a, v = c - a, w = d - a;
  return u.dot(v.cross(w));
}

// Positive when e lies strictly inside the circumsphere of the positively
// oriented tetrahedron (a, b, c, d).
Real insphere(const P3& a, const P3& b, const P3& c, const P3& d, const P3& e) {
  const P3 ae = a - e, be = b - e, ce = c - e, de = d - e;
  const Real la = ae.squaredNorm(), lb = be.squaredNorm(), lc = ce.squaredNorm(),
             ld = de.squaredNorm();
  Eigen::Matrix<Real, 4, 4> m;
  m << ae.x(), ae.y(), ae.z(), la,
       be.x(), be.y(), be.z(), lb,
       ce.x(), ce.y(), ce.z(), lc,
       de.x(), de.y(), de.z(), ld;
  auto det3 = [&](int r0, int r1, int r2) {
    return m(r0, 0) * (m(r1, 1) * m(r2, 2) - m(r1, 2) * m(r2, 1)) -
           m(r0, 1) * (m(r1, 0) * m(r2, 2) - m(r1, 2) * m(r2, 0)) +
           m(r0, 2) * (m(r1, 0) * m(r2, 1) - m(r1, 1) * m(r2, 0));
  };
  const Real det = -la * det3(1, 2, 3) + lb * det3(0, 2, 3) - lc * det3(0, 1, 3) +
                   ld * det3(0, 1, 2);
  return -det;
}

std::array<int, 3> face_key(const Tetrahedron& t, int opposite) {
  std::array<int, 3> f{};
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    if (i != opposite) f[k++] = t[i];
  }
  std::sort(f.begin(), f.end());
  return f;
}

// Circumcircle test for a point coplanar with triangle (a, b, c).
bool in_circumcircle(const P3& a, const P3& b, const P3& c, const P3& p) {
  const P3 ab = b - a, ac = c - a;
  const P3 n = ab.cross(ac);
  const Real nn = n.squaredNorm();
  if (nn == 0) return false;
  const P3 center = a + (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / (2 * nn);
  return (p - center).squaredNorm() < (a - center).squaredNorm();
}

// Incremental Bowyer-Watson with one symbolic vertex at infinity (index n).
// A cell containing it stands for a hull facet; the facet side it covers is
// the side where replacing the infinite vertex by a point gives a positive
// orientation.
std::optional<std::vector<Tetrahedron>> bowyer_watson(const std::vector<P3>& pts) {
  const int n = static_cast<int>(pts.size());
  const int inf = n;

  // Initial non-degenerate tetrahedron.
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  Real best = 0;
  for (int i = 1; i < n; ++i) {
    const Real d = (pts[i] - pts[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  if (i1 < 0) return std::nullopt;
  best = 0;
  for (int i = 0; i < n; ++i) {
    const Real d = (pts[i1] - pts[i0]).cross(pts[i] - pts[i0]).squaredNorm();
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0) return std::nullopt;
  best = 0;
  for (int i = 0; i < n; ++i) {
    const Real d = std::abs(orient(pts[i0], pts[i1], pts[i2], pts[i]));
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0) return std::nullopt;

  struct Cell {
    Tetrahedron v;
    bool alive;
  };
  std::vector<Cell> cells;
  Tetrahedron root{i0, i1, i2, i3};
  if (orient(pts[i0], pts[i1], pts[i2], pts[i3]) < 0) std::swap(root[2], root[3]);
  cells.push_back({root, true});
  for (int k = 0; k < 4; ++k) {
    Tetrahedron t = root;
    t[k] = inf;
    // Flip so the infinite cell lies on the far side of the facet.
    std::swap(t[(k + 1) % 4], t[(k + 2) % 4]);
    cells.push_back({t, true});
  }

  auto conflicts = [&](const Tetrahedron& v, const P3& p) {
    int slot = -1;
    for (int i = 0; i < 4; ++i) {
      if (v[i] == inf) slot = i;
    }
    if (slot < 0) return insphere(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]], p) > 0;
    P3 q[4];
    for (int i = 0; i < 4; ++i) q[i] = i == slot ? p : pts[v[i]];
    const Real o = orient(q[0], q[1], q[2], q[3]);
    if (o != 0) return o > 0;
    P3 f[3];
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      if (i != slot) f[k++] = pts[v[i]];
    }
    return in_circumcircle(f[0], f[1], f[2], p);
  };

  std::vector<int> cavity;
  std::map<std::array<int, 3>, std::pair<int, int>> faces;  // key -> (count, cell*4+opp)
  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    cavity.clear();
    for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
      if (cells[c].alive && conflicts(cells[c].v, pts[p])) cavity.push_back(c);
    }
    if (cavity.empty()) return std::nullopt;
    faces.clear();
    for (int c : cavity) {
      for (int i = 0; i < 4; ++i) {
        auto [it, inserted] = faces.try_emplace(face_key(cells[c].v, i), 0, c * 4 + i);
        it->second.first += 1;
      }
    }
    for (int c : cavity) cells[c].alive = false;
    for (const auto& [key, entry] : faces) {
      if (entry.first != 1) continue;
      Tetrahedron t = cells[entry.second / 4].v;
      t[entry.second % 4] = p;
      if (std::find(t.begin(), t.end(), inf) == t.end() &&
          !(orient(pts[t[0]], pts[t[1]], pts[t[2]], pts[t[3]]) > 0)) {
        return std::nullopt;
      }
      cells.push_back({t, true});
    }
    if (cells.size() > 8 * static_cast<std::size_t>(n + 16) * 4) {
      std::vector<Cell> packed;
      packed.reserve(cells.size() / 2);
      for (const auto& c : cells) {
        if (c.alive) packed.push_back(c);
      }
      cells.swap(packed);
    }
  }

  std::vector<Tetrahedron> out;
  for (const auto& c : cells) {
    if (!c.alive) continue;
    if (std::find(c.v.begin(), c.v.end(), inf) != c.v.end()) continue;
    out.push_back(c.v);
  }
  return out;
}

bool circumsphere(const P3& a, const P3& b, const P3& c, const P3& d, P3& center, Real& r) {
  Eigen::Matrix<Real, 3, 3> m;
  m.row(0) = (b - a).transpose();
  m.row(1) = (c - a).transpose();
  m.row(2) = (d - a).transpose();
  const P3 rhs(0.5L * (b - a).squaredNorm(), 0.5L * (c - a).squaredNorm(),
               0.5L * (d - a).squaredNorm());
  const Real det = m.determinant();
  if (det == 0) return false;
  const P3 x = m.inverse() * rhs;
  center = a + x;
  r = x.norm();
  return true;
}

bool valid_triangulation(const std::vector<P3>& pts, const std::vector<Tetrahedron>& tets) {
  const int n = static_cast<int>(pts.size());
  if (tets.empty()) return false;
  std::vector<char> used(n, 0);
  std::map<std::array<int, 3>, std::pair<int, int>> faces;
  for (int t = 0; t < static_cast<int>(tets.size()); ++t) {
    const auto& v = tets[t];
    if (!(orient(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]]) > 0)) return false;
    for (int i = 0; i < 4; ++i) {
      used[v[i]] = 1;
      auto [it, inserted] = faces.try_emplace(face_key(v, i), 0, t * 4 + i);
      if (++it->second.first > 2) return false;
    }
  }
  if (std::find(used.begin(), used.end(), 0) != used.end()) return false;

  constexpr Real hull_tol = 1e-12L;
  for (const auto& [key, entry] : faces) {
    if (entry.first != 1) continue;
    Tetrahedron t = tets[entry.second / 4];
    const int slot = entry.second % 4;
    for (int k = 0; k < n; ++k) {
      t[slot] = k;
      if (orient(pts[t[0]], pts[t[1]], pts[t[2]], pts[t[3]]) < -hull_tol) return false;
    }
  }

  constexpr Real sphere_tol = 1e-10L;
  for (const auto& v : tets) {
    P3 center;
    Real r;
    if (!circumsphere(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]], center, r)) return false;
    for (int k = 0; k < n; ++k) {
      if (k == v[0] || k == v[1] || k == v[2] || k == v[3]) continue;
      if ((pts[k] - center).norm() < r - sphere_tol) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Tetrahedron> delaunay_tetrahedralize(const PointList& points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw ValidationError("tetrahedralization needs at least 4 points");

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    if (!p.allFinite()) throw ValidationError("tetrahedralization input is not finite");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double scale = std::max(0.5 * (hi - lo).maxCoeff(), 1e-300);

  std::vector<P3> normalized(n);
  for (int i = 0; i < n; ++i) normalized[i] = ((points[i] - center) / scale).cast<Real>();

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((points[i] - points[j]).norm() <= 1e-12 * scale) {
        throw ValidationError("tetrahedralization input has duplicate points " +
                              std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }

  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 normal = eig.eigenvectors().col(0);
  double off_plane = 0.0;
  for (const auto& p : points) off_plane = std::max(off_plane, std::abs(normal.dot(p - mean)));
  if (off_plane <= 1e-9) {
    throw ValidationError("tetrahedralization input is coplanar");
  }

  for (const double joggle : {0.0, 1e-9, 1e-7, 1e-5}) {
    std::vector<P3> pts = normalized;
    if (joggle > 0.0) {
      Rng rng(0x5eedULL);
      for (auto& p : pts) {
        for (int k = 0; k < 3; ++k) p[k] += static_cast<Real>(joggle * rng.uniform(-1.0, 1.0));
      }
    }
    auto tets = bowyer_watson(pts);
    if (!tets || !valid_triangulation(pts, *tets)) continue;
    std::sort(tets->begin(), tets->end(), [](const Tetrahedron& a, const Tetrahedron& b) {
      Tetrahedron sa = a, sb = b;
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      return sa < sb;
    });
    return *tets;
  }
  throw ValidationError("tetrahedralization failed on a degenerate point cloud");
}

}  // namespace meshret
