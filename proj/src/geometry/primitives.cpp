#include "meshret/geometry/primitives.hpp"

#include "meshret/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace meshret {

const char* shape_name(ShapeType type) {
  switch (type) {
    case ShapeType::Sphere: return "sphere";
    case ShapeType::Capsule: return "capsule";
    case ShapeType::Box: return "box";
    case ShapeType::HalfSpace: return "halfspace";
  }
  return "unknown";
}

Shape Shape::sphere(double radius) {
  Shape s;
  s.type = ShapeType::Sphere;
  s.radius = radius;
  return s;
}

Shape Shape::capsule(double radius, double half_length) {
  Shape s;
  s.type = ShapeType::Capsule;
  s.radius = radius;
  s.half_length = half_length;
  return s;
}

Shape Shape::box(const Vec3& half_extents) {
  Shape s;
  s.type = ShapeType::Box;
  s.half_extents = half_extents;
  return s;
}

Shape Shape::half_space() {
  Shape s;
  s.type = ShapeType::HalfSpace;
  return s;
}

double Shape::surface_area() const {
  constexpr double pi = std::numbers::pi;
  switch (type) {
    case ShapeType::Sphere: return 4.0 * pi * radius * radius;
    case ShapeType::Capsule: return 4.0 * pi * radius * radius + 4.0 * pi * radius * half_length;
    case ShapeType::Box: {
      const Vec3& h = half_extents;
      return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
    }
    case ShapeType::HalfSpace: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

void Shape::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  switch (type) {
    case ShapeType::Sphere:
      if (!positive(radius)) throw ValidationError("sphere radius must be positive");
      break;
    case ShapeType::Capsule:
      if (!positive(radius) || !positive(half_length)) {
        throw ValidationError("capsule radius and half length must be positive");
      }
      break;
    case ShapeType::Box:
      if (!positive(half_extents.x()) || !positive(half_extents.y()) ||
          !positive(half_extents.z())) {
        throw ValidationError("box half extents must be positive");
      }
      break;
    case ShapeType::HalfSpace:
      break;
  }
}

namespace {

// Shapes are handled as a "core" (point, segment, box or plane) inflated by
// a radius. Distances between cores are computed first and the radii are
// subtracted afterwards.
enum class CoreKind { Point = 0, Segment = 1, Box = 2, Plane = 3 };

struct Core {
  CoreKind kind;
  Pose pose;
  Vec3 p0 = Vec3::Zero();  // point, or segment start
  Vec3 p1 = Vec3::Zero();  // segment end
  Vec3 half = Vec3::Zero();
  double radius = 0.0;
};

Core make_core(const Shape& s, const Pose& pose) {
  Core c;
  c.pose = pose;
  switch (s.type) {
    case ShapeType::Sphere:
      c.kind = CoreKind::Point;
      c.p0 = pose.translation();
      c.radius = s.radius;
      break;
    case ShapeType::Capsule: {
      c.kind = CoreKind::Segment;
      const Vec3 axis = pose.linear().col(2);
      c.p0 = pose.translation() - s.half_length * axis;
      c.p1 = pose.translation() + s.half_length * axis;
      c.radius = s.radius;
      break;
    }
    case ShapeType::Box:
      c.kind = CoreKind::Box;
      c.half = s.half_extents;
      break;
    case ShapeType::HalfSpace:
      c.kind = CoreKind::Plane;
      break;
  }
  return c;
}

// Result between cores; normal points from A toward B.
struct CoreResult {
  double distance = 0.0;
  Vec3 pa = Vec3::Zero();
  Vec3 pb = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();
  // Set when the normal is attached to one body's frame (box-box overlap).
  int normal_owner = -1;  // -1 none, 0 A, 1 B
};

Vec3 safe_direction(const Vec3& d, const Vec3& fallback) {
  const double len = d.norm();
  if (len > 1e-12) return d / len;
  return fallback;
}

struct BoxQuery {
  double sdf;
  Vec3 closest;  // world point on the box surface
  Vec3 outward;  // world unit normal, gradient of the box sdf
};

BoxQuery box_query(const Core& box, const Vec3& world_point) {
  const Mat3 R = box.pose.linear();
  const Vec3 p = R.transpose() * (world_point - box.pose.translation());
  const Vec3& h = box.half;
  const Vec3 q = p.cwiseAbs() - h;
  BoxQuery out;
  if (q.maxCoeff() > 0.0) {
    const Vec3 clamped = p.cwiseMax(-h).cwiseMin(h);
    const Vec3 diff = p - clamped;
    out.sdf = diff.norm();
    out.closest = box.pose * clamped;
    out.outward = R * (diff / out.sdf);
  } else {
    int axis = 0;
    for (int i = 1; i < 3; ++i) {
      if (q[i] > q[axis]) axis = i;
    }
    const double sign = p[axis] < 0.0 ? -1.0 : 1.0;
    Vec3 local = p;
    local[axis] = sign * h[axis];
    out.sdf = q[axis];
    out.closest = box.pose * local;
    out.outward = sign * R.col(axis);
  }
  return out;
}

std::array<Vec3, 8> box_vertices(const Core& box) {
  std::array<Vec3, 8> v;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? box.half.x() : -box.half.x(), (i & 2) ? box.half.y() : -box.half.y(),
                     (i & 4) ? box.half.z() : -box.half.z());
    v[i] = box.pose * local;
  }
  return v;
}

std::array<std::array<int, 2>, 12> box_edges() {
  std::array<std::array<int, 2>, 12> e{};
  int k = 0;
  for (int i = 0; i < 8; ++i) {
    for (int bit = 1; bit < 8; bit <<= 1) {
      if (!(i & bit)) e[k++] = {i, i | bit};
    }
  }
  return e;
}

// Closest points between segments [p1,q1] and [p2,q2].
void closest_segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                             Vec3& c1, Vec3& c2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double eps = 1e-18;
  double s = 0.0;
  double t = 0.0;
  if (a <= eps && e <= eps) {
    c1 = p1;
    c2 = p2;
    return;
  }
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 1e-14 * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + s * d1;
  c2 = p2 + t * d2;
}

CoreResult point_point(const Vec3& a, const Vec3& b) {
  CoreResult r;
  r.pa = a;
  r.pb = b;
  r.distance = (b - a).norm();
  r.n = safe_direction(b - a, Vec3::UnitZ());
  return r;
}

CoreResult point_box(const Vec3& a, const Core& box) {
  const BoxQuery bq = box_query(box, a);
  CoreResult r;
  r.distance = bq.sdf;
  r.pa = a;
  r.pb = bq.closest;
  r.n = -bq.outward;
  return r;
}

CoreResult point_plane(const Vec3& a, const Core& plane) {
  const Vec3 nh = plane.pose.linear().col(2);
  const double z = nh.dot(a - plane.pose.translation());
  CoreResult r;
  r.distance = z;
  r.pa = a;
  r.pb = a - z * nh;
  r.n = -nh;
  return r;
}

CoreResult segment_box(const Core& seg, const Core& box) {
  const Vec3 d = seg.p1 - seg.p0;
  auto f = [&](double t) { return box_query(box, seg.p0 + t * d).sdf; };
  // The box sdf is convex, so its restriction to the segment is unimodal.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 90 && hi - lo > 1e-13; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  double best_t = 0.0;
  double best = f(0.0);
  const double mid = 0.5 * (lo + hi);
  const double f_mid = f(mid);
  if (f_mid < best) {
    best = f_mid;
    best_t = mid;
  }
  if (f(1.0) < best) best_t = 1.0;
  return point_box(seg.p0 + best_t * d, box);
}

CoreResult segment_plane(const Core& seg, const Core& plane) {
  const CoreResult r0 = point_plane(seg.p0, plane);
  const CoreResult r1 = point_plane(seg.p1, plane);
  return r1.distance < r0.distance ? r1 : r0;
}

CoreResult box_plane(const Core& box, const Core& plane) {
  const auto verts = box_vertices(box);
  CoreResult best = point_plane(verts[0], plane);
  for (int i = 1; i < 8; ++i) {
    CoreResult r = point_plane(verts[i], plane);
    if (r.distance < best.distance) best = r;
  }
  return best;
}

double support_radius(const Core& box, const Vec3& u) {
  const Mat3 R = box.pose.linear();
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += box.half[k] * std::abs(u.dot(R.col(k)));
  return s;
}

// Extreme point of the box in direction u (ties resolved toward +).
Vec3 support_point(const Core& box, const Vec3& u) {
  const Mat3 R = box.pose.linear();
  Vec3 p = box.pose.translation();
  for (int k = 0; k < 3; ++k) {
    const double s = u.dot(R.col(k)) < 0.0 ? -1.0 : 1.0;
    p += s * box.half[k] * R.col(k);
  }
  return p;
}

CoreResult box_box(const Core& a, const Core& b) {
  const Mat3 Ra = a.pose.linear();
  const Mat3 Rb = b.pose.linear();
  const Vec3 delta = b.pose.translation() - a.pose.translation();

  bool separated = false;
  auto separates = [&](const Vec3& axis) {
    return std::abs(axis.dot(delta)) > support_radius(a, axis) + support_radius(b, axis);
  };
  for (int i = 0; i < 3 && !separated; ++i) separated = separates(Ra.col(i)) || separates(Rb.col(i));
  for (int i = 0; i < 3 && !separated; ++i) {
    for (int j = 0; j < 3 && !separated; ++j) {
      const Vec3 axis = Ra.col(i).cross(Rb.col(j));
      if (axis.norm() > 1e-9) separated = separates(axis.normalized());
    }
  }

  if (separated) {
    const auto va = box_vertices(a);
    const auto vb = box_vertices(b);
    CoreResult best;
    best.distance = std::numeric_limits<double>::infinity();
    for (const Vec3& v : va) {
      CoreResult r = point_box(v, b);
      if (r.distance < best.distance) best = r;
    }
    for (const Vec3& v : vb) {
      CoreResult r = point_box(v, a);
      if (r.distance < best.distance) {
        best.distance = r.distance;
        best.pa = r.pb;
        best.pb = r.pa;
        best.n = -r.n;
      }
    }
    const auto edges = box_edges();
    for (const auto& ea : edges) {
      for (const auto& eb : edges) {
        Vec3 ca, cb;
        closest_segment_segment(va[ea[0]], va[ea[1]], vb[eb[0]], vb[eb[1]], ca, cb);
        const double dist = (cb - ca).norm();
        if (dist < best.distance) {
          best.distance = dist;
          best.pa = ca;
          best.pb = cb;
          best.n = safe_direction(cb - ca, Vec3::UnitZ());
        }
      }
    }
    return best;
  }

  // Overlapping: smallest overlap along the six face normals.
  CoreResult best;
  best.distance = -std::numeric_limits<double>::infinity();
  for (int owner = 0; owner < 2; ++owner) {
    const Mat3& R = owner == 0 ? Ra : Rb;
    for (int i = 0; i < 3; ++i) {
      const Vec3 axis = R.col(i);
      const double proj = axis.dot(delta);
      const Vec3 n = proj < 0.0 ? Vec3(-axis) : axis;
      const double d = std::abs(proj) - support_radius(a, n) - support_radius(b, n);
      if (d > best.distance) {
        best.distance = d;
        best.n = n;
        best.pa = support_point(a, n);
        best.pb = support_point(b, -n);
        best.normal_owner = owner;
      }
    }
  }
  return best;
}

CoreResult core_distance(const Core& a, const Core& b) {
  switch (a.kind) {
    case CoreKind::Point:
      switch (b.kind) {
        case CoreKind::Point: return point_point(a.p0, b.p0);
        case CoreKind::Segment: {
          const Vec3 d = b.p1 - b.p0;
          const double t = std::clamp((a.p0 - b.p0).dot(d) / d.squaredNorm(), 0.0, 1.0);
          return point_point(a.p0, b.p0 + t * d);
        }
        case CoreKind::Box: return point_box(a.p0, b);
        case CoreKind::Plane: return point_plane(a.p0, b);
      }
      break;
    case CoreKind::Segment:
      switch (b.kind) {
        case CoreKind::Segment: {
          Vec3 ca, cb;
          closest_segment_segment(a.p0, a.p1, b.p0, b.p1, ca, cb);
          return point_point(ca, cb);
        }
        case CoreKind::Box: return segment_box(a, b);
        case CoreKind::Plane: return segment_plane(a, b);
        default: break;
      }
      break;
    case CoreKind::Box:
      switch (b.kind) {
        case CoreKind::Box: return box_box(a, b);
        case CoreKind::Plane: return box_plane(a, b);
        default: break;
      }
      break;
    case CoreKind::Plane:
      break;
  }
  throw ValidationError("unsupported shape pair");
}

SdfResult swapped(const SdfResult& r) {
  SdfResult s;
  s.distance = r.distance;
  s.point_a = r.point_b;
  s.point_b = r.point_a;
  s.normal = -r.normal;
  s.grad_a = r.grad_b;
  s.grad_b = r.grad_a;
  return s;
}

}  // namespace

SdfResult signed_distance(const Shape& a, const Pose& pose_a, const Shape& b,
                          const Pose& pose_b) {
  if (a.type == ShapeType::HalfSpace && b.type == ShapeType::HalfSpace) {
    throw ValidationError("signed distance between two half-spaces is undefined");
  }
  const Core ca = make_core(a, pose_a);
  const Core cb = make_core(b, pose_b);
  if (static_cast<int>(ca.kind) > static_cast<int>(cb.kind)) {
    return swapped(signed_distance(b, pose_b, a, pose_a));
  }
  const CoreResult r = core_distance(ca, cb);

  SdfResult out;
  out.normal = r.n;
  out.distance = r.distance - ca.radius - cb.radius;
  out.point_a = r.pa + ca.radius * r.n;
  out.point_b = r.pb - cb.radius * r.n;
  const Vec3 c_a = pose_a.translation();
  const Vec3 c_b = pose_b.translation();
  const Vec3& n = r.n;
  out.grad_a.head<3>() = -n;
  out.grad_b.head<3>() = n;
  if (r.normal_owner == 0) {
    out.grad_a.tail<3>() = n.cross(out.point_b - c_a);
    out.grad_b.tail<3>() = (out.point_b - c_b).cross(n);
  } else if (r.normal_owner == 1) {
    out.grad_a.tail<3>() = -(out.point_a - c_a).cross(n);
    out.grad_b.tail<3>() = n.cross(c_b - out.point_a);
  } else {
    out.grad_a.tail<3>() = -(out.point_a - c_a).cross(n);
    out.grad_b.tail<3>() = (out.point_b - c_b).cross(n);
  }
  return out;
}

double point_signed_distance(const Shape& shape, const Pose& pose, const Vec3& point) {
  const Core c = make_core(shape, pose);
  switch (c.kind) {
    case CoreKind::Point: return (point - c.p0).norm() - c.radius;
    case CoreKind::Segment: {
      const Vec3 d = c.p1 - c.p0;
      const double t = std::clamp((point - c.p0).dot(d) / d.squaredNorm(), 0.0, 1.0);
      return (point - (c.p0 + t * d)).norm() - c.radius;
    }
    case CoreKind::Box: return box_query(c, point).sdf;
    case CoreKind::Plane: return point_plane(point, c).distance;
  }
  return 0.0;
}

}  // namespace meshret
