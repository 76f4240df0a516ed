#pragma once

#include "meshret/math.hpp"

#include <string>

namespace meshret {

enum class ShapeType { Sphere, Capsule, Box, HalfSpace };

const char* shape_name(ShapeType type);

// Shape parameters in meters. Capsules are aligned with the local z axis and
// `half_length` is the half length of the core segment. A half-space is the
// region below the local xy-plane (outward normal = local +z); it is used for
// the ground and is never attached to a link.
struct Shape {
  ShapeType type = ShapeType::Sphere;
  double radius = 0.0;
  double half_length = 0.0;
  Vec3 half_extents = Vec3::Zero();

  static Shape sphere(double radius);
  static Shape capsule(double radius, double half_length);
  static Shape box(const Vec3& half_extents);
  static Shape half_space();

  double surface_area() const;
  // Throws ValidationError when a parameter is not strictly positive.
  void validate() const;
};

struct CollisionPrimitive {
  std::string name;
  Shape shape;
  int link = -1;  // -1 for static world geometry
  Pose local = Pose::Identity();  // link-relative, or world pose when static
};

// Gradients are taken with respect to a world-frame twist of each pose,
// [dv; dw], where the pose moves as c <- c + dv and R <- exp(dw) R.
struct SdfResult {
  double distance = 0.0;
  Vec3 point_a = Vec3::Zero();  // witness on A
  Vec3 point_b = Vec3::Zero();  // witness on B
  Vec3 normal = Vec3::UnitZ();  // unit direction from A toward B
  Vec6 grad_a = Vec6::Zero();
  Vec6 grad_b = Vec6::Zero();
};

// Signed distance between two posed shapes: positive when separated,
// negative when interpenetrating. Box-box penetration depth uses the minimum
// overlap along the six face normals. Throws ValidationError for half-space
// pairs, which have no finite distance.
SdfResult signed_distance(const Shape& a, const Pose& pose_a, const Shape& b,
                          const Pose& pose_b);

// Signed distance from a point to a shape's surface, negative inside.
double point_signed_distance(const Shape& shape, const Pose& pose, const Vec3& point);

}  // namespace meshret
