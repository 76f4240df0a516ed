#pragma once

#include "meshret/geometry/primitives.hpp"

#include <array>
#include <cstdint>

namespace meshret {

// Small deterministic generator: draws are identical on every platform for
// a given seed (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int index(int n);                      // [0, n)
  double normal();

 private:
  std::uint64_t state_[4];
};

// Number of samples drawn for a surface of the given area.
int sample_count(double area, double density);

// Samples on a box surface in unit coordinates: each point u has one
// coordinate equal to +-1 and the others in [-1, 1]; the local point is
// u.cwiseProduct(half_extents). Faces are chosen in proportion to area.
PointList sample_box_unit(const Vec3& half_extents, double density, std::uint64_t seed);

// Samples in the primitive's local frame. Throws ValidationError for
// half-spaces and nonpositive densities.
PointList sample_surface(const CollisionPrimitive& primitive, double density,
                         std::uint64_t seed);

// Regular grid at height z covering bounds = {xmin, ymin, xmax, ymax}; the
// first point is the (xmin, ymin) corner.
PointList ground_grid(const std::array<double, 4>& bounds, double spacing, double z = 0.0);

}  // namespace meshret
