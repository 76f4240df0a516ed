#include "meshret/geometry/sampling.hpp"

#include "meshret/error.hpp"

#include <cmath>
#include <numbers>

namespace meshret {

namespace {

std::uint64_t splitmix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix(s);
}

double Rng::uniform() {
  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return static_cast<double>(result >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::index(int n) {
  const int i = static_cast<int>(uniform() * n);
  return i < n ? i : n - 1;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int sample_count(double area, double density) {
  if (!(density > 0.0)) throw ValidationError("sampling density must be positive");
  return std::max(1, static_cast<int>(std::lround(area * density)));
}

PointList sample_box_unit(const Vec3& half_extents, double density, std::uint64_t seed) {
  Shape::box(half_extents).validate();
  const Vec3& h = half_extents;
  const double area = 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
  const int count = sample_count(area, density);
  // Face pairs normal to x, y, z.
  const double w[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
  const double total = w[0] + w[1] + w[2];
  Rng rng(seed);
  PointList out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    const int axis = pick < w[0] ? 0 : (pick < w[0] + w[1] ? 1 : 2);
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Vec3 u;
    for (int k = 0; k < 3; ++k) u[k] = rng.uniform(-1.0, 1.0);
    u[axis] = side;
    out.push_back(u);
  }
  return out;
}

namespace {

Vec3 unit_sphere_point(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

}  // namespace

PointList sample_surface(const CollisionPrimitive& primitive, double density,
                         std::uint64_t seed) {
  const Shape& s = primitive.shape;
  if (s.type == ShapeType::HalfSpace) {
    throw ValidationError("cannot sample the surface of a half-space");
  }
  s.validate();
  if (s.type == ShapeType::Box) {
    PointList pts = sample_box_unit(s.half_extents, density, seed);
    for (auto& p : pts) p = p.cwiseProduct(s.half_extents);
    return pts;
  }
  const int count = sample_count(s.surface_area(), density);
  Rng rng(seed);
  PointList out;
  out.reserve(count);
  if (s.type == ShapeType::Sphere) {
    for (int i = 0; i < count; ++i) out.push_back(s.radius * unit_sphere_point(rng));
    return out;
  }
  const double cylinder = 4.0 * std::numbers::pi * s.radius * s.half_length;
  const double caps = 4.0 * std::numbers::pi * s.radius * s.radius;
  for (int i = 0; i < count; ++i) {
    if (rng.uniform() * (cylinder + caps) < cylinder) {
      const double z = rng.uniform(-s.half_length, s.half_length);
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      out.emplace_back(s.radius * std::cos(phi), s.radius * std::sin(phi), z);
    } else {
      Vec3 p = s.radius * unit_sphere_point(rng);
      p.z() += p.z() >= 0.0 ? s.half_length : -s.half_length;
      out.push_back(p);
    }
  }
  return out;
}

PointList ground_grid(const std::array<double, 4>& bounds, double spacing, double z) {
  if (!(spacing > 0.0)) throw ValidationError("ground grid spacing must be positive");
  const double xmin = bounds[0], ymin = bounds[1], xmax = bounds[2], ymax = bounds[3];
  if (xmax < xmin || ymax < ymin) throw ValidationError("ground grid bounds are inverted");
  const int nx = static_cast<int>(std::floor((xmax - xmin) / spacing + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((ymax - ymin) / spacing + 1e-9)) + 1;
  PointList out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) out.emplace_back(xmin + i * spacing, ymin + j * spacing, z);
  }
  return out;
}

}  // namespace meshret
