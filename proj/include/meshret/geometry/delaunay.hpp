#pragma once

#include "meshret/math.hpp"

#include <array>
#include <vector>

namespace meshret {

using Tetrahedron = std::array<int, 4>;

// 3D Delaunay tetrahedralization by incremental Bowyer-Watson insertion.
// Every returned tetrahedron is positively oriented: det[b-a, c-a, d-a] > 0.
// Throws ValidationError for fewer than 4 points, duplicate points or a
// point cloud lying within 1e-9 of a common plane. Clouds with exactly
// cospherical or coplanar subsets that defeat the predicates are retried
// after a deterministic perturbation of at most 1e-5 of the bounding box;
// orientation is then guaranteed for the perturbed cloud only.
std::vector<Tetrahedron> delaunay_tetrahedralize(const PointList& points);

}  // namespace meshret
