#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/error.hpp"
#include "meshret/fixtures.hpp"
#include "meshret/geometry/delaunay.hpp"
#include "meshret/geometry/interaction_mesh.hpp"
#include "meshret/geometry/primitives.hpp"
#include "meshret/geometry/sampling.hpp"
#include "meshret/geometry/scene.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <set>

using namespace meshret;

namespace {

double orientation(const PointList& p, const Tetrahedron& t) {
  Mat3 m;
  m.col(0) = p[t[1]] - p[t[0]];
  m.col(1) = p[t[2]] - p[t[0]];
  m.col(2) = p[t[3]] - p[t[0]];
  return m.determinant();
}

PointList random_cloud(int n, std::uint64_t seed) {
  Rng rng(seed);
  PointList pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  return pts;
}

double tet_volume(const PointList& p, const Tetrahedron& t) { return std::abs(orientation(p, t)) / 6.0; }

PointList regular_tetrahedron() {
  return {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
}

// Closest point on a posed box by clamping in the local frame.
double point_box_distance(const Vec3& half, const Pose& pose, const Vec3& p) {
  const Vec3 local = pose.inverse() * p;
  const Vec3 clamped = local.cwiseMax(-half).cwiseMin(half);
  return (local - clamped).norm();
}

}  // namespace

TEST_CASE("delaunay of a regular tetrahedron") {
  const auto pts = regular_tetrahedron();
  const auto tets = delaunay_tetrahedralize(pts);
  REQUIRE(tets.size() == 1);
  CHECK(orientation(pts, tets[0]) > 0);
}

TEST_CASE("delaunay of a tetrahedron plus centroid") {
  auto pts = regular_tetrahedron();
  pts.push_back(Vec3::Zero());
  const auto tets = delaunay_tetrahedralize(pts);
  REQUIRE(tets.size() == 4);
  double vol = 0;
  for (const auto& t : tets) {
    CHECK(std::find(t.begin(), t.end(), 4) != t.end());
    CHECK(oracle::empty_circumsphere(pts, t, 1e-9));
    vol += tet_volume(pts, t);
  }
  CHECK(vol == doctest::Approx(tet_volume(pts, {0, 1, 2, 3})).epsilon(1e-12));
}

TEST_CASE("delaunay of random clouds passes the empty-circumsphere check") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto pts = random_cloud(30, seed);
    const auto tets = delaunay_tetrahedralize(pts);
    REQUIRE(!tets.empty());
    std::set<int> used;
    for (const auto& t : tets) {
      CHECK(orientation(pts, t) > 0);
      CHECK(oracle::empty_circumsphere(pts, t, 1e-9));
      used.insert(t.begin(), t.end());
    }
    CHECK(used.size() == pts.size());
  }
}

TEST_CASE("delaunay rejects degenerate input") {
  CHECK_THROWS_AS(delaunay_tetrahedralize({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}), ValidationError);
  CHECK_THROWS_AS(delaunay_tetrahedralize({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0),
                                           Vec3(0.5, 0.2, 0)}),
                  ValidationError);
  CHECK_THROWS_AS(delaunay_tetrahedralize({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
                                           Vec3(1, 0, 0)}),
                  ValidationError);
}

TEST_CASE("delaunay on a cospherical lattice still returns a valid mesh") {
  PointList pts;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) pts.emplace_back(i, j, k);
  const auto tets = delaunay_tetrahedralize(pts);
  double vol = 0;
  for (const auto& t : tets) vol += tet_volume(pts, t);
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("mesh from four keypoints") {
  SceneDescription scene;
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto mesh = build_interaction_mesh(names, regular_tetrahedron(), scene, 0);
  CHECK(mesh.num_vertices() == 4);
  CHECK(mesh.tetrahedra.size() == 1);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(mesh.neighbors[i].size() == 3);
    for (double w : mesh.weights[i]) CHECK(w == doctest::Approx(1.0 / 3.0));
    CHECK(mesh.keypoint_vertex(i) >= 0);
  }
}

TEST_CASE("object sample count scales with density") {
  SceneDescription scene;
  scene.task = TaskKind::RobotObject;
  SceneObject box;
  box.id = "box";
  box.half_extents = Vec3(0.2, 0.15, 0.1);
  box.track = {make_pose(Vec3(0.5, 0, 0.5), Quat::Identity())};
  scene.objects.push_back(box);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const PointList kp{Vec3(0, 0, 0), Vec3(0, 0.3, 0.1), Vec3(0.1, 0, 1), Vec3(-0.2, -0.2, 0.5)};
  auto count_objects = [&](double density) {
    MeshOptions o;
    o.object_density = density;
    const auto mesh = build_interaction_mesh(names, kp, scene, 0, o);
    int n = 0;
    for (const auto& v : mesh.vertices) n += v.kind == VertexKind::ObjectSample;
    return n;
  };
  const int n1 = count_objects(60.0);
  const int n2 = count_objects(120.0);
  CHECK(n1 > 0);
  const double ratio = static_cast<double>(n2) / n1;
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.2);
}

TEST_CASE("keypoints near the box share edges with object samples") {
  const auto fx = box_pickup_fixture();
  const auto src = scale_source(fx.source, fx.model.height());
  const auto scene = source_scene(src, fx.scene);
  const int t = 120;
  const auto mesh = build_interaction_mesh(src.keypoint_names, src.frames[t], scene, t, fx.options.mesh);
  const auto positions = mesh_vertex_positions(mesh, src.frames[t], scene, t);
  const auto& obj = scene.objects[0];
  int checked = 0;
  for (int k = 0; k < src.num_keypoints(); ++k) {
    const double d = point_signed_distance(Shape::box(obj.half_extents), obj.track[t], src.frames[t][k]);
    if (d > 0.10) continue;
    const int v = mesh.keypoint_vertex(k);
    bool object_neighbor = false;
    for (int j : mesh.neighbors[v]) object_neighbor |= mesh.vertices[j].kind == VertexKind::ObjectSample;
    CHECK_MESSAGE(object_neighbor, src.keypoint_names[k]);
    ++checked;
  }
  CHECK(checked >= 2);
  CHECK(positions.size() == mesh.vertices.size());
}

TEST_CASE("laplacian coordinates") {
  InteractionMesh mesh;
  mesh.vertices.resize(3);
  mesh.neighbors = {{1, 2}, {0}, {0}};
  mesh.weights = {{0.5, 0.5}, {1.0}, {1.0}};
  const PointList p{Vec3(1, 1, 0), Vec3(0, 0, 0), Vec3(2, 0, 0)};
  CHECK((laplacian_coordinate(mesh, p, 0) - Vec3(0, 1, 0)).norm() < 1e-15);
  const PointList centred{Vec3(1, 0, 0), Vec3(0, 0, 0), Vec3(2, 0, 0)};
  CHECK(laplacian_coordinate(mesh, centred, 0).norm() < 1e-15);
  CHECK_THROWS_AS(laplacian_coordinate(mesh, p, 3), ValidationError);
}

TEST_CASE("laplacians are translation invariant and energy is a direct sum") {
  const auto pts = random_cloud(40, 77);
  std::vector<std::string> names;
  for (int i = 0; i < 40; ++i) names.push_back("k" + std::to_string(i));
  SceneDescription scene;
  const auto mesh = build_interaction_mesh(names, pts, scene, 0);
  const Vec3 shift(3.0, -2.0, 0.7);
  PointList moved = pts;
  for (auto& p : moved) p += shift;
  const auto la = laplacian_coordinates(mesh, pts);
  const auto lb = laplacian_coordinates(mesh, moved);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK((la[i] - lb[i]).norm() < 1e-12);
  CHECK(deformation_energy(mesh, pts, pts) == 0.0);
  CHECK(deformation_energy(mesh, pts, moved) < 1e-24);

  PointList bent = pts;
  bent[7] += Vec3(0.01, -0.02, 0.03);
  double direct = 0;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    Vec3 ls = pts[i], lt = bent[i];
    for (std::size_t k = 0; k < mesh.neighbors[i].size(); ++k) {
      ls -= mesh.weights[i][k] * pts[mesh.neighbors[i][k]];
      lt -= mesh.weights[i][k] * bent[mesh.neighbors[i][k]];
    }
    direct += (ls - lt).squaredNorm();
  }
  CHECK(deformation_energy(mesh, pts, bent) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(deformation_energy(mesh, pts, bent) > 0.0);
  CHECK_THROWS_AS(deformation_energy(mesh, pts, PointList(pts.begin(), pts.end() - 1)), ValidationError);

  for (int i = 0; i < mesh.num_vertices(); ++i) {
    double s = 0;
    for (double w : mesh.weights[i]) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::is_sorted(mesh.neighbors[i].begin(), mesh.neighbors[i].end()));
  }
}

TEST_CASE("analytic signed distances") {
  const auto s = Shape::sphere(1.0);
  const auto r = signed_distance(s, make_pose(Vec3::Zero(), Quat::Identity()), s,
                                 make_pose(Vec3(3, 0, 0), Quat::Identity()));
  CHECK(r.distance == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((r.normal - Vec3::UnitX()).norm() < 1e-14);

  const auto g = signed_distance(Shape::sphere(0.1), make_pose(Vec3(0.4, 0.2, 0.05), Quat::Identity()),
                                 Shape::half_space(), Pose::Identity());
  CHECK(g.distance == doctest::Approx(-0.05).epsilon(1e-14));

  const auto b = signed_distance(Shape::sphere(0.1), make_pose(Vec3(0.5, 0, 0), Quat::Identity()),
                                 Shape::box(Vec3(0.2, 0.2, 0.2)), Pose::Identity());
  CHECK(b.distance == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(signed_distance(Shape::half_space(), Pose::Identity(), Shape::half_space(),
                                  Pose::Identity()),
                  ValidationError);
  CHECK_THROWS_AS(Shape::sphere(-1).validate(), ValidationError);
}

TEST_CASE("capsule-box distance matches a dense sampling oracle") {
  Rng rng(91);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 25; ++trial) {
    const Shape cap = Shape::capsule(0.05, 0.15);
    const Vec3 half(0.2, 0.1, 0.15);
    const Pose pc = make_pose(Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)),
                              testsupport::random_quat(rng));
    const Pose pb = make_pose(Vec3::Zero(), testsupport::random_quat(rng));
    const Vec3 p0 = pc * Vec3(0, 0, -0.15), p1 = pc * Vec3(0, 0, 0.15);
    double best = 1e9;
    const int n = 20000;
    for (int i = 0; i <= n; ++i) {
      const Vec3 x = p0 + (p1 - p0) * (static_cast<double>(i) / n);
      best = std::min(best, point_box_distance(half, pb, x));
    }
    if (best < 0.01) continue;
    const double oracle = best - 0.05;
    const auto r = signed_distance(cap, pc, Shape::box(half), pb);
    CHECK(std::abs(r.distance - oracle) <= 1e-3);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("signed distance gradients and symmetry") {
  Rng rng(5);
  const std::vector<Shape> shapes{Shape::sphere(0.1), Shape::capsule(0.06, 0.2),
                                  Shape::box(Vec3(0.15, 0.1, 0.2))};
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Shape& a = shapes[rng.index(3)];
    const Shape& b = shapes[rng.index(3)];
    const Pose pa = make_pose(Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)),
                              testsupport::random_quat(rng));
    const Pose pb = make_pose(Vec3::Zero(), testsupport::random_quat(rng));
    const auto r = signed_distance(a, pa, b, pb);
    const auto s = signed_distance(b, pb, a, pa);
    CHECK(r.distance == doctest::Approx(s.distance).epsilon(1e-12));
    CHECK((r.grad_a - s.grad_b).norm() < 1e-9);
    CHECK((r.grad_b - s.grad_a).norm() < 1e-9);
    if (r.distance < 0.02) continue;  // skip contact and penetration, where the box depth is non-smooth
    const double h = 1e-6;
    Vec6 fd_a, fd_b;
    for (int c = 0; c < 6; ++c) {
      auto moved = [&](const Pose& p, double sign) {
        Vec3 dv = Vec3::Zero(), dw = Vec3::Zero();
        if (c < 3) dv[c] = sign * h; else dw[c - 3] = sign * h;
        return make_pose(p.translation() + dv, quat_exp(dw) * Quat(p.linear()));
      };
      fd_a[c] = (signed_distance(a, moved(pa, 1), b, pb).distance -
                 signed_distance(a, moved(pa, -1), b, pb).distance) / (2 * h);
      fd_b[c] = (signed_distance(a, pa, b, moved(pb, 1)).distance -
                 signed_distance(a, pa, b, moved(pb, -1)).distance) / (2 * h);
    }
    CHECK((r.grad_a - fd_a).norm() < 1e-4);
    CHECK((r.grad_b - fd_b).norm() < 1e-4);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("surface sampling") {
  CollisionPrimitive cube{"cube", Shape::box(Vec3(0.5, 0.5, 0.5)), -1, Pose::Identity()};
  const auto pts = sample_surface(cube, 6.0, 3);
  CHECK(pts.size() >= 29);
  CHECK(pts.size() <= 43);
  for (const auto& p : pts) CHECK(std::abs(point_signed_distance(cube.shape, Pose::Identity(), p)) <= 1e-9);
  CHECK(sample_surface(cube, 6.0, 3) == pts);

  CollisionPrimitive ball{"ball", Shape::sphere(0.3), -1, Pose::Identity()};
  const auto sp = sample_surface(ball, 200.0, 8);
  const double expected = 200.0 * 4 * M_PI * 0.09;
  CHECK(std::abs(sp.size() - expected) <= 0.2 * expected);
  for (const auto& p : sp) CHECK(std::abs(p.norm() - 0.3) <= 1e-9);

  CollisionPrimitive cap{"cap", Shape::capsule(0.1, 0.2), -1, Pose::Identity()};
  for (const auto& p : sample_surface(cap, 300.0, 2))
    CHECK(std::abs(point_signed_distance(cap.shape, Pose::Identity(), p)) <= 1e-9);

  CHECK_THROWS_AS(sample_surface(cube, 0.0, 1), ValidationError);
  CollisionPrimitive plane{"plane", Shape::half_space(), -1, Pose::Identity()};
  CHECK_THROWS_AS(sample_surface(plane, 1.0, 1), ValidationError);
}

TEST_CASE("ground grid") {
  CHECK(ground_grid({0, 0, 1, 1}, 0.5).size() == 9);
  const auto one = ground_grid({0.2, 0.3, 0.4, 0.5}, 1.0);
  REQUIRE(one.size() == 1);
  CHECK((one[0] - Vec3(0.2, 0.3, 0)).norm() == 0.0);
  for (const auto& p : ground_grid({-1, -1, 1, 1}, 0.25, 0.3)) CHECK(p.z() == 0.3);
}

TEST_CASE("scene json round trip and validation") {
  const auto fx = box_pickup_fixture();
  const auto again = parse_scene(scene_to_json(fx.scene));
  CHECK(again.task == fx.scene.task);
  REQUIRE(again.objects.size() == fx.scene.objects.size());
  CHECK(again.objects[0].track.size() == fx.scene.objects[0].track.size());
  CHECK(again.collision_pairs.size() == fx.scene.collision_pairs.size());
  CHECK_NOTHROW(validate_scene(again, fx.model, fx.source.num_frames()));
  CHECK_THROWS_AS(validate_scene(again, fx.model, fx.source.num_frames() + 1), ValidationError);
  CHECK_THROWS_AS(parse_scene("{\"collision_pairs\": [{\"robot\": \"x\", \"other\": \"moon\"}]}"), ParseError);
}
