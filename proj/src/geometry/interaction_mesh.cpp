#include "meshret/geometry/interaction_mesh.hpp"

#include "meshret/error.hpp"
#include "meshret/geometry/sampling.hpp"
#include "meshret/kinematics.hpp"

#include <algorithm>
#include <set>

namespace meshret {

int InteractionMesh::num_keypoints() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(), [](const VertexTag& v) {
    return v.kind == VertexKind::Keypoint;
  }));
}

int InteractionMesh::keypoint_vertex(int slot) const {
  for (int i = 0; i < num_vertices(); ++i) {
    if (vertices[i].kind == VertexKind::Keypoint && vertices[i].index == slot) return i;
  }
  return -1;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + index * 0x94d049bbULL;
}

}  // namespace

InteractionMesh build_interaction_mesh(const std::vector<std::string>& keypoint_names,
                                       const PointList& keypoint_positions,
                                       const SceneDescription& scene, int t,
                                       const MeshOptions& options) {
  if (keypoint_names.size() != keypoint_positions.size()) {
    throw ValidationError("keypoint names and positions differ in length");
  }
  if (!(options.object_density > 0.0) || !(options.env_density > 0.0)) {
    throw ValidationError("sampling densities must be positive");
  }
  InteractionMesh mesh;
  for (int k = 0; k < static_cast<int>(keypoint_names.size()); ++k) {
    VertexTag tag;
    tag.kind = VertexKind::Keypoint;
    tag.index = k;
    tag.keypoint = keypoint_names[k];
    mesh.vertices.push_back(tag);
  }
  for (int o = 0; o < static_cast<int>(scene.objects.size()); ++o) {
    const auto unit = sample_box_unit(scene.objects[o].half_extents, options.object_density,
                                      derive_seed(options.seed, 1, o));
    for (const auto& u : unit) {
      VertexTag tag;
      tag.kind = VertexKind::ObjectSample;
      tag.index = o;
      tag.local = u;
      mesh.vertices.push_back(tag);
    }
  }
  for (int b = 0; b < static_cast<int>(scene.terrain.boxes.size()); ++b) {
    const auto unit = sample_box_unit(scene.terrain.boxes[b].half_extents, options.env_density,
                                      derive_seed(options.seed, 2, b));
    for (const auto& u : unit) {
      VertexTag tag;
      tag.kind = VertexKind::TerrainSample;
      tag.index = b;
      tag.local = u;
      mesh.vertices.push_back(tag);
    }
  }
  if (options.include_ground_grid && scene.terrain.has_ground && scene.terrain.grid) {
    for (const auto& p : ground_grid(scene.terrain.grid->bounds, scene.terrain.grid->spacing)) {
      VertexTag tag;
      tag.kind = VertexKind::GroundSample;
      tag.local = p;
      mesh.vertices.push_back(tag);
    }
  }

  const PointList positions = mesh_vertex_positions(mesh, keypoint_positions, scene, t);
  mesh.tetrahedra = delaunay_tetrahedralize(positions);

  std::vector<std::set<int>> adj(mesh.vertices.size());
  for (const auto& tet : mesh.tetrahedra) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        if (a != b) adj[tet[a]].insert(tet[b]);
      }
    }
  }
  mesh.neighbors.resize(adj.size());
  mesh.weights.resize(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    mesh.neighbors[i].assign(adj[i].begin(), adj[i].end());
    const double w = 1.0 / static_cast<double>(mesh.neighbors[i].size());
    mesh.weights[i].assign(mesh.neighbors[i].size(), w);
  }
  return mesh;
}

InteractionMesh build_interaction_mesh(const KinematicModel& model,
                                       const std::vector<std::string>& keypoint_names,
                                       const SceneDescription& scene, const Configuration& q_ref,
                                       int frame_ref, const MeshOptions& options) {
  return build_interaction_mesh(keypoint_names, keypoint_positions(model, q_ref, keypoint_names),
                                scene, frame_ref, options);
}

PointList mesh_vertex_positions(const InteractionMesh& mesh, const PointList& keypoint_positions,
                                const SceneDescription& scene, int t) {
  PointList out(mesh.vertices.size());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const VertexTag& v = mesh.vertices[i];
    switch (v.kind) {
      case VertexKind::Keypoint:
        if (v.index >= static_cast<int>(keypoint_positions.size())) {
          throw ValidationError("missing position for mesh keypoint '" + v.keypoint + "'");
        }
        out[i] = keypoint_positions[v.index];
        break;
      case VertexKind::ObjectSample: {
        const auto& o = scene.objects.at(v.index);
        if (t < 0 || t >= static_cast<int>(o.track.size())) {
          throw ValidationError("frame index outside the object track");
        }
        out[i] = o.track[t] * v.local.cwiseProduct(o.half_extents);
        break;
      }
      case VertexKind::TerrainSample: {
        const auto& b = scene.terrain.boxes.at(v.index);
        out[i] = b.pose * v.local.cwiseProduct(b.half_extents);
        break;
      }
      case VertexKind::GroundSample:
        out[i] = scene.terrain.ground_pose * v.local;
        break;
    }
  }
  return out;
}

Vec3 laplacian_coordinate(const InteractionMesh& mesh, const PointList& positions, int i) {
  if (i < 0 || i >= mesh.num_vertices()) throw ValidationError("vertex index out of range");
  if (static_cast<int>(positions.size()) != mesh.num_vertices()) {
    throw ValidationError("position count does not match the mesh");
  }
  Vec3 l = positions[i];
  const auto& nb = mesh.neighbors[i];
  const auto& w = mesh.weights[i];
  for (std::size_t k = 0; k < nb.size(); ++k) l -= w[k] * positions[nb[k]];
  return l;
}

PointList laplacian_coordinates(const InteractionMesh& mesh, const PointList& positions) {
  PointList out(mesh.vertices.size());
  for (int i = 0; i < mesh.num_vertices(); ++i) out[i] = laplacian_coordinate(mesh, positions, i);
  return out;
}

double deformation_energy(const InteractionMesh& mesh, const PointList& source,
                          const PointList& target) {
  if (source.size() != target.size() || static_cast<int>(source.size()) != mesh.num_vertices()) {
    throw ValidationError("deformation energy needs one source and target position per vertex");
  }
  double e = 0.0;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    e += (laplacian_coordinate(mesh, source, i) - laplacian_coordinate(mesh, target, i))
             .squaredNorm();
  }
  return e;
}

PointList object_frame_laplacians(const InteractionMesh& mesh, const PointList& positions,
                                  const Pose& object_pose) {
  const bool has_object =
      std::any_of(mesh.vertices.begin(), mesh.vertices.end(),
                  [](const VertexTag& v) { return v.kind == VertexKind::ObjectSample; });
  if (!has_object) throw ValidationError("mesh has no object samples");
  const Mat3 Rt = object_pose.linear().transpose();
  PointList out = laplacian_coordinates(mesh, positions);
  for (auto& l : out) l = Rt * l;
  return out;
}

}  // namespace meshret
