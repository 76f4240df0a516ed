#pragma once

#include "meshret/geometry/delaunay.hpp"
#include "meshret/geometry/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace meshret {

class KinematicModel;
struct Configuration;

enum class VertexKind { Keypoint, ObjectSample, TerrainSample, GroundSample };

struct VertexTag {
  VertexKind kind = VertexKind::Keypoint;
  // Keypoint: slot in the keypoint list the mesh was built with.
  // ObjectSample / TerrainSample: object or terrain box index.
  int index = 0;
  std::string keypoint;
  // Object and terrain samples: unit box coordinates (local = unit * half extents).
  // Ground samples: point in the ground frame.
  Vec3 local = Vec3::Zero();
};

struct MeshOptions {
  double object_density = 40.0;  // samples per m^2
  double env_density = 10.0;     // samples per m^2, terrain boxes
  bool include_ground_grid = true;
  std::uint64_t seed = 7;
};

struct InteractionMesh {
  std::vector<VertexTag> vertices;
  std::vector<Tetrahedron> tetrahedra;
  std::vector<std::vector<int>> neighbors;  // sorted
  std::vector<std::vector<double>> weights;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_keypoints() const;
  // Mesh vertex of keypoint slot k, or -1.
  int keypoint_vertex(int slot) const;
};

// Builds the mesh from explicit keypoint positions (one per name) and the
// scene geometry at frame t. Ground samples come from terrain.grid.
InteractionMesh build_interaction_mesh(const std::vector<std::string>& keypoint_names,
                                       const PointList& keypoint_positions,
                                       const SceneDescription& scene, int t,
                                       const MeshOptions& options = {});

// Same, with robot keypoints placed by forward kinematics at q_ref.
InteractionMesh build_interaction_mesh(const KinematicModel& model,
                                       const std::vector<std::string>& keypoint_names,
                                       const SceneDescription& scene, const Configuration& q_ref,
                                       int frame_ref, const MeshOptions& options = {});

// World position of every mesh vertex given keypoint positions (by slot)
// and the scene at frame t.
PointList mesh_vertex_positions(const InteractionMesh& mesh, const PointList& keypoint_positions,
                                const SceneDescription& scene, int t);

Vec3 laplacian_coordinate(const InteractionMesh& mesh, const PointList& positions, int i);
PointList laplacian_coordinates(const InteractionMesh& mesh, const PointList& positions);

double deformation_energy(const InteractionMesh& mesh, const PointList& source,
                          const PointList& target);

// Laplacian coordinates expressed in the frame of object_pose.
PointList object_frame_laplacians(const InteractionMesh& mesh, const PointList& positions,
                                  const Pose& object_pose);

}  // namespace meshret
