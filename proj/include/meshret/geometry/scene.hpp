#pragma once

#include "meshret/geometry/primitives.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meshret {

class KinematicModel;

enum class TaskKind { RobotOnly, RobotObject, RobotTerrain };

const char* task_name(TaskKind kind);
TaskKind parse_task(std::string_view name);

// A manipulated box with one pose per motion frame.
struct SceneObject {
  std::string id;
  Vec3 half_extents = Vec3::Constant(0.1);
  std::vector<Pose> track;
};

struct TerrainBox {
  std::string name;
  Vec3 half_extents = Vec3::Constant(0.1);
  Pose pose = Pose::Identity();
};

struct GroundGridSpec {
  std::array<double, 4> bounds{0.0, 0.0, 0.0, 0.0};  // xmin, ymin, xmax, ymax
  double spacing = 0.25;
};

struct Terrain {
  bool has_ground = true;
  // Ground plane frame: the walkable surface is the local xy-plane.
  Pose ground_pose = Pose::Identity();
  std::vector<TerrainBox> boxes;
  std::optional<GroundGridSpec> grid;

  double ground_z() const { return ground_pose.translation().z(); }
};

enum class PairTarget { Object, Ground, TerrainBox, RobotLink };

struct CollisionPairSpec {
  std::string robot_link;
  PairTarget target = PairTarget::Ground;
  std::string target_name;  // object id, terrain box name or robot link name
};

struct SceneDescription {
  TaskKind task = TaskKind::RobotOnly;
  std::vector<SceneObject> objects;
  Terrain terrain;
  std::vector<CollisionPairSpec> collision_pairs;

  // Frames in the object tracks, or nullopt when the scene has no objects.
  std::optional<int> frame_count() const;
  int object_index(std::string_view id) const;        // throws ValidationError
  int terrain_box_index(std::string_view name) const;  // throws ValidationError
};

// One robot primitive checked against one other primitive.
struct ResolvedPair {
  int robot_primitive = -1;  // index into model.collisions()
  PairTarget target = PairTarget::Ground;
  int target_index = -1;  // object, terrain box or robot primitive index
};

SceneDescription load_scene(const std::filesystem::path& scene_file);
SceneDescription parse_scene(std::string_view json_text,
                             const std::filesystem::path& base_dir = {});
std::string scene_to_json(const SceneDescription& scene);

// Checks track lengths and pair references. Throws ValidationError.
void validate_scene(const SceneDescription& scene, const KinematicModel& model,
                    int num_frames);

// Expands link-level pair specs to every primitive on the named links.
std::vector<ResolvedPair> resolve_collision_pairs(const SceneDescription& scene,
                                                  const KinematicModel& model);

// Shape and world pose of a non-robot pair target at frame t.
std::pair<Shape, Pose> target_geometry(const SceneDescription& scene, PairTarget target,
                                       int index, int t);

// Signed distance of a resolved pair; result A is the robot primitive.
SdfResult evaluate_pair(const KinematicModel& model, const std::vector<Pose>& link_poses,
                        const SceneDescription& scene, const ResolvedPair& pair, int t);

// World pose of a robot collision primitive.
Pose primitive_pose(const KinematicModel& model, const std::vector<Pose>& link_poses,
                    int primitive);

// Applies a rigid transform to every object track, terrain box and the
// ground frame.
SceneDescription transform_scene(const SceneDescription& scene, const Pose& transform);

}  // namespace meshret
