#include "meshret/geometry/scene.hpp"

#include "meshret/error.hpp"
#include "meshret/kinematics.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace meshret {

using nlohmann::json;

const char* task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::RobotOnly: return "robot-only";
    case TaskKind::RobotObject: return "robot-object";
    case TaskKind::RobotTerrain: return "robot-terrain";
  }
  return "robot-only";
}

TaskKind parse_task(std::string_view name) {
  if (name == "robot-only") return TaskKind::RobotOnly;
  if (name == "robot-object") return TaskKind::RobotObject;
  if (name == "robot-terrain") return TaskKind::RobotTerrain;
  throw ValidationError("unknown task kind '" + std::string(name) + "'");
}

std::optional<int> SceneDescription::frame_count() const {
  if (objects.empty()) return std::nullopt;
  return static_cast<int>(objects.front().track.size());
}

int SceneDescription::object_index(std::string_view id) const {
  for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
    if (objects[i].id == id) return i;
  }
  throw ValidationError("scene has no object '" + std::string(id) + "'");
}

int SceneDescription::terrain_box_index(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(terrain.boxes.size()); ++i) {
    if (terrain.boxes[i].name == name) return i;
  }
  throw ValidationError("scene has no terrain box '" + std::string(name) + "'");
}

namespace {

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Vec3 vec3_of(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ParseError(std::string(what) + " must have 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

std::vector<Pose> parse_track(const json& arr) {
  std::vector<Pose> track;
  track.reserve(arr.size());
  for (const auto& row : arr) track.push_back(pose_from_array(row.get<std::vector<double>>()));
  return track;
}

json pose_json(const Pose& p) {
  const auto a = pose_to_array(p);
  return json(std::vector<double>(a.begin(), a.end()));
}

CollisionPairSpec parse_pair(const json& jp) {
  CollisionPairSpec spec;
  spec.robot_link = jp.at("robot").get<std::string>();
  const std::string other = jp.at("other").get<std::string>();
  const auto colon = other.find(':');
  const std::string kind = other.substr(0, colon);
  const std::string name = colon == std::string::npos ? "" : other.substr(colon + 1);
  if (kind == "ground") {
    spec.target = PairTarget::Ground;
  } else if (kind == "object") {
    spec.target = PairTarget::Object;
  } else if (kind == "terrain") {
    spec.target = PairTarget::TerrainBox;
  } else if (kind == "robot") {
    spec.target = PairTarget::RobotLink;
  } else {
    throw ParseError("collision pair target '" + other + "' is not ground, object:, terrain: or robot:");
  }
  if (spec.target != PairTarget::Ground && name.empty()) {
    throw ParseError("collision pair target '" + other + "' has no name");
  }
  spec.target_name = name;
  return spec;
}

std::string pair_target_string(const CollisionPairSpec& p) {
  switch (p.target) {
    case PairTarget::Ground: return "ground";
    case PairTarget::Object: return "object:" + p.target_name;
    case PairTarget::TerrainBox: return "terrain:" + p.target_name;
    case PairTarget::RobotLink: return "robot:" + p.target_name;
  }
  return "ground";
}

}  // namespace

SceneDescription parse_scene(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene file: ") + e.what());
  }
  try {
    SceneDescription scene;
    scene.task = parse_task(doc.value("task", std::string("robot-only")));
    for (const auto& jo : doc.value("objects", json::array())) {
      SceneObject obj;
      obj.id = jo.at("id").get<std::string>();
      obj.half_extents = vec3_of(jo.at("half_extents"), "object half_extents");
      Shape::box(obj.half_extents).validate();
      if (jo.contains("pose_track")) {
        obj.track = parse_track(jo["pose_track"]);
      } else if (jo.contains("pose_track_file")) {
        const auto path = base_dir / jo["pose_track_file"].get<std::string>();
        obj.track = parse_track(json::parse(read_text(path, "pose track file")));
      } else {
        throw ParseError("object '" + obj.id + "' has no pose_track or pose_track_file");
      }
      scene.objects.push_back(std::move(obj));
    }
    if (doc.contains("terrain")) {
      const json& jt = doc["terrain"];
      if (jt.contains("ground_z") && jt["ground_z"].is_null()) {
        scene.terrain.has_ground = false;
      } else {
        scene.terrain.ground_pose.translation().z() = jt.value("ground_z", 0.0);
      }
      for (const auto& jb : jt.value("boxes", json::array())) {
        TerrainBox box;
        box.name = jb.at("name").get<std::string>();
        box.half_extents = vec3_of(jb.at("half_extents"), "terrain box half_extents");
        Shape::box(box.half_extents).validate();
        box.pose = pose_from_array(jb.at("pose").get<std::vector<double>>());
        scene.terrain.boxes.push_back(std::move(box));
      }
      if (jt.contains("ground_grid")) {
        GroundGridSpec g;
        const auto b = jt["ground_grid"].at("bounds").get<std::vector<double>>();
        if (b.size() != 4) throw ParseError("ground_grid.bounds must be [xmin,ymin,xmax,ymax]");
        g.bounds = {b[0], b[1], b[2], b[3]};
        g.spacing = jt["ground_grid"].value("spacing", g.spacing);
        if (!(g.spacing > 0.0)) throw ValidationError("ground grid spacing must be positive");
        scene.terrain.grid = g;
      }
    }
    for (const auto& jp : doc.value("collision_pairs", json::array())) {
      scene.collision_pairs.push_back(parse_pair(jp));
    }
    return scene;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene file: ") + e.what());
  }
}

SceneDescription load_scene(const std::filesystem::path& scene_file) {
  return parse_scene(read_text(scene_file, "scene file"), scene_file.parent_path());
}

std::string scene_to_json(const SceneDescription& scene) {
  json doc;
  doc["task"] = task_name(scene.task);
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json track = json::array();
    for (const auto& p : o.track) track.push_back(pose_json(p));
    objs.push_back(json{{"id", o.id},
                        {"half_extents", {o.half_extents.x(), o.half_extents.y(), o.half_extents.z()}},
                        {"pose_track", track}});
  }
  doc["objects"] = objs;
  json terrain;
  if (scene.terrain.has_ground) {
    terrain["ground_z"] = scene.terrain.ground_z();
  } else {
    terrain["ground_z"] = nullptr;
  }
  json boxes = json::array();
  for (const auto& b : scene.terrain.boxes) {
    boxes.push_back(json{{"name", b.name},
                         {"half_extents", {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()}},
                         {"pose", pose_json(b.pose)}});
  }
  terrain["boxes"] = boxes;
  if (scene.terrain.grid) {
    const auto& g = *scene.terrain.grid;
    terrain["ground_grid"] = json{{"bounds", g.bounds}, {"spacing", g.spacing}};
  }
  doc["terrain"] = terrain;
  json pairs = json::array();
  for (const auto& p : scene.collision_pairs) {
    pairs.push_back(json{{"robot", p.robot_link}, {"other", pair_target_string(p)}});
  }
  doc["collision_pairs"] = pairs;
  return doc.dump(2);
}

void validate_scene(const SceneDescription& scene, const KinematicModel& model, int num_frames) {
  for (const auto& o : scene.objects) {
    if (static_cast<int>(o.track.size()) != num_frames) {
      throw ValidationError("object '" + o.id + "' pose track has " +
                            std::to_string(o.track.size()) + " frames, motion has " +
                            std::to_string(num_frames));
    }
  }
  resolve_collision_pairs(scene, model);
}

std::vector<ResolvedPair> resolve_collision_pairs(const SceneDescription& scene,
                                                  const KinematicModel& model) {
  std::vector<ResolvedPair> out;
  const auto& prims = model.collisions();
  auto prims_on = [&](const std::string& link_name) {
    const int link = model.link_index(link_name);
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(prims.size()); ++i) {
      if (prims[i].link == link) idx.push_back(i);
    }
    if (idx.empty()) {
      throw ValidationError("collision pair link '" + link_name + "' has no primitives");
    }
    return idx;
  };
  for (const auto& spec : scene.collision_pairs) {
    const auto robot = prims_on(spec.robot_link);
    std::vector<int> targets;
    switch (spec.target) {
      case PairTarget::Ground:
        if (!scene.terrain.has_ground) {
          throw ValidationError("collision pair references the ground but the scene has none");
        }
        targets = {0};
        break;
      case PairTarget::Object: targets = {scene.object_index(spec.target_name)}; break;
      case PairTarget::TerrainBox: targets = {scene.terrain_box_index(spec.target_name)}; break;
      case PairTarget::RobotLink: targets = prims_on(spec.target_name); break;
    }
    for (int r : robot) {
      for (int t : targets) out.push_back({r, spec.target, t});
    }
  }
  return out;
}

std::pair<Shape, Pose> target_geometry(const SceneDescription& scene, PairTarget target,
                                       int index, int t) {
  switch (target) {
    case PairTarget::Ground: return {Shape::half_space(), scene.terrain.ground_pose};
    case PairTarget::Object: {
      const auto& o = scene.objects.at(index);
      return {Shape::box(o.half_extents), o.track.at(t)};
    }
    case PairTarget::TerrainBox: {
      const auto& b = scene.terrain.boxes.at(index);
      return {Shape::box(b.half_extents), b.pose};
    }
    case PairTarget::RobotLink: break;
  }
  throw ValidationError("robot-link targets have no static geometry");
}

Pose primitive_pose(const KinematicModel& model, const std::vector<Pose>& link_poses,
                    int primitive) {
  const auto& c = model.collisions()[primitive];
  return link_poses[c.link] * c.local;
}

SdfResult evaluate_pair(const KinematicModel& model, const std::vector<Pose>& link_poses,
                        const SceneDescription& scene, const ResolvedPair& pair, int t) {
  const auto& prims = model.collisions();
  const Pose pa = primitive_pose(model, link_poses, pair.robot_primitive);
  if (pair.target == PairTarget::RobotLink) {
    const Pose pb = primitive_pose(model, link_poses, pair.target_index);
    return signed_distance(prims[pair.robot_primitive].shape, pa, prims[pair.target_index].shape,
                           pb);
  }
  const auto [shape, pose] = target_geometry(scene, pair.target, pair.target_index, t);
  return signed_distance(prims[pair.robot_primitive].shape, pa, shape, pose);
}

SceneDescription transform_scene(const SceneDescription& scene, const Pose& transform) {
  SceneDescription out = scene;
  for (auto& o : out.objects) {
    for (auto& p : o.track) p = transform * p;
  }
  for (auto& b : out.terrain.boxes) b.pose = transform * b.pose;
  out.terrain.ground_pose = transform * out.terrain.ground_pose;
  return out;
}

}  // namespace meshret
