#include "meshret/io/config.hpp"

#include "meshret/error.hpp"
#include "meshret/io/files.hpp"

#include <json.hpp>

#include <set>

namespace meshret {

using json = nlohmann::json;

namespace {

Vec3 vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

VecX vecx_of(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vecx_json(const VecX& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ValidationError("unknown " + where + " key '" + k + "'");
  }
}

const char* mesh_frame_name(MeshFrameMode m) {
  switch (m) {
    case MeshFrameMode::Auto: return "auto";
    case MeshFrameMode::World: return "world";
    case MeshFrameMode::Object: return "object";
  }
  return "auto";
}

MeshFrameMode parse_mesh_frame(const std::string& s) {
  if (s == "auto") return MeshFrameMode::Auto;
  if (s == "world") return MeshFrameMode::World;
  if (s == "object") return MeshFrameMode::Object;
  throw ParseError("unknown mesh frame '" + s + "'");
}

SourceFormat parse_format(const std::string& s) {
  if (s == "auto") return SourceFormat::Auto;
  if (s == "json") return SourceFormat::Json;
  if (s == "bvh") return SourceFormat::Bvh;
  throw ParseError("unknown source format '" + s + "'");
}

const char* format_name(SourceFormat f) {
  switch (f) {
    case SourceFormat::Auto: return "auto";
    case SourceFormat::Json: return "json";
    case SourceFormat::Bvh: return "bvh";
  }
  return "auto";
}

RetargetOptions parse_retarget(const json& j) {
  check_keys(j, {"correspondence", "feet", "solver", "first_frame_iters", "first_frame_damping",
                 "stance_threshold", "mesh", "rebuild_mesh_per_frame", "mesh_reference_frame",
                 "mesh_frame", "smoothness", "collision_constraints", "penetration_tol"},
             "retarget");
  RetargetOptions o;
  if (j.contains("correspondence")) {
    for (const auto& c : j.at("correspondence")) {
      if (c.is_string()) {
        o.correspondence.emplace_back(c.get<std::string>(), c.get<std::string>());
      } else {
        o.correspondence.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
      }
    }
  }
  if (j.contains("feet")) {
    for (const auto& f : j.at("feet")) {
      FootSpec fs;
      fs.source_keypoint = f.at("source_keypoint").get<std::string>();
      fs.robot_link = f.at("robot_link").get<std::string>();
      if (f.contains("offset")) fs.offset = vec3_of(f.at("offset"));
      o.feet.push_back(fs);
    }
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, {"max_iters", "trust_radius", "tol_dq", "kkt_tol", "relax_on_infeasible",
                   "relax_weight", "equality_tol", "restoration_iters"},
               "solver");
    read(s, "max_iters", o.solver.max_iters);
    read(s, "trust_radius", o.solver.trust_radius);
    read(s, "tol_dq", o.solver.tol_dq);
    read(s, "kkt_tol", o.solver.kkt_tol);
    read(s, "relax_on_infeasible", o.solver.relax_on_infeasible);
    read(s, "relax_weight", o.solver.relax_weight);
    read(s, "equality_tol", o.solver.equality_tol);
    read(s, "restoration_iters", o.solver.restoration_iters);
  }
  read(j, "first_frame_iters", o.first_frame_iters);
  read(j, "first_frame_damping", o.first_frame_damping);
  read(j, "stance_threshold", o.stance_threshold);
  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    check_keys(m, {"object_density", "env_density", "include_ground_grid", "seed"}, "mesh");
    read(m, "object_density", o.mesh.object_density);
    read(m, "env_density", o.mesh.env_density);
    read(m, "include_ground_grid", o.mesh.include_ground_grid);
    read(m, "seed", o.mesh.seed);
  }
  read(j, "rebuild_mesh_per_frame", o.rebuild_mesh_per_frame);
  read(j, "mesh_reference_frame", o.mesh_reference_frame);
  if (j.contains("mesh_frame")) o.mesh_frame = parse_mesh_frame(j.at("mesh_frame").get<std::string>());
  if (j.contains("smoothness")) o.smoothness = vecx_of(j.at("smoothness"));
  read(j, "collision_constraints", o.collision_constraints);
  read(j, "penetration_tol", o.penetration_tol);
  if (!(o.solver.trust_radius > 0.0)) throw ValidationError("trust radius must be positive");
  if (o.solver.max_iters < 1 || o.first_frame_iters < 1) {
    throw ValidationError("iteration budgets must be at least 1");
  }
  if (!(o.stance_threshold > 0.0)) throw ValidationError("stance threshold must be positive");
  if (o.smoothness.size() > 0 && o.smoothness.minCoeff() < 0.0) {
    throw ValidationError("smoothness weights must be nonnegative");
  }
  return o;
}

json retarget_json(const RetargetOptions& o) {
  json j;
  json corr = json::array();
  for (const auto& [a, b] : o.correspondence) corr.push_back(json::array({a, b}));
  j["correspondence"] = corr;
  json feet = json::array();
  for (const auto& f : o.feet) {
    feet.push_back({{"source_keypoint", f.source_keypoint},
                    {"robot_link", f.robot_link},
                    {"offset", vec3_json(f.offset)}});
  }
  j["feet"] = feet;
  j["solver"] = {{"max_iters", o.solver.max_iters},
                 {"trust_radius", o.solver.trust_radius},
                 {"tol_dq", o.solver.tol_dq},
                 {"kkt_tol", o.solver.kkt_tol},
                 {"relax_on_infeasible", o.solver.relax_on_infeasible},
                 {"relax_weight", o.solver.relax_weight},
                 {"equality_tol", o.solver.equality_tol},
                 {"restoration_iters", o.solver.restoration_iters}};
  j["first_frame_iters"] = o.first_frame_iters;
  j["first_frame_damping"] = o.first_frame_damping;
  j["stance_threshold"] = o.stance_threshold;
  j["mesh"] = {{"object_density", o.mesh.object_density},
               {"env_density", o.mesh.env_density},
               {"include_ground_grid", o.mesh.include_ground_grid},
               {"seed", o.mesh.seed}};
  j["rebuild_mesh_per_frame"] = o.rebuild_mesh_per_frame;
  j["mesh_reference_frame"] = o.mesh_reference_frame;
  j["mesh_frame"] = mesh_frame_name(o.mesh_frame);
  if (o.smoothness.size() > 0) j["smoothness"] = vecx_json(o.smoothness);
  j["collision_constraints"] = o.collision_constraints;
  j["penetration_tol"] = o.penetration_tol;
  return j;
}

MetricOptions parse_metrics(const json& j) {
  check_keys(j, {"penetration_tol", "contact_threshold", "source_contact_distance",
                 "skating_threshold", "stance_threshold"},
             "metrics");
  MetricOptions m;
  read(j, "penetration_tol", m.penetration_tol);
  read(j, "contact_threshold", m.contact_threshold);
  read(j, "source_contact_distance", m.source_contact_distance);
  read(j, "skating_threshold", m.skating_threshold);
  read(j, "stance_threshold", m.stance_threshold);
  if (m.penetration_tol < 0.0 || m.contact_threshold < 0.0 || m.source_contact_distance < 0.0 ||
      m.skating_threshold < 0.0 || !(m.stance_threshold > 0.0)) {
    throw ValidationError("metric thresholds must be nonnegative");
  }
  return m;
}

BaselineConfig parse_baselines(const json& j) {
  check_keys(j, {"phc_learning_rate", "phc_iterations", "phc_gradient_tol", "gmr_orientation",
                 "gmr_orientation_weight", "gmr_iterations", "vm_learning_rate",
                 "vm_scale_learning_rate", "vm_iterations", "vm_divergence_window",
                 "lambda_contact", "lambda_skate", "lambda_collision", "lambda_joint",
                 "lambda_smooth", "imma_stage1_iterations", "imma_ik_iterations"},
             "baselines");
  BaselineConfig b;
  read(j, "phc_learning_rate", b.phc_learning_rate);
  read(j, "phc_iterations", b.phc_iterations);
  read(j, "phc_gradient_tol", b.phc_gradient_tol);
  read(j, "gmr_orientation", b.gmr_orientation);
  read(j, "gmr_orientation_weight", b.gmr_orientation_weight);
  read(j, "gmr_iterations", b.gmr_iterations);
  read(j, "vm_learning_rate", b.vm_learning_rate);
  read(j, "vm_scale_learning_rate", b.vm_scale_learning_rate);
  read(j, "vm_iterations", b.vm_iterations);
  read(j, "vm_divergence_window", b.vm_divergence_window);
  read(j, "lambda_contact", b.lambda_contact);
  read(j, "lambda_skate", b.lambda_skate);
  read(j, "lambda_collision", b.lambda_collision);
  read(j, "lambda_joint", b.lambda_joint);
  read(j, "lambda_smooth", b.lambda_smooth);
  read(j, "imma_stage1_iterations", b.imma_stage1_iterations);
  read(j, "imma_ik_iterations", b.imma_ik_iterations);
  b.validate();
  return b;
}

BatchConfig parse_batch(const json& j) {
  check_keys(j, {"grid_x", "grid_y", "samples", "offset_min", "offset_max", "yaw_max",
                 "scale_min", "scale_max"},
             "batch");
  BatchConfig b;
  read(j, "grid_x", b.grid_x);
  read(j, "grid_y", b.grid_y);
  read(j, "samples", b.samples);
  if (j.contains("offset_min")) b.ranges.offset_min = vec3_of(j.at("offset_min"));
  if (j.contains("offset_max")) b.ranges.offset_max = vec3_of(j.at("offset_max"));
  read(j, "yaw_max", b.ranges.yaw_max);
  if (j.contains("scale_min")) b.ranges.scale_min = vec3_of(j.at("scale_min"));
  if (j.contains("scale_max")) b.ranges.scale_max = vec3_of(j.at("scale_max"));
  if (b.grid_x.empty() != b.grid_y.empty()) {
    throw ValidationError("batch grid needs both grid_x and grid_y");
  }
  if (b.samples < 0) throw ValidationError("batch sample count is negative");
  return b;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    check_keys(j, {"model", "source", "source_format", "scene", "augmentation", "output", "seed",
                   "threads", "bvh", "retarget", "metrics", "baselines", "batch"},
               "config");
    PipelineConfig c;
    if (j.contains("model")) c.model = resolve(base_dir, j.at("model").get<std::string>());
    if (j.contains("source")) c.source = resolve(base_dir, j.at("source").get<std::string>());
    if (j.contains("source_format")) c.source_format = parse_format(j.at("source_format").get<std::string>());
    if (j.contains("scene")) c.scene = resolve(base_dir, j.at("scene").get<std::string>());
    if (j.contains("augmentation")) {
      c.augmentation = resolve(base_dir, j.at("augmentation").get<std::string>());
    }
    if (j.contains("output")) c.output = resolve(base_dir, j.at("output").get<std::string>());
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    if (j.contains("bvh")) {
      const json& b = j.at("bvh");
      check_keys(b, {"keypoints", "unit_scale", "up", "demonstrator_height", "head_keypoint"}, "bvh");
      if (b.contains("keypoints")) {
        for (const auto& k : b.at("keypoints")) {
          c.bvh.keypoints.emplace_back(k.at(0).get<std::string>(), k.at(1).get<std::string>());
        }
      }
      read(b, "unit_scale", c.bvh.unit_scale);
      if (b.contains("up")) {
        const std::string up = b.at("up").get<std::string>();
        if (up != "y" && up != "z") throw ParseError("bvh up axis must be 'y' or 'z'");
        c.bvh.up = up == "y" ? UpAxis::Y : UpAxis::Z;
      }
      if (b.contains("demonstrator_height")) c.bvh.demonstrator_height = b.at("demonstrator_height").get<double>();
      read(b, "head_keypoint", c.bvh.head_keypoint);
    }
    if (j.contains("retarget")) c.retarget = parse_retarget(j.at("retarget"));
    if (j.contains("metrics")) c.metrics = parse_metrics(j.at("metrics"));
    if (j.contains("baselines")) c.baselines = parse_baselines(j.at("baselines"));
    if (j.contains("batch")) c.batch = parse_batch(j.at("batch"));
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["model"] = c.model.string();
  j["source"] = c.source.string();
  j["source_format"] = format_name(c.source_format);
  if (!c.scene.empty()) j["scene"] = c.scene.string();
  if (!c.augmentation.empty()) j["augmentation"] = c.augmentation.string();
  j["output"] = c.output.string();
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  json kp = json::array();
  for (const auto& [a, b] : c.bvh.keypoints) kp.push_back(json::array({a, b}));
  j["bvh"] = {{"keypoints", kp},
              {"unit_scale", c.bvh.unit_scale},
              {"up", c.bvh.up == UpAxis::Y ? "y" : "z"},
              {"head_keypoint", c.bvh.head_keypoint}};
  if (c.bvh.demonstrator_height) j["bvh"]["demonstrator_height"] = *c.bvh.demonstrator_height;
  j["retarget"] = retarget_json(c.retarget);
  j["metrics"] = {{"penetration_tol", c.metrics.penetration_tol},
                  {"contact_threshold", c.metrics.contact_threshold},
                  {"source_contact_distance", c.metrics.source_contact_distance},
                  {"skating_threshold", c.metrics.skating_threshold},
                  {"stance_threshold", c.metrics.stance_threshold}};
  const BaselineConfig& b = c.baselines;
  j["baselines"] = {{"phc_learning_rate", b.phc_learning_rate},
                    {"phc_iterations", b.phc_iterations},
                    {"phc_gradient_tol", b.phc_gradient_tol},
                    {"gmr_orientation", b.gmr_orientation},
                    {"gmr_orientation_weight", b.gmr_orientation_weight},
                    {"gmr_iterations", b.gmr_iterations},
                    {"vm_learning_rate", b.vm_learning_rate},
                    {"vm_scale_learning_rate", b.vm_scale_learning_rate},
                    {"vm_iterations", b.vm_iterations},
                    {"vm_divergence_window", b.vm_divergence_window},
                    {"lambda_contact", b.lambda_contact},
                    {"lambda_skate", b.lambda_skate},
                    {"lambda_collision", b.lambda_collision},
                    {"lambda_joint", b.lambda_joint},
                    {"lambda_smooth", b.lambda_smooth},
                    {"imma_stage1_iterations", b.imma_stage1_iterations},
                    {"imma_ik_iterations", b.imma_ik_iterations}};
  j["batch"] = {{"grid_x", c.batch.grid_x},
                {"grid_y", c.batch.grid_y},
                {"samples", c.batch.samples},
                {"offset_min", vec3_json(c.batch.ranges.offset_min)},
                {"offset_max", vec3_json(c.batch.ranges.offset_max)},
                {"yaw_max", c.batch.ranges.yaw_max},
                {"scale_min", vec3_json(c.batch.ranges.scale_min)},
                {"scale_max", vec3_json(c.batch.ranges.scale_max)}};
  return j.dump(2) + "\n";
}

SourceMotion load_source(const std::filesystem::path& path, SourceFormat format,
                         const BvhImport& bvh) {
  if (format == SourceFormat::Auto) {
    format = path.extension() == ".bvh" ? SourceFormat::Bvh : SourceFormat::Json;
  }
  if (format == SourceFormat::Bvh) {
    const BvhDocument doc = load_bvh(path);
    BvhImport imp = bvh;
    if (imp.keypoints.empty()) imp.keypoints = default_bvh_import(doc).keypoints;
    return bvh_to_source(doc, imp);
  }
  return source_motion_from_json(read_text_file(path));
}

}  // namespace meshret
