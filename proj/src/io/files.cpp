#include "meshret/io/files.hpp"

#include "meshret/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace meshret {

using json = nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

template <typename F>
auto with_schema(const char* what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json quat_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Quat quat_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("expected a quaternion [w, x, y, z]");
  Quat q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  if (!(q.norm() > 0.0)) throw ParseError("zero quaternion");
  return q.normalized();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json report_json(const FrameReport& r) {
  return {{"status", solve_status_name(r.solve.status)},
          {"iterations", r.solve.iterations},
          {"final_objective", number_or_null(r.solve.final_objective)},
          {"max_violation", number_or_null(r.solve.max_violation)},
          {"min_signed_distance", number_or_null(r.solve.min_signed_distance)},
          {"relaxed", r.solve.relaxed},
          {"deformation_energy", number_or_null(r.deformation_energy)},
          {"warm_start_energy", number_or_null(r.warm_start_energy)},
          {"penetration_flag", r.penetration_flag}};
}

FrameReport report_from(const json& f) {
  FrameReport r;
  r.solve.status = parse_solve_status(f.at("status").get<std::string>());
  r.solve.iterations = f.at("iterations").get<int>();
  r.solve.final_objective = number_from(f.at("final_objective"));
  r.solve.max_violation = number_from(f.at("max_violation"));
  r.solve.min_signed_distance = number_from(f.at("min_signed_distance"));
  r.solve.relaxed = f.at("relaxed").get<bool>();
  r.deformation_energy = number_from(f.at("deformation_energy"));
  r.warm_start_energy = number_from(f.at("warm_start_energy"));
  r.penetration_flag = f.at("penetration_flag").get<bool>();
  return r;
}

}  // namespace

std::string trajectory_to_json(const Trajectory& traj, const KinematicModel& model,
                               const std::vector<FrameReport>* reports) {
  json j;
  j["dt"] = traj.dt;
  j["joint_names"] = model.joint_names();
  json frames = json::array();
  for (const auto& q : traj.frames) {
    check_dimension(model, q);
    const Quat& r = q.base_orientation;
    std::vector<double> row{q.base_position.x(), q.base_position.y(), q.base_position.z(),
                            r.w(), r.x(), r.y(), r.z()};
    row.insert(row.end(), q.joint_angles.data(), q.joint_angles.data() + q.joint_angles.size());
    frames.push_back(row);
  }
  j["frames"] = frames;
  if (reports != nullptr) {
    json arr = json::array();
    for (const auto& r : *reports) arr.push_back(report_json(r));
    j["reports"] = arr;
  }
  return j.dump(2) + "\n";
}

Trajectory trajectory_from_json(std::string_view text, const KinematicModel& model) {
  const json j = parse_json(text, "trajectory");
  return with_schema("trajectory", [&] {
    Trajectory traj;
    traj.dt = j.at("dt").get<double>();
    if (!(traj.dt > 0.0)) throw ValidationError("trajectory dt must be positive");
    if (j.contains("joint_names") && j.at("joint_names").get<std::vector<std::string>>() != model.joint_names()) {
      throw ValidationError("trajectory joint names do not match model '" + model.name() + "'");
    }
    for (const auto& f : j.at("frames")) {
      const auto row = f.get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(model.config_dim())) {
        throw ValidationError("trajectory frame has " + std::to_string(row.size()) +
                              " values, model '" + model.name() + "' needs " +
                              std::to_string(model.config_dim()));
      }
      Configuration q;
      q.base_position = Vec3(row[0], row[1], row[2]);
      q.base_orientation = quat_from(json(std::vector<double>(row.begin() + 3, row.begin() + 7)));
      q.joint_angles = Eigen::Map<const VecX>(row.data() + 7, model.num_joints());
      traj.frames.push_back(q);
    }
    return traj;
  });
}

Trajectory load_trajectory(const std::filesystem::path& path, const KinematicModel& model) {
  return trajectory_from_json(read_text_file(path), model);
}

std::string source_motion_to_json(const SourceMotion& motion) {
  json j;
  j["dt"] = motion.dt;
  j["height"] = motion.height;
  j["keypoint_names"] = motion.keypoint_names;
  json frames = json::array();
  for (const auto& f : motion.frames) {
    json row = json::array();
    for (const auto& p : f) row.push_back(vec3_json(p));
    frames.push_back(row);
  }
  j["frames"] = frames;
  json tracks = json::object();
  for (const auto& [id, track] : motion.object_tracks) {
    json arr = json::array();
    for (const auto& p : track) {
      const auto a = pose_to_array(p);
      arr.push_back(std::vector<double>(a.begin(), a.end()));
    }
    tracks[id] = arr;
  }
  j["object_tracks"] = tracks;
  return j.dump(2) + "\n";
}

SourceMotion source_motion_from_json(std::string_view text) {
  const json j = parse_json(text, "source motion");
  SourceMotion m = with_schema("source motion", [&] {
    SourceMotion m;
    m.dt = j.at("dt").get<double>();
    m.height = j.at("height").get<double>();
    m.keypoint_names = j.at("keypoint_names").get<std::vector<std::string>>();
    for (const auto& f : j.at("frames")) {
      PointList row;
      for (const auto& p : f) row.push_back(vec3_from(p));
      m.frames.push_back(std::move(row));
    }
    if (j.contains("object_tracks")) {
      for (const auto& [id, arr] : j.at("object_tracks").items()) {
        std::vector<Pose> track;
        for (const auto& p : arr) track.push_back(pose_from_array(p.get<std::vector<double>>()));
        m.object_tracks[id] = track;
      }
    }
    return m;
  });
  m.validate();
  return m;
}

std::vector<FrameReport> trajectory_reports_from_json(std::string_view text) {
  const json j = parse_json(text, "trajectory");
  return with_schema("trajectory reports", [&] {
    std::vector<FrameReport> out;
    if (!j.contains("reports")) return out;
    for (const auto& f : j.at("reports")) out.push_back(report_from(f));
    return out;
  });
}

std::string augmentation_spec_to_json(const AugmentationSpec& spec) {
  json j;
  j["delta_p"] = vec3_json(spec.delta_p);
  j["delta_theta"] = quat_json(spec.delta_theta);
  j["t_m"] = spec.t_m ? json(*spec.t_m) : json(nullptr);
  j["tau_p"] = spec.tau_p;
  j["tau_theta"] = spec.tau_theta;
  j["object_scale"] = vec3_json(spec.object_scale);
  j["terrain_height_scale"] = spec.terrain_height_scale;
  j["terrain_depth_scale"] = spec.terrain_depth_scale;
  j["anchor"] = anchor_preset_name(spec.anchor);
  j["anchor_weights"] = std::vector<double>(spec.anchor_weights.data(),
                                            spec.anchor_weights.data() + spec.anchor_weights.size());
  j["anchor_feet"] = spec.anchor_feet;
  return j.dump(2) + "\n";
}

namespace {

AugmentationSpec spec_fields(const json& j) {
  AugmentationSpec s;
  if (j.contains("delta_p")) s.delta_p = vec3_from(j.at("delta_p"));
  if (j.contains("delta_theta")) s.delta_theta = quat_from(j.at("delta_theta"));
  if (j.contains("delta_yaw")) {
    s.delta_theta = Quat(Eigen::AngleAxisd(j.at("delta_yaw").get<double>(), Vec3::UnitZ()));
  }
  if (j.contains("t_m")) {
    const json& t = j.at("t_m");
    if (t.is_string()) {
      if (t.get<std::string>() != "auto") throw ParseError("t_m must be \"auto\" or a frame index");
    } else if (!t.is_null()) {
      s.t_m = t.get<int>();
    }
  }
  if (j.contains("tau_p")) s.tau_p = j.at("tau_p").get<double>();
  if (j.contains("tau_theta")) s.tau_theta = j.at("tau_theta").get<double>();
  if (j.contains("object_scale")) s.object_scale = vec3_from(j.at("object_scale"));
  if (j.contains("terrain_height_scale")) s.terrain_height_scale = j.at("terrain_height_scale").get<double>();
  if (j.contains("terrain_depth_scale")) s.terrain_depth_scale = j.at("terrain_depth_scale").get<double>();
  auto read_weights = [&](const json& w) {
    const auto v = w.get<std::vector<double>>();
    s.anchor_weights = Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
  };
  if (j.contains("anchor")) {
    const json& a = j.at("anchor");
    if (a.is_string()) {
      s.anchor = parse_anchor_preset(a.get<std::string>());
    } else {
      if (a.contains("preset")) s.anchor = parse_anchor_preset(a.at("preset").get<std::string>());
      if (a.contains("feet")) s.anchor_feet = a.at("feet").get<bool>();
      if (a.contains("weights")) read_weights(a.at("weights"));
    }
  }
  if (j.contains("anchor_weights")) read_weights(j.at("anchor_weights"));
  if (j.contains("anchor_feet")) s.anchor_feet = j.at("anchor_feet").get<bool>();
  return s;
}

}  // namespace

AugmentationSpec augmentation_spec_from_json(std::string_view text) {
  const json j = parse_json(text, "augmentation spec");
  AugmentationSpec s = with_schema("augmentation spec", [&] { return spec_fields(j); });
  s.validate();
  return s;
}

AugmentationFile augmentation_file_from_json(std::string_view text) {
  const json j = parse_json(text, "augmentation file");
  AugmentationFile f = with_schema("augmentation file", [&] {
    AugmentationFile f;
    f.base = spec_fields(j);
    if (j.contains("seed")) f.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("offsets")) {
      const json& o = j.at("offsets");
      if (o.is_array()) {
        for (const auto& v : o) f.offsets.push_back(vec3_from(v));
      } else if (o.contains("grid")) {
        const json& g = o.at("grid");
        const auto xs = g.at("x").get<std::vector<double>>();
        const auto ys = g.at("y").get<std::vector<double>>();
        const double z = g.value("z", 0.0);
        for (double x : xs)
          for (double y : ys) f.offsets.emplace_back(x, y, z);
      } else if (o.contains("random")) {
        const json& r = o.at("random");
        f.random_count = r.at("count").get<int>();
        f.ranges.offset_min = vec3_from(r.at("min"));
        f.ranges.offset_max = vec3_from(r.at("max"));
        if (r.contains("yaw_max")) f.ranges.yaw_max = r.at("yaw_max").get<double>();
      } else {
        throw ParseError("offsets must be a list, {\"grid\": ...} or {\"random\": ...}");
      }
    }
    if (j.contains("object_scales")) {
      for (const auto& v : j.at("object_scales")) f.object_scales.push_back(vec3_from(v));
    }
    if (j.contains("terrain_scales")) {
      for (const auto& v : j.at("terrain_scales")) {
        if (v.is_number()) {
          f.terrain_scales.emplace_back(v.get<double>(), 1.0);
        } else {
          if (!v.is_array() || v.size() != 2) throw ParseError("terrain scale must be h or [h, d]");
          f.terrain_scales.emplace_back(v[0].get<double>(), v[1].get<double>());
        }
      }
    }
    return f;
  });
  if (f.random_count < 0) throw ValidationError("random offset count must be non-negative");
  f.base.validate();
  return f;
}

std::vector<AugmentationSpec> AugmentationFile::expand() const {
  std::vector<AugmentationSpec> offsets;
  if (random_count > 0) {
    offsets = sample_specs(base, ranges, random_count, seed);
  } else if (!this->offsets.empty()) {
    for (const auto& d : this->offsets) {
      AugmentationSpec s = base;
      s.delta_p = d;
      offsets.push_back(s);
    }
  } else {
    offsets.push_back(base);
  }
  const std::vector<Vec3> objs = object_scales.empty() ? std::vector<Vec3>{base.object_scale} : object_scales;
  const std::vector<std::pair<double, double>> terr =
      terrain_scales.empty()
          ? std::vector<std::pair<double, double>>{{base.terrain_height_scale, base.terrain_depth_scale}}
          : terrain_scales;
  std::vector<AugmentationSpec> out;
  for (const auto& o : offsets)
    for (const auto& k : objs)
      for (const auto& [h, d] : terr) {
        AugmentationSpec s = o;
        s.object_scale = k;
        s.terrain_height_scale = h;
        s.terrain_depth_scale = d;
        s.validate();
        out.push_back(s);
      }
  return out;
}

}  // namespace meshret
