#include "meshret/metrics.hpp"

#include "meshret/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace meshret {

using json = nlohmann::json;

namespace {

void check_frames(const Trajectory& traj, const SceneDescription& scene) {
  if (traj.size() == 0) throw ValidationError("trajectory has no frames");
  if (auto n = scene.frame_count(); n && *n != traj.size()) {
    throw ValidationError("trajectory has " + std::to_string(traj.size()) +
                          " frames but the scene object tracks have " + std::to_string(*n));
  }
}

bool is_contact_keypoint(const std::string& name, TaskKind task) {
  auto has = [&](const char* s) { return name.find(s) != std::string::npos; };
  if (task == TaskKind::RobotObject) return has("hand");
  if (task == TaskKind::RobotTerrain) return has("hand") || has("toe") || has("heel");
  return false;
}

}  // namespace

PenetrationMetrics penetration_metrics(const Trajectory& traj, const KinematicModel& model,
                                       const SceneDescription& scene, const MetricOptions& opts) {
  check_frames(traj, scene);
  const auto pairs = resolve_collision_pairs(scene, model);
  PenetrationMetrics m;
  int bad = 0;
  for (int t = 0; t < traj.size(); ++t) {
    const auto poses = forward_kinematics(model, traj.frames[t]);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& pair : pairs) d = std::min(d, evaluate_pair(model, poses, scene, pair, t).distance);
    m.min_distance.push_back(d);
    if (d < -opts.penetration_tol) ++bad;
    if (d < 0.0) m.max_depth_cm = std::max(m.max_depth_cm, -100.0 * d);
  }
  m.duration = static_cast<double>(bad) / traj.size();
  return m;
}

SkatingMetrics foot_skating_metrics(const Trajectory& traj, const KinematicModel& model,
                                    const std::vector<FootSpec>& feet,
                                    const std::vector<std::vector<bool>>& stance,
                                    const MetricOptions& opts) {
  const int T = traj.size();
  if (static_cast<int>(stance.size()) != T) {
    throw ValidationError("stance flags have " + std::to_string(stance.size()) +
                          " frames, trajectory has " + std::to_string(T));
  }
  const int F = static_cast<int>(feet.size());
  std::vector<int> links;
  for (const auto& f : feet) links.push_back(model.link_index(f.robot_link));
  std::vector<std::vector<Vec3>> pos(T, std::vector<Vec3>(F));
  for (int t = 0; t < T; ++t) {
    const auto poses = forward_kinematics(model, traj.frames[t]);
    for (int f = 0; f < F; ++f) pos[t][f] = poses[links[f]] * feet[f].offset;
  }
  SkatingMetrics m;
  m.speed_cms.assign(T, 0.0);
  int stance_events = 0, skate_events = 0;
  for (const auto& row : stance) {
    if (static_cast<int>(row.size()) != F) throw ValidationError("stance flags do not match the foot list");
  }
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      if (!stance[t][f]) continue;
      ++stance_events;
      const int a = t > 0 && stance[t - 1][f] ? t - 1 : t;
      const int b = t + 1 < T && stance[t + 1][f] ? t + 1 : t;
      const double per_frame = b > a ? (pos[b][f] - pos[a][f]).head<2>().norm() / (b - a) : 0.0;
      const double cms = 100.0 * per_frame / traj.dt;
      m.speed_cms[t] = std::max(m.speed_cms[t], cms);
      if (per_frame > opts.skating_threshold) {
        ++skate_events;
        m.max_velocity_cms = std::max(m.max_velocity_cms, cms);
      }
    }
  }
  m.applicable = stance_events > 0;
  m.duration = stance_events > 0 ? static_cast<double>(skate_events) / stance_events : 0.0;
  return m;
}

ContactSchedule derive_contact_schedule(const SourceMotion& source, const SceneDescription& scene,
                                        TaskKind task, const MetricOptions& opts) {
  const int T = source.num_frames();
  ContactSchedule schedule(T);
  if (task == TaskKind::RobotOnly) return schedule;
  std::vector<int> kps;
  for (int i = 0; i < source.num_keypoints(); ++i) {
    if (is_contact_keypoint(source.keypoint_names[i], task)) kps.push_back(i);
  }
  const PairTarget kind = task == TaskKind::RobotObject ? PairTarget::Object : PairTarget::TerrainBox;
  const int targets = task == TaskKind::RobotObject ? static_cast<int>(scene.objects.size())
                                                    : static_cast<int>(scene.terrain.boxes.size());
  for (const auto& o : scene.objects) {
    if (static_cast<int>(o.track.size()) != T) {
      throw ValidationError("object track '" + o.id + "' has " + std::to_string(o.track.size()) +
                            " frames, source has " + std::to_string(T));
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < targets; ++j) {
      const auto [shape, pose] = target_geometry(scene, kind, j, t);
      for (int k : kps) {
        if (point_signed_distance(shape, pose, source.frames[t][k]) <= opts.source_contact_distance) {
          schedule[t].push_back({source.keypoint_names[k], kind, j});
        }
      }
    }
  }
  return schedule;
}

double keypoint_target_distance(const KinematicModel& model, const std::vector<Pose>& link_poses,
                                int keypoint, const SceneDescription& scene, PairTarget target,
                                int target_index, int frame) {
  const auto [shape, pose] = target_geometry(scene, target, target_index, frame);
  const int link = model.keypoints()[keypoint].link;
  double d = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < static_cast<int>(model.collisions().size()); ++i) {
    const auto& c = model.collisions()[i];
    if (c.link != link) continue;
    any = true;
    d = std::min(d, signed_distance(c.shape, primitive_pose(model, link_poses, i), shape, pose).distance);
  }
  if (!any) d = point_signed_distance(shape, pose, keypoint_position(model, link_poses, keypoint));
  return d;
}

std::optional<double> contact_preservation(const Trajectory& traj, const KinematicModel& model,
                                           const SceneDescription& scene,
                                           const ContactSchedule& schedule,
                                           const MetricOptions& opts) {
  if (static_cast<int>(schedule.size()) != traj.size()) {
    throw ValidationError("contact schedule has " + std::to_string(schedule.size()) +
                          " frames, trajectory has " + std::to_string(traj.size()));
  }
  int required = 0, held = 0;
  for (int t = 0; t < traj.size(); ++t) {
    if (schedule[t].empty()) continue;
    const auto poses = forward_kinematics(model, traj.frames[t]);
    for (const auto& req : schedule[t]) {
      ++required;
      const int k = model.keypoint_index(req.keypoint);
      if (keypoint_target_distance(model, poses, k, scene, req.target, req.target_index, t) <=
          opts.contact_threshold) {
        ++held;
      }
    }
  }
  if (required == 0) return std::nullopt;
  return static_cast<double>(held) / required;
}

QualityReport evaluate(const Trajectory& traj, const KinematicModel& model,
                       const SceneDescription& scene, const SourceMotion& source, TaskKind task,
                       const std::vector<FootSpec>& feet, const MetricOptions& opts) {
  check_frames(traj, scene);
  if (source.num_frames() != traj.size()) {
    throw ValidationError("trajectory has " + std::to_string(traj.size()) +
                          " frames but the source motion has " +
                          std::to_string(source.num_frames()));
  }
  QualityReport r;
  r.thresholds = opts;
  const PenetrationMetrics pen = penetration_metrics(traj, model, scene, opts);
  r.penetration_duration = pen.duration;
  r.penetration_max_depth_cm = pen.max_depth_cm;
  r.min_distance = pen.min_distance;

  std::vector<std::string> foot_names;
  for (const auto& f : feet) foot_names.push_back(f.source_keypoint);
  const auto stance = traj.size() >= 2 && !feet.empty()
                          ? detect_stance(source, foot_names, opts.stance_threshold)
                          : std::vector<std::vector<bool>>(traj.size(),
                                                           std::vector<bool>(feet.size(), false));
  const SkatingMetrics sk = foot_skating_metrics(traj, model, feet, stance, opts);
  r.skating_duration = sk.duration;
  r.skating_max_velocity_cms = sk.max_velocity_cms;
  r.skating_applicable = sk.applicable;
  r.foot_speed_cms = sk.speed_cms;

  const ContactSchedule schedule = derive_contact_schedule(source, source_scene(source, scene), task, opts);
  r.contact_preservation = contact_preservation(traj, model, scene, schedule, opts);
  return r;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string quality_report_to_json(const QualityReport& r) {
  json j;
  j["penetration"] = {{"duration", r.penetration_duration}, {"max_depth_cm", r.penetration_max_depth_cm}};
  j["skating"] = {{"duration", r.skating_duration},
                  {"max_velocity_cms", r.skating_max_velocity_cms},
                  {"applicable", r.skating_applicable}};
  j["contact_preservation"] =
      r.contact_preservation ? json(*r.contact_preservation) : json("not-applicable");
  json md = json::array();
  for (double d : r.min_distance) md.push_back(number_or_null(d));
  j["per_frame"] = {{"min_distance", md}, {"foot_speed_cms", r.foot_speed_cms}};
  j["thresholds"] = {{"penetration_tol", r.thresholds.penetration_tol},
                     {"contact_threshold", r.thresholds.contact_threshold},
                     {"source_contact_distance", r.thresholds.source_contact_distance},
                     {"skating_threshold", r.thresholds.skating_threshold},
                     {"stance_threshold", r.thresholds.stance_threshold}};
  return j.dump(2) + "\n";
}

QualityReport quality_report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("quality report: ") + e.what());
  }
  try {
    QualityReport r;
    r.penetration_duration = j.at("penetration").at("duration").get<double>();
    r.penetration_max_depth_cm = j.at("penetration").at("max_depth_cm").get<double>();
    r.skating_duration = j.at("skating").at("duration").get<double>();
    r.skating_max_velocity_cms = j.at("skating").at("max_velocity_cms").get<double>();
    r.skating_applicable = j.at("skating").at("applicable").get<bool>();
    const json& cp = j.at("contact_preservation");
    if (cp.is_number()) r.contact_preservation = cp.get<double>();
    for (const auto& d : j.at("per_frame").at("min_distance")) r.min_distance.push_back(number_from(d));
    r.foot_speed_cms = j.at("per_frame").at("foot_speed_cms").get<std::vector<double>>();
    const json& th = j.at("thresholds");
    r.thresholds.penetration_tol = th.at("penetration_tol").get<double>();
    r.thresholds.contact_threshold = th.at("contact_threshold").get<double>();
    r.thresholds.source_contact_distance = th.at("source_contact_distance").get<double>();
    r.thresholds.skating_threshold = th.at("skating_threshold").get<double>();
    r.thresholds.stance_threshold = th.at("stance_threshold").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("quality report: ") + e.what());
  }
}

}  // namespace meshret
