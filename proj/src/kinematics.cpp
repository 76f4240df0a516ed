#include "meshret/kinematics.hpp"

#include "meshret/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace meshret {

using nlohmann::json;

TangentIncrement TangentIncrement::from_vector(const VecX& v) {
  if (v.size() < 6) {
    throw ValidationError("tangent increment needs at least 6 coordinates");
  }
  TangentIncrement dq;
  dq.base_translation = v.segment<3>(0);
  dq.base_rotation = v.segment<3>(3);
  dq.joints = v.tail(v.size() - 6);
  return dq;
}

VecX TangentIncrement::to_vector() const {
  VecX v(dim());
  v.segment<3>(0) = base_translation;
  v.segment<3>(3) = base_rotation;
  v.tail(joints.size()) = joints;
  return v;
}

KinematicModel::KinematicModel(std::string name, std::vector<Link> links,
                               std::vector<KeypointFrame> keypoints,
                               std::vector<CollisionPrimitive> collisions)
    : name_(std::move(name)),
      links_(std::move(links)),
      keypoints_(std::move(keypoints)),
      collisions_(std::move(collisions)) {
  validate_and_index();
  home_ = zero_configuration();
}

void KinematicModel::validate_and_index() {
  if (links_.empty()) {
    throw ValidationError("model has no links");
  }
  std::set<std::string> link_names;
  int roots = 0;
  joint_names_.clear();
  joint_links_.clear();
  for (int i = 0; i < num_links(); ++i) {
    Link& link = links_[i];
    if (!link_names.insert(link.name).second) {
      throw ValidationError("duplicate link name '" + link.name + "'");
    }
    if (link.parent < 0) {
      ++roots;
      if (i != 0) {
        throw ValidationError("root link must come first, found '" + link.name + "'");
      }
      if (link.joint.type != JointType::Floating) {
        throw ValidationError("root link '" + link.name + "' must have a floating joint");
      }
      link.joint_index = -1;
      continue;
    }
    if (link.parent >= i) {
      throw ValidationError("link '" + link.name + "' precedes its parent");
    }
    if (link.joint.type != JointType::Revolute) {
      throw ValidationError("only the root may carry a floating joint ('" + link.name + "')");
    }
    const double axis_norm = link.joint.axis.norm();
    if (std::abs(axis_norm - 1.0) > 1e-6) {
      throw ValidationError("joint axis of '" + link.name + "' is not a unit vector");
    }
    link.joint.axis /= axis_norm;
    const Joint& j = link.joint;
    if (!(j.q_min <= j.q_max)) {
      throw ValidationError("joint '" + j.name + "' has q_min > q_max");
    }
    if (!(j.v_min <= 0.0 && 0.0 <= j.v_max)) {
      throw ValidationError("joint '" + j.name + "' velocity limits must bracket zero");
    }
    link.joint_index = static_cast<int>(joint_links_.size());
    joint_links_.push_back(i);
    joint_names_.push_back(j.name.empty() ? link.name : j.name);
  }
  if (roots != 1) {
    throw ValidationError("model must have exactly one root link");
  }
  std::set<std::string> joint_set(joint_names_.begin(), joint_names_.end());
  if (joint_set.size() != joint_names_.size()) {
    throw ValidationError("duplicate joint names");
  }

  joint_chains_.assign(links_.size(), {});
  for (int i = 0; i < num_links(); ++i) {
    for (int l = i; l > 0; l = links_[l].parent) {
      joint_chains_[i].push_back(l);
    }
  }

  std::set<std::string> kp_names;
  for (const auto& kp : keypoints_) {
    if (!kp_names.insert(kp.name).second) {
      throw ValidationError("duplicate keypoint name '" + kp.name + "'");
    }
    if (kp.link < 0 || kp.link >= num_links()) {
      throw ValidationError("keypoint '" + kp.name + "' references a missing link");
    }
  }
  for (const auto& c : collisions_) {
    if (c.link < 0 || c.link >= num_links()) {
      throw ValidationError("collision primitive '" + c.name + "' references a missing link");
    }
    if (c.shape.type == ShapeType::HalfSpace) {
      throw ValidationError("half-space primitives cannot be attached to links");
    }
    c.shape.validate();
  }
}

std::optional<int> KinematicModel::find_keypoint(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(keypoints_.size()); ++i) {
    if (keypoints_[i].name == name) return i;
  }
  return std::nullopt;
}

int KinematicModel::keypoint_index(std::string_view name) const {
  if (auto i = find_keypoint(name)) return *i;
  throw ValidationError("unknown keypoint '" + std::string(name) + "'");
}

std::optional<int> KinematicModel::find_link(std::string_view name) const {
  for (int i = 0; i < num_links(); ++i) {
    if (links_[i].name == name) return i;
  }
  return std::nullopt;
}

int KinematicModel::link_index(std::string_view name) const {
  if (auto i = find_link(name)) return *i;
  throw ValidationError("unknown link '" + std::string(name) + "'");
}

std::optional<int> KinematicModel::find_joint(std::string_view name) const {
  for (int j = 0; j < num_joints(); ++j) {
    if (joint_names_[j] == name) return j;
  }
  return std::nullopt;
}

VecX KinematicModel::q_min() const {
  VecX v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = links_[joint_links_[j]].joint.q_min;
  return v;
}

VecX KinematicModel::q_max() const {
  VecX v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = links_[joint_links_[j]].joint.q_max;
  return v;
}

VecX KinematicModel::v_min() const {
  VecX v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = links_[joint_links_[j]].joint.v_min;
  return v;
}

VecX KinematicModel::v_max() const {
  VecX v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = links_[joint_links_[j]].joint.v_max;
  return v;
}

void KinematicModel::set_home(const Configuration& home) {
  check_dimension(*this, home);
  home_ = home;
}

Configuration KinematicModel::zero_configuration() const {
  Configuration q;
  q.joint_angles = VecX::Zero(num_joints());
  clamp_joints(q, q_min(), q_max());
  return q;
}

void check_dimension(const KinematicModel& model, const Configuration& q) {
  if (q.joint_angles.size() != model.num_joints()) {
    std::ostringstream os;
    os << "configuration has " << q.joint_angles.size() << " joint angles, model '"
       << model.name() << "' expects " << model.num_joints();
    throw ValidationError(os.str());
  }
}

std::vector<Pose> forward_kinematics(const KinematicModel& model, const Configuration& q) {
  check_dimension(model, q);
  const auto& links = model.links();
  std::vector<Pose> poses(links.size());
  poses[0] = make_pose(q.base_position, q.base_orientation);
  for (std::size_t i = 1; i < links.size(); ++i) {
    const Link& link = links[i];
    const double angle = q.joint_angles[link.joint_index];
    Pose joint_rotation = Pose::Identity();
    joint_rotation.linear() = Eigen::AngleAxisd(angle, link.joint.axis).toRotationMatrix();
    poses[i] = poses[link.parent] * link.origin * joint_rotation;
  }
  return poses;
}

Vec3 keypoint_position(const KinematicModel& model, const std::vector<Pose>& link_poses,
                       int keypoint) {
  const KeypointFrame& kp = model.keypoints()[keypoint];
  return link_poses[kp.link] * kp.offset;
}

PointList keypoint_positions(const KinematicModel& model, const Configuration& q,
                             const std::vector<std::string>& names) {
  std::vector<int> indices;
  indices.reserve(names.size());
  for (const auto& n : names) indices.push_back(model.keypoint_index(n));
  const auto poses = forward_kinematics(model, q);
  PointList out;
  out.reserve(names.size());
  for (int i : indices) out.push_back(keypoint_position(model, poses, i));
  return out;
}

MatX point_jacobian(const KinematicModel& model, const Configuration& q,
                    const std::vector<Pose>& link_poses, int link, const Vec3& world_point) {
  MatX jac = MatX::Zero(3, model.tangent_dim());
  jac.block<3, 3>(0, 0).setIdentity();
  jac.block<3, 3>(0, 3) = -skew(world_point - q.base_position);
  const auto& links = model.links();
  for (int l : model.joint_chain(link)) {
    const Link& lk = links[l];
    // The joint frame shares its origin and axis with the child link frame.
    const Vec3 axis_world = link_poses[l].linear() * lk.joint.axis;
    const Vec3 origin = link_poses[l].translation();
    jac.col(6 + lk.joint_index) = axis_world.cross(world_point - origin);
  }
  return jac;
}

MatX angular_jacobian(const KinematicModel& model, const std::vector<Pose>& link_poses,
                      int link) {
  MatX jac = MatX::Zero(3, model.tangent_dim());
  jac.block<3, 3>(0, 3).setIdentity();
  const auto& links = model.links();
  for (int l : model.joint_chain(link)) {
    jac.col(6 + links[l].joint_index) = link_poses[l].linear() * links[l].joint.axis;
  }
  return jac;
}

MatX keypoint_jacobian(const KinematicModel& model, const Configuration& q,
                       std::string_view name) {
  const int k = model.keypoint_index(name);
  const auto poses = forward_kinematics(model, q);
  const Vec3 p = keypoint_position(model, poses, k);
  return point_jacobian(model, q, poses, model.keypoints()[k].link, p);
}

Configuration apply_increment(const Configuration& q, const TangentIncrement& dq) {
  if (dq.joints.size() != q.joint_angles.size()) {
    throw ValidationError("increment dimension does not match configuration");
  }
  Configuration out;
  out.base_position = q.base_position + dq.base_translation;
  out.base_orientation = (quat_exp(dq.base_rotation) * q.base_orientation).normalized();
  out.joint_angles = q.joint_angles + dq.joints;
  return out;
}

Configuration apply_increment(const Configuration& q, const VecX& dq) {
  if (dq.size() != q.tangent_dim()) {
    throw ValidationError("increment dimension does not match configuration");
  }
  Configuration out;
  out.base_position = q.base_position + dq.segment<3>(0);
  out.base_orientation = (quat_exp(dq.segment<3>(3)) * q.base_orientation).normalized();
  out.joint_angles = q.joint_angles + dq.tail(q.joint_angles.size());
  return out;
}

VecX configuration_difference(const Configuration& q, const Configuration& reference) {
  if (q.joint_angles.size() != reference.joint_angles.size()) {
    throw ValidationError("configuration dimensions differ");
  }
  VecX d(q.tangent_dim());
  d.segment<3>(0) = q.base_position - reference.base_position;
  d.segment<3>(3) = quat_log(q.base_orientation * reference.base_orientation.conjugate());
  d.tail(q.joint_angles.size()) = q.joint_angles - reference.joint_angles;
  return d;
}

void clamp_joints(Configuration& q, const VecX& lo, const VecX& hi) {
  q.joint_angles = q.joint_angles.cwiseMax(lo).cwiseMin(hi);
}

// ---------------------------------------------------------------- JSON I/O

namespace {

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(std::string("expected a 3-vector for ") + what);
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Pose read_origin(const json& j) {
  Pose p = Pose::Identity();
  if (j.is_null()) return p;
  if (j.contains("xyz")) p.translation() = read_vec3(j["xyz"], "origin.xyz");
  if (j.contains("rpy")) p.linear() = rpy_to_matrix(read_vec3(j["rpy"], "origin.rpy"));
  return p;
}

json write_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json write_origin(const Pose& p) {
  const Vec3 rpy = p.linear().eulerAngles(2, 1, 0);
  return json{{"xyz", write_vec3(p.translation())},
              {"rpy", json::array({rpy[2], rpy[1], rpy[0]})}};
}

Shape read_shape(const json& c) {
  const std::string shape = c.at("shape").get<std::string>();
  const auto params = c.at("params").get<std::vector<double>>();
  auto need = [&](std::size_t n) {
    if (params.size() != n) {
      throw ParseError("collision shape '" + shape + "' expects " + std::to_string(n) +
                       " parameters");
    }
  };
  if (shape == "sphere") {
    need(1);
    return Shape::sphere(params[0]);
  }
  if (shape == "capsule") {
    need(2);
    return Shape::capsule(params[0], params[1]);
  }
  if (shape == "box") {
    need(3);
    return Shape::box(Vec3(params[0], params[1], params[2]));
  }
  throw ParseError("unsupported collision shape '" + shape + "'");
}

json write_shape(const Shape& s) {
  switch (s.type) {
    case ShapeType::Sphere:
      return json{{"shape", "sphere"}, {"params", json::array({s.radius})}};
    case ShapeType::Capsule:
      return json{{"shape", "capsule"}, {"params", json::array({s.radius, s.half_length})}};
    case ShapeType::Box:
      return json{{"shape", "box"}, {"params", write_vec3(s.half_extents)}};
    case ShapeType::HalfSpace:
      break;
  }
  throw ValidationError("half-space cannot be serialized as a link primitive");
}

}  // namespace

KinematicModel parse_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  try {
    const json& jlinks = doc.at("links");
    if (!jlinks.is_array() || jlinks.empty()) {
      throw ParseError("model file: 'links' must be a non-empty array");
    }
    // Resolve names and order links so that parents precede children.
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < jlinks.size(); ++i) {
      const std::string name = jlinks[i].at("name").get<std::string>();
      if (!by_name.emplace(name, i).second) {
        throw ValidationError("duplicate link name '" + name + "'");
      }
    }
    std::vector<int> parent_of(jlinks.size(), -1);
    for (std::size_t i = 0; i < jlinks.size(); ++i) {
      const json& jl = jlinks[i];
      if (jl.contains("parent") && !jl["parent"].is_null()) {
        const std::string p = jl["parent"].get<std::string>();
        auto it = by_name.find(p);
        if (it == by_name.end()) {
          throw ValidationError("link '" + jl["name"].get<std::string>() +
                                "' has missing parent '" + p + "'");
        }
        parent_of[i] = static_cast<int>(it->second);
      }
    }
    std::vector<std::size_t> order;
    std::vector<int> state(jlinks.size(), 0);  // 0 new, 1 visiting, 2 done
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
      if (state[i] == 2) return;
      if (state[i] == 1) {
        throw ValidationError("cycle in link graph at '" +
                              jlinks[i]["name"].get<std::string>() + "'");
      }
      state[i] = 1;
      if (parent_of[i] >= 0) visit(static_cast<std::size_t>(parent_of[i]));
      state[i] = 2;
      order.push_back(i);
    };
    for (std::size_t i = 0; i < jlinks.size(); ++i) visit(i);

    std::vector<int> new_index(jlinks.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_index[order[k]] = static_cast<int>(k);

    std::vector<Link> links;
    std::vector<KeypointFrame> keypoints;
    std::vector<CollisionPrimitive> collisions;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const json& jl = jlinks[order[k]];
      Link link;
      link.name = jl.at("name").get<std::string>();
      link.parent = parent_of[order[k]] >= 0 ? new_index[parent_of[order[k]]] : -1;
      link.origin = read_origin(jl.value("origin", json()));
      const json jj = jl.value("joint", json::object());
      const std::string type = jj.value("type", link.parent < 0 ? "floating" : "revolute");
      if (type == "floating") {
        link.joint.type = JointType::Floating;
      } else if (type == "revolute") {
        link.joint.type = JointType::Revolute;
      } else {
        throw ParseError("unsupported joint type '" + type + "' on link '" + link.name + "'");
      }
      link.joint.name = jj.value("name", link.name);
      if (link.joint.type == JointType::Revolute) {
        link.joint.axis = read_vec3(jj.at("axis"), "joint.axis");
        const json& lim = jj.at("limits");
        const auto pos = lim.at("pos").get<std::vector<double>>();
        const auto vel = lim.at("vel").get<std::vector<double>>();
        if (pos.size() != 2 || vel.size() != 2) {
          throw ParseError("joint limits must be [lo, hi] pairs");
        }
        link.joint.q_min = pos[0];
        link.joint.q_max = pos[1];
        link.joint.v_min = vel[0];
        link.joint.v_max = vel[1];
      }
      for (const json& jc : jl.value("collision", json::array())) {
        CollisionPrimitive prim;
        prim.shape = read_shape(jc);
        prim.link = static_cast<int>(k);
        prim.local = read_origin(jc.value("origin", json()));
        prim.name = jc.value("name", link.name + "_" + std::to_string(collisions.size()));
        collisions.push_back(prim);
      }
      for (const json& jk : jl.value("keypoints", json::array())) {
        KeypointFrame kp;
        kp.name = jk.at("name").get<std::string>();
        kp.link = static_cast<int>(k);
        kp.offset = jk.contains("offset") ? read_vec3(jk["offset"], "keypoint.offset")
                                          : Vec3::Zero();
        keypoints.push_back(kp);
      }
      links.push_back(std::move(link));
    }

    KinematicModel model(doc.value("name", std::string("robot")), std::move(links),
                         std::move(keypoints), std::move(collisions));
    if (doc.contains("height")) model.set_height(doc["height"].get<double>());
    if (!(model.height() > 0.0)) throw ValidationError("model height must be positive");
    if (doc.contains("home")) {
      const json& jh = doc["home"];
      Configuration home = model.zero_configuration();
      if (jh.contains("base")) {
        const auto b = jh["base"].get<std::vector<double>>();
        if (b.size() != 7) throw ParseError("home.base must be [px,py,pz,qw,qx,qy,qz]");
        home.base_position = Vec3(b[0], b[1], b[2]);
        home.base_orientation = Quat(b[3], b[4], b[5], b[6]).normalized();
      }
      const json joints = jh.value("joints", json::object());
      for (const auto& [jname, value] : joints.items()) {
        const auto j = model.find_joint(jname);
        if (!j) throw ValidationError("home pose names unknown joint '" + jname + "'");
        home.joint_angles[*j] = value.get<double>();
      }
      clamp_joints(home, model.q_min(), model.q_max());
      model.set_home(home);
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

KinematicModel load_model(const std::filesystem::path& model_file) {
  std::ifstream in(model_file);
  if (!in) throw IoError("cannot open model file '" + model_file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string model_to_json(const KinematicModel& model) {
  json doc;
  doc["name"] = model.name();
  doc["height"] = model.height();
  json links = json::array();
  for (int i = 0; i < model.num_links(); ++i) {
    const Link& l = model.links()[i];
    json jl;
    jl["name"] = l.name;
    if (l.parent >= 0) {
      jl["parent"] = model.links()[l.parent].name;
      jl["origin"] = write_origin(l.origin);
      jl["joint"] = json{{"name", l.joint.name},
                         {"type", "revolute"},
                         {"axis", write_vec3(l.joint.axis)},
                         {"limits",
                          {{"pos", json::array({l.joint.q_min, l.joint.q_max})},
                           {"vel", json::array({l.joint.v_min, l.joint.v_max})}}}};
    } else {
      jl["joint"] = json{{"type", "floating"}};
    }
    json jc = json::array();
    for (const auto& c : model.collisions()) {
      if (c.link != i) continue;
      json e = write_shape(c.shape);
      e["name"] = c.name;
      e["origin"] = write_origin(c.local);
      jc.push_back(e);
    }
    jl["collision"] = jc;
    json jk = json::array();
    for (const auto& kp : model.keypoints()) {
      if (kp.link == i) jk.push_back(json{{"name", kp.name}, {"offset", write_vec3(kp.offset)}});
    }
    jl["keypoints"] = jk;
    links.push_back(jl);
  }
  doc["links"] = links;
  const Configuration& h = model.home();
  json joints = json::object();
  for (int j = 0; j < model.num_joints(); ++j) joints[model.joint_names()[j]] = h.joint_angles[j];
  doc["home"] = json{{"base",
                      json::array({h.base_position.x(), h.base_position.y(), h.base_position.z(),
                                   h.base_orientation.w(), h.base_orientation.x(),
                                   h.base_orientation.y(), h.base_orientation.z()})},
                     {"joints", joints}};
  return doc.dump(2);
}

}  // namespace meshret
