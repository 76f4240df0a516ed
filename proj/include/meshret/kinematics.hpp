#pragma once

#include "meshret/geometry/primitives.hpp"
#include "meshret/math.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meshret {

enum class JointType { Floating, Revolute };

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();  // unit vector in the joint frame
  double q_min = 0.0;         // rad
  double q_max = 0.0;
  double v_min = 0.0;  // rad/s
  double v_max = 0.0;
};

struct Link {
  std::string name;
  int parent = -1;
  Pose origin = Pose::Identity();  // parent link frame -> joint frame
  Joint joint;
  int joint_index = -1;  // position in Configuration::joint_angles, -1 for the root
};

struct KeypointFrame {
  std::string name;
  int link = 0;
  Vec3 offset = Vec3::Zero();
};

struct Configuration {
  Vec3 base_position = Vec3::Zero();
  Quat base_orientation = Quat::Identity();
  VecX joint_angles;

  int tangent_dim() const { return 6 + static_cast<int>(joint_angles.size()); }
};

// Increment coordinates: [base translation (3), base rotation tangent (3), joints].
struct TangentIncrement {
  Vec3 base_translation = Vec3::Zero();
  Vec3 base_rotation = Vec3::Zero();
  VecX joints;

  static TangentIncrement from_vector(const VecX& v);
  VecX to_vector() const;
  int dim() const { return 6 + static_cast<int>(joints.size()); }
};

struct Trajectory {
  std::vector<Configuration> frames;
  double dt = 1.0 / 30.0;

  int size() const { return static_cast<int>(frames.size()); }
};

// Immutable floating-base kinematic tree. Links are stored in topological
// order (parents precede children); link 0 carries the floating base.
class KinematicModel {
 public:
  KinematicModel() = default;
  KinematicModel(std::string name, std::vector<Link> links,
                 std::vector<KeypointFrame> keypoints,
                 std::vector<CollisionPrimitive> collisions);

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<KeypointFrame>& keypoints() const { return keypoints_; }
  const std::vector<CollisionPrimitive>& collisions() const { return collisions_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }

  int num_links() const { return static_cast<int>(links_.size()); }
  int num_joints() const { return static_cast<int>(joint_links_.size()); }
  int tangent_dim() const { return 6 + num_joints(); }
  int config_dim() const { return 7 + num_joints(); }

  // Link index that owns revolute joint j.
  int joint_link(int j) const { return joint_links_[j]; }
  // Links with revolute joints on the path from `link` to the root, inclusive.
  const std::vector<int>& joint_chain(int link) const { return joint_chains_[link]; }

  std::optional<int> find_keypoint(std::string_view name) const;
  int keypoint_index(std::string_view name) const;  // throws ValidationError
  std::optional<int> find_link(std::string_view name) const;
  int link_index(std::string_view name) const;  // throws ValidationError
  std::optional<int> find_joint(std::string_view name) const;

  VecX q_min() const;
  VecX q_max() const;
  VecX v_min() const;
  VecX v_max() const;

  // Nominal standing pose used to warm-start the first frame.
  const Configuration& home() const { return home_; }
  void set_home(const Configuration& home);
  // Nominal standing height in meters (used for source scaling).
  double height() const { return height_; }
  void set_height(double h) { height_ = h; }

  Configuration zero_configuration() const;

 private:
  void validate_and_index();

  std::string name_;
  std::vector<Link> links_;
  std::vector<KeypointFrame> keypoints_;
  std::vector<CollisionPrimitive> collisions_;
  std::vector<std::string> joint_names_;
  std::vector<int> joint_links_;
  std::vector<std::vector<int>> joint_chains_;
  Configuration home_;
  double height_ = 1.0;
};

// JSON model description (see README for the schema).
KinematicModel load_model(const std::filesystem::path& model_file);
KinematicModel parse_model(std::string_view json_text);
std::string model_to_json(const KinematicModel& model);

void check_dimension(const KinematicModel& model, const Configuration& q);

// World pose of every link.
std::vector<Pose> forward_kinematics(const KinematicModel& model, const Configuration& q);

PointList keypoint_positions(const KinematicModel& model, const Configuration& q,
                             const std::vector<std::string>& names);
Vec3 keypoint_position(const KinematicModel& model, const std::vector<Pose>& link_poses,
                       int keypoint);

// 3 x tangent_dim Jacobian of a keypoint position with respect to
// TangentIncrement coordinates.
MatX keypoint_jacobian(const KinematicModel& model, const Configuration& q,
                       std::string_view name);

// Jacobian of a world point rigidly attached to `link`, given precomputed
// link poses.
MatX point_jacobian(const KinematicModel& model, const Configuration& q,
                    const std::vector<Pose>& link_poses, int link, const Vec3& world_point);
// Angular velocity Jacobian of `link` (world frame).
MatX angular_jacobian(const KinematicModel& model, const std::vector<Pose>& link_poses,
                      int link);

Configuration apply_increment(const Configuration& q, const TangentIncrement& dq);
Configuration apply_increment(const Configuration& q, const VecX& dq);

// Tangent-space difference q - reference: [dp, log(R R_ref^T), dtheta].
VecX configuration_difference(const Configuration& q, const Configuration& reference);

// Clamp joint angles into [lo, hi] elementwise.
void clamp_joints(Configuration& q, const VecX& lo, const VecX& hi);

}  // namespace meshret
