#pragma once

#include "meshret/math.hpp"
#include "meshret/retarget.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace meshret {

enum class BvhChannel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

const char* bvh_channel_name(BvhChannel c);

struct BvhJoint {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();  // file units
  std::vector<BvhChannel> channels;
  std::optional<Vec3> end_site;  // End Site offset, file units
};

struct BvhDocument {
  std::vector<BvhJoint> joints;  // parents precede children
  double frame_time = 1.0 / 30.0;
  std::vector<std::vector<double>> frames;  // channel values, degrees for rotations

  int num_channels() const;
  int num_frames() const { return static_cast<int>(frames.size()); }
  std::optional<int> find_joint(std::string_view name) const;
  // Throws ValidationError on a bad frame time, channel layout or frame width.
  void validate() const;
};

// Errors carry the 1-based line number.
BvhDocument parse_bvh(std::string_view text);
BvhDocument load_bvh(const std::filesystem::path& path);
std::string serialize_bvh(const BvhDocument& doc);

// World transform of every joint at one frame in file units and axes. Each
// joint translates by its offset plus any position channels, then rotates by
// its rotation channels composed intrinsically in declared order.
std::vector<Pose> bvh_joint_poses(const BvhDocument& doc, int frame);

enum class UpAxis { Y, Z };

struct BvhImport {
  // (keypoint name, joint name); "joint/end" selects the joint's End Site.
  std::vector<std::pair<std::string, std::string>> keypoints;
  double unit_scale = 0.01;  // meters per file unit
  UpAxis up = UpAxis::Y;     // Y-up files map (x, y, z) to (z, x, y)
  std::optional<double> demonstrator_height;  // m
  std::string head_keypoint = "head";
};

// Every joint (and End Site as "<joint>_end") selected under its own name.
BvhImport default_bvh_import(const BvhDocument& doc);

// Keypoint positions in meters with z up. Without a demonstrator height the
// largest head keypoint height over the first 30 frames is used.
SourceMotion bvh_to_source(const BvhDocument& doc, const BvhImport& import);

}  // namespace meshret
