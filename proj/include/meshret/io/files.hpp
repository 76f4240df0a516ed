#pragma once

#include "meshret/augmentation.hpp"
#include "meshret/kinematics.hpp"
#include "meshret/metrics.hpp"
#include "meshret/retarget.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace meshret {

std::string read_text_file(const std::filesystem::path& path);  // throws IoError
// Creates parent directories; replaces the file.
void write_text_file(const std::filesystem::path& path, std::string_view text);

// {"dt", "joint_names", "frames": [[px, py, pz, qw, qx, qy, qz, joints...]],
//  "reports": [...]}; reports are written only when given.
std::string trajectory_to_json(const Trajectory& traj, const KinematicModel& model,
                               const std::vector<FrameReport>* reports = nullptr);
Trajectory trajectory_from_json(std::string_view text, const KinematicModel& model);
Trajectory load_trajectory(const std::filesystem::path& path, const KinematicModel& model);

// {"dt", "height", "keypoint_names", "frames": [[[x, y, z], ...], ...],
//  "object_tracks": {id: [[px, py, pz, qw, qx, qy, qz], ...]}}
std::string source_motion_to_json(const SourceMotion& motion);
SourceMotion source_motion_from_json(std::string_view text);

// Per-frame reports stored in a trajectory file; empty when it has none.
std::vector<FrameReport> trajectory_reports_from_json(std::string_view text);

std::string augmentation_spec_to_json(const AugmentationSpec& spec);
AugmentationSpec augmentation_spec_from_json(std::string_view text);

// Augmentation batch file: the single-spec keys give the base spec, with
// "t_m": "auto" for onset detection and "anchor" either a preset name or
// {"preset", "feet", "weights"}. The batch is the product of
//   "offsets": [[x, y, z], ...] | {"grid": {"x", "y", "z"}} |
//              {"random": {"count", "min", "max", "yaw_max"}} (drawn with "seed"),
//   "object_scales": [[sx, sy, sz], ...] and "terrain_scales": [h | [h, d], ...].
struct AugmentationFile {
  AugmentationSpec base;
  std::vector<Vec3> offsets;
  int random_count = 0;
  SamplerRanges ranges;
  std::uint64_t seed = 0;
  std::vector<Vec3> object_scales;
  std::vector<std::pair<double, double>> terrain_scales;

  std::vector<AugmentationSpec> expand() const;
};

AugmentationFile augmentation_file_from_json(std::string_view text);

}  // namespace meshret
