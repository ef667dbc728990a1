#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "layerfuse/lsa.hpp"
#include "layerfuse/metrics.hpp"
#include "layerfuse/registration.hpp"
#include "layerfuse/synthetic.hpp"

namespace layerfuse {

enum class InputMode { Files, Synthetic };
enum class PointCloudFormat { None, PlyAscii, PlyBinary };

struct PipelineConfig {
  int window_len = 20;
  int overlap = 5;
  RegistrationConfig registration;
  LsaParams lsa;

  DepthAlign depth_align = DepthAlign::Median;
  int rpe_delta = 1;
  IcpConfig icp;

  InputMode input_mode = InputMode::Synthetic;
  std::string input_dir;
  std::string output_dir;
  PointCloudFormat export_pointcloud = PointCloudFormat::PlyBinary;
  bool export_trajectory = true;
  bool export_depth = false;  // whole-sequence estimate container
  double export_voxel = 0.0;  // 0 keeps every point
  bool store_points = true;

  SceneConfig scene;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

/// Every recognized key, in documentation order.
const std::vector<std::string>& config_keys();

/// Sets one key from its text form; unknown keys and malformed values throw
/// std::invalid_argument.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& cfg, const std::string& key);

/// Flat `key = value` lines; `#` starts a comment; blank lines are ignored.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// All keys with their current values, loadable by parse_config.
std::string config_to_text(const PipelineConfig& cfg);

}  // namespace layerfuse
