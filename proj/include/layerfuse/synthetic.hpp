#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "layerfuse/geometry.hpp"
#include "layerfuse/ingest.hpp"
#include "layerfuse/windowing.hpp"

namespace layerfuse {

enum class CameraPath { Line, Arc, Orbit };

CameraPath parse_camera_path(const std::string& name);
const char* to_string(CameraPath path);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

/// Synthetic scene description. Distances are in scene units; `noise_sigma` is the
/// per-coordinate standard deviation of the point noise in ground-truth units.
struct SceneConfig {
  int frames = 200;
  int height = 48;
  int width = 64;
  int layers = 3;  // background plane plus (layers - 1) fronto-parallel plates, at most 5
  CameraPath camera_path = CameraPath::Line;
  double noise_sigma = 0.0;
  Range window_scale_range{1.0, 1.0};
  Range window_rot_deg_range{0.0, 0.0};
  Range window_trans_range{0.0, 0.0};
  Range layer_scale_range{1.0, 1.0};
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on a degenerate configuration.
  void validate() const;
};

/// Corruption applied to one window's emitted prediction. The record and the
/// scene seed together replay the emission exactly.
struct WindowDistortion {
  Sim3Transform sim3;               // ground-truth window frame -> emitted local frame
  std::vector<double> layer_scales;  // per ground-truth layer, along the camera ray
  double noise_sigma = 0.0;          // in ground-truth units
};

/// Ground truth for one frame, rendered on demand.
struct GroundTruthFrame {
  int timestamp = 0;
  RigidPose pose;             // camera-to-world
  PointMap points;            // world coordinates
  std::vector<int> labels;    // ground-truth layer per pixel (-1 where nothing is hit)
  std::vector<double> depth;  // distance along the optical axis
};

struct CameraIntrinsics {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Piecewise-planar scene observed by a camera on a smooth parametric path.
/// Cameras look along -Z with +Y up. Layer 0 is a background plane; layers
/// 1.. are rectangular plates at decreasing depth that stay in view without
/// overlapping each other along the whole path.
class SyntheticScene {
 public:
  explicit SyntheticScene(SceneConfig config);

  const SceneConfig& config() const { return config_; }
  int frames() const { return config_.frames; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  /// Bounding-box diagonal of the observed geometry and camera path.
  double diameter() const { return diameter_; }

  /// Ground-truth camera-to-world pose of frame t (1-based).
  const RigidPose& pose(int t) const;
  /// Ground-truth trajectory, one pose per frame.
  const std::vector<RigidPose>& trajectory() const { return trajectory_; }

  GroundTruthFrame render_frame(int t) const;

  /// Distortion record of a window: an override when one was set, otherwise
  /// drawn deterministically from (seed, window index). Window 1 never carries
  /// layer-scale corruption since it defines the reference layering.
  WindowDistortion distortion(int window_index) const;
  void set_distortion(int window_index, WindowDistortion d);

  /// The rigid transform taking world coordinates to the ground-truth frame of
  /// `window` (the camera frame of its first frame).
  RigidPose world_to_window(const WindowSpec& window) const;

  /// Registration that maps window `w`'s emitted local frame into window 1's
  /// emitted frame, i.e. the ideal output of submap registration.
  Sim3Transform true_registration(const WindowSpec& first, const WindowSpec& w) const;

 private:
  struct Plate {
    double depth;      // plane at z = -depth
    Eigen::Vector2d lo;  // world x/y extent
    Eigen::Vector2d hi;
  };

  RigidPose path_pose(double u) const;

  SceneConfig config_;
  CameraIntrinsics intrinsics_;
  std::vector<Plate> plates_;  // index = layer id
  std::vector<RigidPose> trajectory_;
  std::map<int, WindowDistortion> overrides_;
  double diameter_ = 0.0;
};

SyntheticScene generate_scene(const SceneConfig& config);
SyntheticScene generate_scene(SceneConfig config, std::uint64_t seed);

/// Emits the window's prediction: ground truth re-expressed in the window frame,
/// the window Sim(3) corruption, per-layer scaling along each camera ray about the
/// camera center, then Gaussian noise. Confidence decreases with the per-pixel
/// deviation from the window-consistent geometry.
WindowPrediction emit_window(const SyntheticScene& scene, const WindowSpec& window);

}  // namespace layerfuse
