#include "layerfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "layerfuse/parallel.hpp"

namespace layerfuse {

namespace {

constexpr double kBackgroundDepth = 12.0;
constexpr double kDepthRatio = 0.42;  // successive plates; > 2x apart so [0.7, 1.4] scaling never reorders them
constexpr int kMaxLayers = 5;
constexpr double kDeg = std::numbers::pi / 180.0;

// Plate centers and half extents in the reference camera's normalized image
// coordinates ([-1, 1] across the image, +v up).
constexpr double kPlateCenters[kMaxLayers - 1][2] = {
    {-0.48, 0.36}, {0.46, -0.32}, {0.48, 0.44}, {-0.46, -0.44}};
constexpr double kPlateHalfU = 0.2;
constexpr double kPlateHalfV = 0.24;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

Sim3Transform to_sim3(const RigidPose& p) {
  Sim3Transform s;
  s.rotation = p.rotation;
  s.translation = p.translation;
  return s;
}

void check_range(const Range& r, const char* name, bool positive) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi || r.lo < 0.0 ||
      (positive && r.lo <= 0.0)) {
    throw std::invalid_argument(std::string("scene config: invalid ") + name);
  }
}

Mat3 rot_y(double a) { return axis_angle(Vec3::UnitY(), a); }
Mat3 rot_x(double a) { return axis_angle(Vec3::UnitX(), a); }

}  // namespace

CameraPath parse_camera_path(const std::string& name) {
  if (name == "line") return CameraPath::Line;
  if (name == "arc") return CameraPath::Arc;
  if (name == "orbit") return CameraPath::Orbit;
  throw std::invalid_argument("unknown camera_path '" + name + "' (line|arc|orbit)");
}

const char* to_string(CameraPath path) {
  switch (path) {
    case CameraPath::Line: return "line";
    case CameraPath::Arc: return "arc";
    case CameraPath::Orbit: return "orbit";
  }
  return "line";
}

void SceneConfig::validate() const {
  if (frames < 1) throw std::invalid_argument("scene config: frames must be >= 1");
  if (layers < 1) throw std::invalid_argument("scene config: layers must be >= 1");
  if (layers > kMaxLayers) {
    throw std::invalid_argument("scene config: at most " + std::to_string(kMaxLayers) + " layers");
  }
  if (height < 4 || width < 4) throw std::invalid_argument("scene config: image smaller than 4x4");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("scene config: noise_sigma must be >= 0");
  }
  check_range(window_scale_range, "window_scale_range", true);
  check_range(window_rot_deg_range, "window_rot_deg_range", false);
  check_range(window_trans_range, "window_trans_range", false);
  check_range(layer_scale_range, "layer_scale_range", true);
}

SyntheticScene::SyntheticScene(SceneConfig config) : config_(std::move(config)) {
  config_.validate();
  intrinsics_.focal = 0.8 * config_.width;
  intrinsics_.cx = 0.5 * config_.width;
  intrinsics_.cy = 0.5 * config_.height;

  const double half_u = intrinsics_.cx / intrinsics_.focal;
  const double half_v = intrinsics_.cy / intrinsics_.focal;
  plates_.push_back({kBackgroundDepth, Eigen::Vector2d::Constant(-1e300),
                     Eigen::Vector2d::Constant(1e300)});
  double depth = kBackgroundDepth;
  for (int k = 1; k < config_.layers; ++k) {
    depth *= kDepthRatio;
    const double cu = kPlateCenters[k - 1][0];
    const double cv = kPlateCenters[k - 1][1];
    Plate p;
    p.depth = depth;
    p.lo = {(cu - kPlateHalfU) * half_u * depth, (cv - kPlateHalfV) * half_v * depth};
    p.hi = {(cu + kPlateHalfU) * half_u * depth, (cv + kPlateHalfV) * half_v * depth};
    plates_.push_back(p);
  }

  trajectory_.reserve(config_.frames);
  for (int t = 1; t <= config_.frames; ++t) {
    const double u = config_.frames > 1 ? static_cast<double>(t - 1) / (config_.frames - 1) : 0.0;
    trajectory_.push_back(path_pose(u));
  }

  Eigen::AlignedBox3d box;
  for (const auto& pose : trajectory_) box.extend(pose.translation);
  for (int t : {1, (config_.frames + 1) / 2, config_.frames}) {
    const GroundTruthFrame gt = render_frame(t);
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
      if (gt.points.valid(i)) box.extend(gt.points.point(i));
    }
  }
  diameter_ = box.diagonal().norm();
}

RigidPose SyntheticScene::path_pose(double u) const {
  const double s = 2.0 * u - 1.0;
  RigidPose pose;
  switch (config_.camera_path) {
    case CameraPath::Line:
      pose.translation = {0.3 * s, 0.04 * std::sin(std::numbers::pi * s), -0.1 * (s + 1.0)};
      pose.rotation = rot_y(1.5 * kDeg * std::sin(0.5 * std::numbers::pi * s)) *
                      rot_x(1.0 * kDeg * std::cos(std::numbers::pi * s));
      break;
    case CameraPath::Arc: {
      const double phi = 12.0 * kDeg * s;
      pose.translation = {1.4 * std::sin(phi), 0.03 * s, 1.4 * (1.0 - std::cos(phi))};
      pose.rotation = rot_y(0.4 * phi);
      break;
    }
    case CameraPath::Orbit: {
      const Vec3 pivot(0.0, 0.0, -6.0);
      const double yaw = 4.0 * kDeg * s;
      pose.rotation = rot_y(yaw) * rot_x(0.5 * kDeg * std::sin(std::numbers::pi * s));
      pose.translation = pivot + pose.rotation * Vec3(0.0, 0.0, 6.0);
      break;
    }
  }
  return pose;
}

const RigidPose& SyntheticScene::pose(int t) const {
  if (t < 1 || t > config_.frames) throw std::out_of_range("frame " + std::to_string(t));
  return trajectory_[t - 1];
}

GroundTruthFrame SyntheticScene::render_frame(int t) const {
  GroundTruthFrame gt;
  gt.timestamp = t;
  gt.pose = pose(t);
  const int h = config_.height;
  const int w = config_.width;
  gt.points = PointMap(h, w);
  gt.labels.assign(static_cast<std::size_t>(h) * w, -1);
  gt.depth.assign(static_cast<std::size_t>(h) * w, 0.0);

  const Vec3& origin = gt.pose.translation;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * w + c;
      const Vec3 dir_cam((c + 0.5 - intrinsics_.cx) / intrinsics_.focal,
                         -(r + 0.5 - intrinsics_.cy) / intrinsics_.focal, -1.0);
      const Vec3 dir = gt.pose.rotation * dir_cam;
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      if (std::abs(dir.z()) > 1e-12) {
        for (std::size_t k = 0; k < plates_.size(); ++k) {
          const double lambda = (-plates_[k].depth - origin.z()) / dir.z();
          if (!(lambda > 0.0) || lambda >= best) continue;
          const Vec3 hit = origin + lambda * dir;
          if (hit.x() < plates_[k].lo.x() || hit.x() > plates_[k].hi.x() ||
              hit.y() < plates_[k].lo.y() || hit.y() > plates_[k].hi.y()) {
            continue;
          }
          best = lambda;
          label = static_cast<int>(k);
        }
      }
      if (label < 0) continue;
      gt.points.set_point(idx, origin + best * dir);
      gt.points.set_valid(idx, true);
      gt.labels[idx] = label;
      gt.depth[idx] = best;  // dir_cam has unit -z component
    }
  }
  return gt;
}

WindowDistortion SyntheticScene::distortion(int window_index) const {
  if (auto it = overrides_.find(window_index); it != overrides_.end()) return it->second;

  auto rng = make_rng(config_.seed, static_cast<std::uint64_t>(window_index), 0, 0x57u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](const Range& r) { return r.lo + (r.hi - r.lo) * unit(rng); };
  auto direction = [&] {
    Vec3 v;
    do {
      v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-9);
    return v.normalized();
  };

  WindowDistortion d;
  const Range& sr = config_.window_scale_range;
  d.sim3.scale = std::exp(std::log(sr.lo) + (std::log(sr.hi) - std::log(sr.lo)) * unit(rng));
  d.sim3.rotation = axis_angle(direction(), uniform(config_.window_rot_deg_range) * kDeg);
  d.sim3.translation = direction() * uniform(config_.window_trans_range);
  d.layer_scales.assign(config_.layers, 1.0);
  for (int k = 1; k < config_.layers; ++k) {
    const double f = uniform(config_.layer_scale_range);
    if (window_index > 1) d.layer_scales[k] = f;
  }
  d.noise_sigma = config_.noise_sigma;
  return d;
}

void SyntheticScene::set_distortion(int window_index, WindowDistortion d) {
  if (!d.sim3.valid()) throw std::invalid_argument("distortion: invalid Sim(3)");
  if (static_cast<int>(d.layer_scales.size()) != config_.layers) {
    throw std::invalid_argument("distortion: need one scale per layer");
  }
  for (double f : d.layer_scales) {
    if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("distortion: layer scale <= 0");
  }
  overrides_[window_index] = std::move(d);
}

RigidPose SyntheticScene::world_to_window(const WindowSpec& window) const {
  return pose(window.start).inverse();
}

Sim3Transform SyntheticScene::true_registration(const WindowSpec& first, const WindowSpec& w) const {
  const Sim3Transform local_first = distortion(first.index).sim3 * to_sim3(world_to_window(first));
  const Sim3Transform local_w = distortion(w.index).sim3 * to_sim3(world_to_window(w));
  return local_first * local_w.inverse();
}

SyntheticScene generate_scene(const SceneConfig& config) { return SyntheticScene(config); }

SyntheticScene generate_scene(SceneConfig config, std::uint64_t seed) {
  config.seed = seed;
  return SyntheticScene(std::move(config));
}

WindowPrediction emit_window(const SyntheticScene& scene, const WindowSpec& window) {
  if (window.start < 1 || window.length < 1 || window.end() > scene.frames()) {
    throw std::out_of_range("window outside scene extent");
  }
  const SceneConfig& cfg = scene.config();
  const WindowDistortion d = scene.distortion(window.index);
  const Sim3Transform to_local = d.sim3 * to_sim3(scene.world_to_window(window));
  const double sigma = d.noise_sigma * d.sim3.scale;
  const double conf_unit = 0.01 * scene.diameter() * d.sim3.scale;

  WindowPrediction pred;
  pred.window = window;
  pred.height = cfg.height;
  pred.width = cfg.width;
  pred.frames.resize(window.length);

  parallel_for(static_cast<std::size_t>(window.length), [&](std::size_t i) {
    const int t = window.start + static_cast<int>(i);
    const GroundTruthFrame gt = scene.render_frame(t);
    FramePrediction& f = pred.frames[i];
    f.timestamp = t;
    f.pose = compose_world_pose(to_local, gt.pose);
    f.points = PointMap(cfg.height, cfg.width);
    f.confidence = ConfidenceMap(cfg.height, cfg.width);
    const Vec3 center = f.pose.translation;

    auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(window.index),
                        static_cast<std::uint64_t>(t), 0xF7u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t px = 0; px < gt.points.size(); ++px) {
      const Vec3 n(gauss(rng), gauss(rng), gauss(rng));
      const double jitter = unit(rng);
      if (!gt.points.valid(px)) continue;
      const Vec3 local = to_local.apply(gt.points.point(px));
      const Vec3 layered = center + d.layer_scales[gt.labels[px]] * (local - center);
      const Vec3 noise = sigma * n;
      f.points.set_point(px, layered + noise);
      f.points.set_valid(px, true);
      const double deviation = noise.norm() + (layered - local).norm();
      // The jitter only breaks ties between otherwise identical confidences.
      f.confidence[px] = static_cast<float>((1.0 + 1e-6 * jitter) / (1.0 + deviation / conf_unit));
    }
  });
  return pred;
}

}  // namespace layerfuse
