#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "layerfuse/geometry.hpp"
#include "layerfuse/ingest.hpp"
#include "layerfuse/irls.hpp"

namespace layerfuse {

/// One mutually confident pixel pair at a shared timestamp. `source` and `target`
/// are the same pixel expressed in its own camera's coordinates: source from the
/// current window's local prediction, target from the previous window's world
/// prediction. A correct registration scale satisfies s·source ≈ target.
struct Correspondence {
  Vec3 source;
  Vec3 target;
  Vec3 source_local;  // current window, window-local frame
  Vec3 target_world;  // previous window, world frame
  int timestamp = 0;
  std::size_t pixel = 0;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Median confidence over the valid pixels of `pred` at the given timestamps.
double median_confidence(const WindowPrediction& pred, const std::vector<int>& timestamps);

/// Pixels valid in both predictions whose confidence strictly exceeds the median
/// of their own window (median over valid pixels of the overlap frames).
CorrespondenceSet select_correspondences(const WindowPrediction& prev_world,
                                         const WindowPrediction& curr,
                                         const std::vector<int>& overlap);

/// Robust scale s with s·source ≈ target. Throws like irls_scale.
double estimate_scale_irls(const CorrespondenceSet& corr, const IrlsConfig& cfg);
IrlsResult estimate_scale_irls_detailed(const CorrespondenceSet& corr, const IrlsConfig& cfg);

struct AnchorTriplet {
  Vec3 center;
  Vec3 view;  // center + R·(0,0,−1)
  Vec3 up;    // center + R·(0,1,0)
};

std::vector<AnchorTriplet> build_camera_anchors(const std::vector<RigidPose>& poses, double scale);

/// Flattens anchors to (center, view, up) per camera.
std::vector<Vec3> anchor_points(const std::vector<AnchorTriplet>& anchors);

class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares rigid transform with R·x + t ≈ y. Throws DegenerateGeometry when
/// fewer than 3 pairs are given or the cross-covariance has rank < 2.
RigidPose kabsch(const std::vector<Vec3>& x, const std::vector<Vec3>& y);

enum class ScaleEstimator { Irls, ClosedForm };
enum class RigidSource { Anchors, Points };

ScaleEstimator parse_scale_estimator(const std::string& s);
RigidSource parse_rigid_source(const std::string& s);
const char* to_string(ScaleEstimator e);
const char* to_string(RigidSource r);

struct RegistrationConfig {
  IrlsConfig irls;
  ScaleEstimator scale_estimator = ScaleEstimator::Irls;
  RigidSource rigid_from = RigidSource::Anchors;
};

struct RegistrationResult {
  Sim3Transform transform;
  std::size_t correspondences = 0;
  int irls_iterations = 0;
  bool fallback = false;
  std::string fallback_reason;
};

/// Registers `curr` (window-local) onto `prev_world`: scale from mutually confident
/// correspondences, then rotation and translation from camera anchors at the
/// overlap frames. When either stage cannot run, the scale `fallback_scale` is
/// carried forward and the rigid part aligns the first overlap camera exactly.
RegistrationResult register_submap(const WindowPrediction& prev_world,
                                   const WindowPrediction& curr,
                                   const std::vector<int>& overlap,
                                   const RegistrationConfig& cfg, double fallback_scale = 1.0);

}  // namespace layerfuse
