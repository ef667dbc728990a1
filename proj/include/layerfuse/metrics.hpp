#pragma once

#include <optional>
#include <string>
#include <vector>

#include "layerfuse/geometry.hpp"
#include "layerfuse/segmentation.hpp"

namespace layerfuse {

/// Least-squares similarity (or rigid, with_scale = false) with dst ≈ s·R·src + t.
/// Throws DegenerateGeometry on fewer than 3 pairs or a rank-deficient configuration.
Sim3Transform umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                      bool with_scale = true);

struct TimedPose {
  double timestamp = 0.0;
  RigidPose pose;
};

/// Camera-to-world poses with strictly increasing timestamps.
using Trajectory = std::vector<TimedPose>;

void validate_trajectory(const Trajectory& traj);

/// Poses of `est` and `gt` with equal timestamps (|Δ| <= 1e-6), in timestamp order.
struct MatchedPoses {
  std::vector<RigidPose> est;
  std::vector<RigidPose> gt;
};
MatchedPoses match_trajectories(const Trajectory& est, const Trajectory& gt);

/// Sim(3) taking the estimated camera centers onto the ground-truth ones.
Sim3Transform align_trajectory(const MatchedPoses& m);

/// RMSE of camera-center differences after Sim(3) alignment; needs >= 3 matches.
double ate(const Trajectory& est, const Trajectory& gt);

struct RpeResult {
  double trans = 0.0;
  double rot_deg = 0.0;
  std::size_t pairs = 0;
};

/// Relative pose error over index steps of `delta`, after the ATE alignment.
RpeResult rpe(const Trajectory& est, const Trajectory& gt, int delta = 1);

enum class DepthAlign { Median, LeastSquares };

DepthAlign parse_depth_align(const std::string& s);
const char* to_string(DepthAlign a);

struct DepthEval {
  double abs_rel = 0.0;
  double delta_125 = 0.0;  // percent
  double scale = 1.0;      // applied to the estimate
  std::size_t pixels = 0;
};

/// Accumulates per-frame depth pairs for a single global scale alignment. A pixel
/// takes part when valid in both grids with positive estimate; a valid ground
/// truth of zero is a DataError.
class DepthEvaluator {
 public:
  void add(const DepthGrid& est, const DepthGrid& gt);
  std::size_t size() const { return est_.size(); }
  DepthEval finish(DepthAlign align = DepthAlign::Median) const;

 private:
  std::vector<double> est_;
  std::vector<double> gt_;
};

DepthEval depth_eval(const std::vector<DepthGrid>& est, const std::vector<DepthGrid>& gt,
                     DepthAlign align = DepthAlign::Median);

struct IcpConfig {
  int max_iters = 50;
  double tol = 1e-6;
  double trim = 0.95;  // fraction of closest pairs kept per iteration
};

struct IcpResult {
  RigidPose transform;  // source -> target
  bool converged = false;
  int iterations = 0;
  /// RMS distance of the kept pairs at the start and after every update.
  std::vector<double> residuals;
};

/// Point-to-point ICP with a kd-tree and a fixed-count trim, which makes the
/// residual non-increasing.
IcpResult icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
              const IcpConfig& cfg = {}, const RigidPose& init = RigidPose::identity());

struct PointMapEval {
  double acc_mean = 0.0;
  double acc_median = 0.0;
  double comp_mean = 0.0;
  double comp_median = 0.0;
  double chamfer = 0.0;
  Sim3Transform alignment;  // applied to the estimate before measuring
};

struct PointMapEvalConfig {
  bool align = true;
  IcpConfig icp;
  /// Coarse alignment to use instead of Umeyama, e.g. from the trajectories.
  std::optional<Sim3Transform> initial;
};

/// Aligns the estimate (coarse: `initial` if given, else Umeyama when the two lists
/// are index-paired, i.e. the same length; then ICP) and reports accuracy,
/// completeness and Chamfer distance.
PointMapEval pointmap_eval(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                           const PointMapEvalConfig& cfg = {});

}  // namespace layerfuse
