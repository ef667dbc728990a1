#include "layerfuse/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "layerfuse/errors.hpp"
#include "layerfuse/irls.hpp"
#include "layerfuse/kdtree.hpp"
#include "layerfuse/parallel.hpp"
#include "layerfuse/registration.hpp"

namespace layerfuse {

Sim3Transform umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, bool with_scale) {
  if (src.size() != dst.size()) throw std::invalid_argument("umeyama: size mismatch");
  if (src.size() < 3) throw DegenerateGeometry("umeyama: need at least 3 pairs");
  const double n = static_cast<double>(src.size());
  Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
  for (std::size_t j = 0; j < src.size(); ++j) {
    ms += src[j];
    md += dst[j];
  }
  ms /= n;
  md /= n;
  Mat3 cov = Mat3::Zero();
  double var = 0.0;
  for (std::size_t j = 0; j < src.size(); ++j) {
    const Vec3 a = src[j] - ms;
    cov += (dst[j] - md) * a.transpose();
    var += a.squaredNorm();
  }
  cov /= n;
  var /= n;
  if (!cov.allFinite()) throw NumericalError("umeyama: non-finite input");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (!(var > 0.0) || !(d(0) > 0.0) || d(1) <= 1e-12 * d(0)) {
    throw DegenerateGeometry("umeyama: degenerate point configuration");
  }
  Vec3 s = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;

  Sim3Transform out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? d.dot(s) / var : 1.0;
  out.translation = md - out.scale * (out.rotation * ms);
  return out;
}

void validate_trajectory(const Trajectory& traj) {
  for (std::size_t k = 1; k < traj.size(); ++k) {
    if (!(traj[k].timestamp > traj[k - 1].timestamp)) {
      throw DataError("trajectory timestamps are not strictly increasing");
    }
  }
}

MatchedPoses match_trajectories(const Trajectory& est, const Trajectory& gt) {
  validate_trajectory(est);
  validate_trajectory(gt);
  MatchedPoses m;
  std::size_t j = 0;
  for (const auto& e : est) {
    while (j < gt.size() && gt[j].timestamp < e.timestamp - 1e-6) ++j;
    if (j < gt.size() && std::abs(gt[j].timestamp - e.timestamp) <= 1e-6) {
      m.est.push_back(e.pose);
      m.gt.push_back(gt[j].pose);
    }
  }
  return m;
}

Sim3Transform align_trajectory(const MatchedPoses& m) {
  std::vector<Vec3> src, dst;
  for (std::size_t k = 0; k < m.est.size(); ++k) {
    src.push_back(m.est[k].translation);
    dst.push_back(m.gt[k].translation);
  }
  return umeyama(src, dst, true);
}

double ate(const Trajectory& est, const Trajectory& gt) {
  const MatchedPoses m = match_trajectories(est, gt);
  if (m.est.size() < 3) throw DataError("ate: fewer than 3 matched poses");
  const Sim3Transform a = align_trajectory(m);
  double sum = 0.0;
  for (std::size_t k = 0; k < m.est.size(); ++k) {
    sum += (a.apply(m.est[k].translation) - m.gt[k].translation).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(m.est.size()));
}

RpeResult rpe(const Trajectory& est, const Trajectory& gt, int delta) {
  if (delta < 1) throw std::invalid_argument("rpe: delta must be >= 1");
  const MatchedPoses m = match_trajectories(est, gt);
  if (m.est.size() < static_cast<std::size_t>(delta) + 1 || m.est.size() < 3) {
    throw DataError("rpe: trajectory too short for the frame step");
  }
  const Sim3Transform a = align_trajectory(m);
  RpeResult r;
  double st = 0.0, sr = 0.0;
  for (std::size_t k = 0; k + delta < m.est.size(); ++k) {
    const RigidPose p0 = compose_world_pose(a, m.est[k]);
    const RigidPose p1 = compose_world_pose(a, m.est[k + delta]);
    const RigidPose rel_est = p0.inverse() * p1;
    const RigidPose rel_gt = m.gt[k].inverse() * m.gt[k + delta];
    const RigidPose e = rel_gt.inverse() * rel_est;
    st += e.translation.squaredNorm();
    const double ang = rotation_angle(e.rotation) * 180.0 / std::numbers::pi;
    sr += ang * ang;
    ++r.pairs;
  }
  r.trans = std::sqrt(st / static_cast<double>(r.pairs));
  r.rot_deg = std::sqrt(sr / static_cast<double>(r.pairs));
  return r;
}

DepthAlign parse_depth_align(const std::string& s) {
  if (s == "median") return DepthAlign::Median;
  if (s == "lsq") return DepthAlign::LeastSquares;
  throw std::invalid_argument("unknown depth_align '" + s + "' (median|lsq)");
}

const char* to_string(DepthAlign a) { return a == DepthAlign::Median ? "median" : "lsq"; }

void DepthEvaluator::add(const DepthGrid& est, const DepthGrid& gt) {
  if (est.height != gt.height || est.width != gt.width || est.size() != gt.size()) {
    throw DataError("depth_eval: grid dimensions differ");
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!est.valid[i] || !gt.valid[i]) continue;
    if (gt.values[i] == 0.0) throw DataError("depth_eval: ground truth is zero on a valid pixel");
    if (!(est.values[i] > 0.0)) continue;
    est_.push_back(est.values[i]);
    gt_.push_back(gt.values[i]);
  }
}

DepthEval DepthEvaluator::finish(DepthAlign align) const {
  if (est_.empty()) throw DataError("depth_eval: no valid pixels");
  DepthEval r;
  r.pixels = est_.size();
  if (align == DepthAlign::Median) {
    std::vector<double> ratios(est_.size());
    for (std::size_t i = 0; i < est_.size(); ++i) ratios[i] = gt_[i] / est_[i];
    r.scale = median(std::move(ratios));
  } else {
    double eg = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < est_.size(); ++i) {
      eg += est_[i] * gt_[i];
      ee += est_[i] * est_[i];
    }
    r.scale = eg / ee;
  }
  double rel = 0.0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < est_.size(); ++i) {
    const double e = r.scale * est_[i];
    rel += std::abs(e - gt_[i]) / gt_[i];
    if (std::max(e / gt_[i], gt_[i] / e) < 1.25) ++inside;
  }
  r.abs_rel = rel / static_cast<double>(r.pixels);
  r.delta_125 = 100.0 * static_cast<double>(inside) / static_cast<double>(r.pixels);
  return r;
}

DepthEval depth_eval(const std::vector<DepthGrid>& est, const std::vector<DepthGrid>& gt,
                     DepthAlign align) {
  if (est.size() != gt.size()) throw DataError("depth_eval: frame counts differ");
  DepthEvaluator ev;
  for (std::size_t f = 0; f < est.size(); ++f) ev.add(est[f], gt[f]);
  return ev.finish(align);
}

namespace {

struct Association {
  double rms = 0.0;
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
};

Association associate(const KdTree& tree, const std::vector<Vec3>& source, const RigidPose& pose,
                      std::size_t keep) {
  const std::size_t n = source.size();
  std::vector<Vec3> moved(n);
  std::vector<KdTree::Hit> hits(n);
  parallel_for(n, [&](std::size_t i) {
    moved[i] = pose.apply(source[i]);
    hits[i] = tree.nearest(moved[i]);
  });
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](std::size_t a, std::size_t b) {
    return hits[a].dist2 < hits[b].dist2 || (hits[a].dist2 == hits[b].dist2 && a < b);
  });
  Association as;
  double sum = 0.0;
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t i = order[k];
    as.src.push_back(moved[i]);
    as.dst.push_back(tree.point(hits[i].index));
    sum += hits[i].dist2;
  }
  as.rms = std::sqrt(sum / static_cast<double>(keep));
  return as;
}

}  // namespace

IcpResult icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target, const IcpConfig& cfg,
              const RigidPose& init) {
  if (source.empty() || target.empty()) throw std::invalid_argument("icp: empty point set");
  if (cfg.max_iters < 1 || !(cfg.tol >= 0.0) || !(cfg.trim > 0.0 && cfg.trim <= 1.0)) {
    throw std::invalid_argument("icp: invalid configuration");
  }
  const KdTree tree(target);
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.trim * static_cast<double>(source.size()))));

  IcpResult res;
  res.transform = init;
  Association as = associate(tree, source, res.transform, keep);
  res.residuals.push_back(as.rms);
  for (int it = 0; it < cfg.max_iters; ++it) {
    RigidPose step;
    try {
      step = kabsch(as.src, as.dst);
    } catch (const DegenerateGeometry&) {
      break;
    }
    const RigidPose next = step * res.transform;
    Association na = associate(tree, source, next, keep);
    res.iterations = it + 1;
    // Kabsch plus re-association can only lower the trimmed sum; equality up to
    // rounding is the stopping point.
    if (na.rms > as.rms) {
      res.converged = true;
      break;
    }
    const double change = as.rms - na.rms;
    res.transform = next;
    as = std::move(na);
    res.residuals.push_back(as.rms);
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

PointMapEval pointmap_eval(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                           const PointMapEvalConfig& cfg) {
  if (est.empty() || gt.empty()) throw DataError("pointmap_eval: empty point set");
  PointMapEval r;
  std::vector<Vec3> aligned = est;
  if (cfg.align) {
    if (cfg.initial) {
      r.alignment = *cfg.initial;
    } else if (est.size() == gt.size() && est.size() >= 3) {
      try {
        r.alignment = umeyama(est, gt, true);
      } catch (const DegenerateGeometry&) {
        r.alignment = Sim3Transform::identity();
      }
    }
    for (auto& p : aligned) p = r.alignment.apply(p);
    const IcpResult refine = icp(aligned, gt, cfg.icp);
    Sim3Transform step;
    step.rotation = refine.transform.rotation;
    step.translation = refine.transform.translation;
    r.alignment = step * r.alignment;
    for (std::size_t i = 0; i < est.size(); ++i) aligned[i] = r.alignment.apply(est[i]);
  }

  const KdTree gt_tree(gt);
  const KdTree est_tree(aligned);
  const std::vector<double> acc = nearest_distances(gt_tree, aligned);
  const std::vector<double> comp = nearest_distances(est_tree, gt);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.acc_mean = mean(acc);
  r.acc_median = median(acc);
  r.comp_mean = mean(comp);
  r.comp_median = median(comp);
  r.chamfer = 0.5 * (r.acc_mean + r.comp_mean);
  return r;
}

}  // namespace layerfuse
