#include "layerfuse/registration.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "layerfuse/errors.hpp"

namespace layerfuse {

double median_confidence(const WindowPrediction& pred, const std::vector<int>& timestamps) {
  std::vector<double> values;
  for (int t : timestamps) {
    const FramePrediction& f = pred.frame(t);
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      if (f.points.valid(i)) values.push_back(f.confidence[i]);
    }
  }
  if (values.empty()) throw DataError("no valid pixels at the overlap frames");
  return median(std::move(values));
}

CorrespondenceSet select_correspondences(const WindowPrediction& prev_world,
                                         const WindowPrediction& curr,
                                         const std::vector<int>& overlap) {
  if (overlap.empty()) throw std::invalid_argument("select_correspondences: empty overlap");
  if (prev_world.height != curr.height || prev_world.width != curr.width) {
    throw DataError("select_correspondences: window dimensions differ");
  }
  const double gate_prev = median_confidence(prev_world, overlap);
  const double gate_curr = median_confidence(curr, overlap);

  CorrespondenceSet out;
  for (int t : overlap) {
    const FramePrediction& fp = prev_world.frame(t);
    const FramePrediction& fc = curr.frame(t);
    const RigidPose prev_inv = fp.pose.inverse();
    const RigidPose curr_inv = fc.pose.inverse();
    for (std::size_t i = 0; i < fp.points.size(); ++i) {
      if (!fp.points.valid(i) || !fc.points.valid(i)) continue;
      if (!(fp.confidence[i] > gate_prev) || !(fc.confidence[i] > gate_curr)) continue;
      Correspondence c;
      c.target_world = fp.points.point(i);
      c.source_local = fc.points.point(i);
      c.target = prev_inv.apply(c.target_world);
      c.source = curr_inv.apply(c.source_local);
      c.timestamp = t;
      c.pixel = i;
      out.push_back(c);
    }
  }
  return out;
}

IrlsResult estimate_scale_irls_detailed(const CorrespondenceSet& corr, const IrlsConfig& cfg) {
  std::vector<Vec3> p(corr.size()), q(corr.size());
  for (std::size_t j = 0; j < corr.size(); ++j) {
    p[j] = corr[j].source;
    q[j] = corr[j].target;
  }
  return irls_scale(p, q, cfg);
}

double estimate_scale_irls(const CorrespondenceSet& corr, const IrlsConfig& cfg) {
  return estimate_scale_irls_detailed(corr, cfg).scale;
}

std::vector<AnchorTriplet> build_camera_anchors(const std::vector<RigidPose>& poses, double scale) {
  std::vector<AnchorTriplet> out;
  out.reserve(poses.size());
  for (const auto& pose : poses) {
    AnchorTriplet a;
    a.center = scale * pose.translation;
    a.view = a.center + pose.rotation * Vec3(0.0, 0.0, -1.0);
    a.up = a.center + pose.rotation * Vec3(0.0, 1.0, 0.0);
    out.push_back(a);
  }
  return out;
}

std::vector<Vec3> anchor_points(const std::vector<AnchorTriplet>& anchors) {
  std::vector<Vec3> out;
  out.reserve(3 * anchors.size());
  for (const auto& a : anchors) {
    out.push_back(a.center);
    out.push_back(a.view);
    out.push_back(a.up);
  }
  return out;
}

RigidPose kabsch(const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kabsch: size mismatch");
  if (x.size() < 3) throw DegenerateGeometry("kabsch: need at least 3 pairs");
  const double n = static_cast<double>(x.size());
  Vec3 mx = Vec3::Zero(), my = Vec3::Zero();
  for (std::size_t j = 0; j < x.size(); ++j) {
    mx += x[j];
    my += y[j];
  }
  mx /= n;
  my /= n;
  Mat3 h = Mat3::Zero();
  for (std::size_t j = 0; j < x.size(); ++j) h += (x[j] - mx) * (y[j] - my).transpose();
  if (!h.allFinite()) throw NumericalError("kabsch: non-finite input");

  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateGeometry("kabsch: collinear or coincident points");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidPose out;
  out.rotation = v * d * u.transpose();
  out.translation = my - out.rotation * mx;
  return out;
}

ScaleEstimator parse_scale_estimator(const std::string& s) {
  if (s == "irls") return ScaleEstimator::Irls;
  if (s == "closed_form") return ScaleEstimator::ClosedForm;
  throw std::invalid_argument("unknown scale_estimator '" + s + "' (irls|closed_form)");
}

RigidSource parse_rigid_source(const std::string& s) {
  if (s == "anchors") return RigidSource::Anchors;
  if (s == "points") return RigidSource::Points;
  throw std::invalid_argument("unknown rigid_from '" + s + "' (anchors|points)");
}

const char* to_string(ScaleEstimator e) {
  return e == ScaleEstimator::Irls ? "irls" : "closed_form";
}

const char* to_string(RigidSource r) { return r == RigidSource::Anchors ? "anchors" : "points"; }

namespace {

Sim3Transform first_frame_fallback(const WindowPrediction& prev_world, const WindowPrediction& curr,
                                   int t0, double scale) {
  const RigidPose& pw = prev_world.frame(t0).pose;
  const RigidPose& pc = curr.frame(t0).pose;
  Sim3Transform out;
  out.scale = scale;
  out.rotation = pw.rotation * pc.rotation.transpose();
  out.translation = pw.translation - scale * (out.rotation * pc.translation);
  return out;
}

}  // namespace

RegistrationResult register_submap(const WindowPrediction& prev_world,
                                   const WindowPrediction& curr,
                                   const std::vector<int>& overlap,
                                   const RegistrationConfig& cfg, double fallback_scale) {
  if (overlap.empty()) throw std::invalid_argument("register_submap: empty overlap");
  RegistrationResult res;
  const CorrespondenceSet corr = select_correspondences(prev_world, curr, overlap);
  res.correspondences = corr.size();

  double scale = fallback_scale;
  bool have_scale = false;
  if (!corr.empty()) {
    try {
      if (cfg.scale_estimator == ScaleEstimator::Irls) {
        const IrlsResult irls = estimate_scale_irls_detailed(corr, cfg.irls);
        scale = irls.scale;
        res.irls_iterations = irls.iterations;
      } else {
        std::vector<Vec3> p, q;
        for (const auto& c : corr) {
          p.push_back(c.source);
          q.push_back(c.target);
        }
        scale = closed_form_scale(p, q);
      }
      have_scale = true;
    } catch (const NumericalError& e) {
      res.fallback_reason = e.what();
    }
  } else {
    res.fallback_reason = "no mutually confident correspondences";
  }

  if (!have_scale) {
    res.fallback = true;
    res.transform = first_frame_fallback(prev_world, curr, overlap.front(), fallback_scale);
    return res;
  }

  std::vector<Vec3> x, y;
  if (cfg.rigid_from == RigidSource::Anchors) {
    std::vector<RigidPose> curr_poses, prev_poses;
    for (int t : overlap) {
      curr_poses.push_back(curr.frame(t).pose);
      prev_poses.push_back(prev_world.frame(t).pose);
    }
    x = anchor_points(build_camera_anchors(curr_poses, scale));
    y = anchor_points(build_camera_anchors(prev_poses, 1.0));
  } else {
    for (const auto& c : corr) {
      x.push_back(scale * c.source_local);
      y.push_back(c.target_world);
    }
  }

  try {
    const RigidPose rigid = kabsch(x, y);
    res.transform.scale = scale;
    res.transform.rotation = rigid.rotation;
    res.transform.translation = rigid.translation;
  } catch (const DegenerateGeometry& e) {
    res.fallback = true;
    res.fallback_reason = e.what();
    res.transform = first_frame_fallback(prev_world, curr, overlap.front(), fallback_scale);
  }
  return res;
}

}  // namespace layerfuse
