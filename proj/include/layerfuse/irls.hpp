#pragma once

#include <vector>

#include "layerfuse/geometry.hpp"

namespace layerfuse {

struct IrlsConfig {
  /// Huber threshold; <= 0 selects delta_factor × median(‖target‖) per call.
  double huber_delta = 0.0;
  double delta_factor = 0.01;
  int max_iters = 50;
  double rel_tol = 1e-6;

  void validate() const;
};

struct IrlsResult {
  double scale = 1.0;
  double delta = 0.0;  // threshold actually used
  int iterations = 0;
  bool converged = false;
  /// Huber objective at the initial estimate and after every update.
  std::vector<double> objective;
};

/// Huber loss: r²/2 for |r| <= delta, delta·(|r| − delta/2) beyond.
double huber(double r, double delta);

/// Sum of Huber losses of ‖s·source_j − target_j‖.
double huber_objective(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                       double s, double delta);

/// Scalar s with s·source ≈ target under the Huber loss, by IRLS started from the
/// norm ratio Σ‖p‖‖q‖/Σ‖p‖². Throws NumericalError on non-finite input or when every
/// source vector is zero; std::invalid_argument on empty or mismatched input.
IrlsResult irls_scale(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                      const IrlsConfig& cfg);

/// 1-D specialization on scalar pairs.
IrlsResult irls_scale_1d(const std::vector<double>& source, const std::vector<double>& target,
                         const IrlsConfig& cfg);

/// Ordinary least squares Σ⟨p,q⟩/Σ⟨p,p⟩ (no robustness), clamped to > 0.
double closed_form_scale(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

/// Median with the even-count convention of averaging the two middle values.
double median(std::vector<double> values);

}  // namespace layerfuse
