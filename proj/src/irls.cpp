#include "layerfuse/irls.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "layerfuse/errors.hpp"

namespace layerfuse {

namespace {

constexpr double kMinScale = 1e-12;

void check_input(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
  if (source.empty()) throw std::invalid_argument("scale estimation: no correspondences");
  if (source.size() != target.size()) {
    throw std::invalid_argument("scale estimation: source/target size mismatch");
  }
  bool any_nonzero = false;
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (!source[j].allFinite() || !target[j].allFinite()) {
      throw NumericalError("scale estimation: non-finite correspondence");
    }
    any_nonzero = any_nonzero || source[j].squaredNorm() > 0.0;
  }
  if (!any_nonzero) throw NumericalError("scale estimation: all source vectors are zero");
}

}  // namespace

void IrlsConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("irls: max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("irls: rel_tol must be > 0");
  if (huber_delta <= 0.0 && !(delta_factor > 0.0)) {
    throw std::invalid_argument("irls: delta_factor must be > 0");
  }
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
}

double huber_objective(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                       double s, double delta) {
  double sum = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) sum += huber((s * source[j] - target[j]).norm(), delta);
  return sum;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

IrlsResult irls_scale(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                      const IrlsConfig& cfg) {
  cfg.validate();
  check_input(source, target);
  const std::size_t n = source.size();

  IrlsResult res;
  if (cfg.huber_delta > 0.0) {
    res.delta = cfg.huber_delta;
  } else {
    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = target[j].norm();
    res.delta = cfg.delta_factor * median(norms);
    if (!(res.delta > 0.0)) {
      // more than half the targets sit at the origin
      res.delta = cfg.delta_factor * *std::max_element(norms.begin(), norms.end());
    }
    if (!(res.delta > 0.0)) res.delta = kMinScale;
  }

  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double np = source[j].norm();
    num += np * target[j].norm();
    den += np * np;
  }
  double s = std::max(num / den, kMinScale);
  res.objective.push_back(huber_objective(source, target, s, res.delta));

  for (int it = 0; it < cfg.max_iters; ++it) {
    double wpq = 0.0, wpp = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = (s * source[j] - target[j]).norm();
      const double w = r <= res.delta ? 1.0 : res.delta / r;
      wpq += w * source[j].dot(target[j]);
      wpp += w * source[j].squaredNorm();
    }
    const double next = std::max(wpq / wpp, kMinScale);
    if (!std::isfinite(next)) throw NumericalError("irls: non-finite scale update");
    const double change = std::abs(next - s) / s;
    s = next;
    res.iterations = it + 1;
    res.objective.push_back(huber_objective(source, target, s, res.delta));
    if (change < cfg.rel_tol) {
      res.converged = true;
      break;
    }
  }
  res.scale = s;
  return res;
}

IrlsResult irls_scale_1d(const std::vector<double>& source, const std::vector<double>& target,
                         const IrlsConfig& cfg) {
  if (source.size() != target.size()) {
    throw std::invalid_argument("scale estimation: source/target size mismatch");
  }
  std::vector<Vec3> p(source.size()), q(target.size());
  for (std::size_t j = 0; j < source.size(); ++j) {
    p[j] = Vec3(source[j], 0.0, 0.0);
    q[j] = Vec3(target[j], 0.0, 0.0);
  }
  return irls_scale(p, q, cfg);
}

double closed_form_scale(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
  check_input(source, target);
  double pq = 0.0, pp = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    pq += source[j].dot(target[j]);
    pp += source[j].squaredNorm();
  }
  return std::max(pq / pp, kMinScale);
}

}  // namespace layerfuse
