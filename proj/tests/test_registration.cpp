#include <doctest.h>

#include <random>

#include "layerfuse/errors.hpp"
#include "layerfuse/registration.hpp"
#include "layerfuse/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace layerfuse;
using namespace fixture;

namespace {

Mat3 rz90() {
  Mat3 r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return r;
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double spread = 3.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

SceneConfig replay_scene() {
  SceneConfig c;
  c.frames = 40;
  c.height = 24;
  c.width = 32;
  c.layers = 3;
  c.window_scale_range = {0.5, 2.0};
  c.window_rot_deg_range = {0.0, 15.0};
  c.window_trans_range = {0.0, 4.0};
  return c;
}

// Moves a window-local prediction into the world frame with a known registration.
WindowPrediction to_world(const WindowPrediction& local, const Sim3Transform& reg) {
  WindowPrediction out = local;
  for (auto& f : out.frames) {
    f.pose = compose_world_pose(reg, f.pose);
    f.points = transform_pointmap(reg, f.points);
  }
  return out;
}

}  // namespace

TEST_CASE("irls examples") {
  std::mt19937_64 rng(1);
  const auto p = random_points(rng, 50);
  const IrlsConfig cfg;

  const IrlsResult same = irls_scale(p, p, cfg);
  CHECK(same.scale == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<Vec3> q2(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) q2[j] = 2.0 * p[j];
  const IrlsResult doubled = irls_scale(p, q2, cfg);
  CHECK(doubled.scale == 2.0);
  CHECK(doubled.iterations == 1);
  CHECK(doubled.converged);
}

TEST_CASE("irls matches the grid-search oracle with 30% outliers") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::vector<Vec3> p, q;
    outlier_set(rng, 200, 1.5, 0.3, p, q);
    const IrlsResult r = irls_scale(p, q, IrlsConfig{});
    const double grid = oracle::grid_scale(p, q, r.delta, 0.1, 10.0, 1e-4);
    CHECK(std::abs(r.scale - grid) <= 1e-3);
    CHECK(std::abs(r.scale - 1.5) / 1.5 < 0.01);
  }
}

TEST_CASE("irls objective is non-increasing") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Vec3> p, q;
    outlier_set(rng, 80, 0.3 + 0.1 * static_cast<double>(seed % 20), 0.4, p, q);
    IrlsConfig cfg;
    cfg.rel_tol = 1e-14;
    const IrlsResult r = irls_scale(p, q, cfg);
    REQUIRE(r.objective.size() == static_cast<std::size_t>(r.iterations) + 1);
    for (std::size_t k = 1; k < r.objective.size(); ++k) {
      CHECK(r.objective[k] <= r.objective[k - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("irls is scale equivariant in the target") {
  std::mt19937_64 rng(3);
  std::vector<Vec3> p, q;
  outlier_set(rng, 120, 1.2, 0.3, p, q);
  const double base = irls_scale(p, q, IrlsConfig{}).scale;
  // powers of two scale every intermediate exactly
  for (double lambda : {0.25, 2.0, 8.0}) {
    std::vector<Vec3> ql(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) ql[j] = lambda * q[j];
    CHECK(irls_scale(p, ql, IrlsConfig{}).scale == lambda * base);
  }
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 20; ++k) {
    const double lambda = u(rng);
    std::vector<Vec3> ql(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) ql[j] = lambda * q[j];
    CHECK(irls_scale(p, ql, IrlsConfig{}).scale == doctest::Approx(lambda * base).epsilon(1e-10));
  }
}

TEST_CASE("irls errors") {
  const std::vector<Vec3> zero(4, Vec3::Zero()), one(4, Vec3::Ones());
  CHECK_THROWS_AS(irls_scale({}, {}, IrlsConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(irls_scale(zero, one, IrlsConfig{}), NumericalError);
  std::vector<Vec3> nan = one;
  nan[2].x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(irls_scale(nan, one, IrlsConfig{}), NumericalError);
  CHECK_THROWS_AS(irls_scale(one, nan, IrlsConfig{}), NumericalError);
  IrlsConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(irls_scale(one, one, bad), std::invalid_argument);
  bad = IrlsConfig{};
  bad.rel_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  // opposite directions clamp to a tiny positive scale rather than going negative
  std::vector<Vec3> neg(4, -Vec3::Ones());
  CHECK(closed_form_scale(one, neg) > 0.0);
  CHECK(irls_scale(one, neg, IrlsConfig{}).scale > 0.0);
}

TEST_CASE("irls beats the closed form under gross outliers") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(500 + seed);
    std::vector<Vec3> p, q;
    outlier_set(rng, 300, 0.8, 0.3, p, q, static_cast<int>(seed % 4));
    const double robust = irls_scale(p, q, IrlsConfig{}).scale;
    const double plain = closed_form_scale(p, q);
    CHECK(std::abs(robust - 0.8) / 0.8 < 0.01);
    CHECK(std::abs(plain - 0.8) > std::abs(robust - 0.8));
  }
}

TEST_CASE("median") {
  CHECK(median({3.0}) == 3.0);
  CHECK(median({4.0, 1.0}) == 2.5);
  CHECK(median({5.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("camera anchors") {
  const auto a = build_camera_anchors({RigidPose::identity()}, 1.0);
  REQUIRE(a.size() == 1);
  CHECK(a[0].center == Vec3(0, 0, 0));
  CHECK(a[0].view == Vec3(0, 0, -1));
  CHECK(a[0].up == Vec3(0, 1, 0));

  const auto b = build_camera_anchors({RigidPose::identity()}, 3.0);
  CHECK(b[0].center == Vec3(0, 0, 0));
  CHECK(b[0].view == Vec3(0, 0, -1));
  CHECK(b[0].up == Vec3(0, 1, 0));

  RigidPose p;
  p.rotation = rz90();
  p.translation = Vec3(1, 0, 0);
  const auto c = build_camera_anchors({p}, 2.0);
  // R·(0,0,-1) = (0,0,-1); R·(0,1,0) = (-1,0,0)
  CHECK((c[0].center - Vec3(2, 0, 0)).norm() <= 1e-15);
  CHECK((c[0].view - Vec3(2, 0, -1)).norm() <= 1e-15);
  CHECK((c[0].up - Vec3(1, 0, 0)).norm() <= 1e-15);

  std::mt19937_64 rng(4);
  std::vector<RigidPose> poses(10);
  for (auto& q : poses) {
    q.rotation = oracle::random_rotation(rng);
    q.translation = random_points(rng, 1)[0];
  }
  for (const auto& t : build_camera_anchors(poses, 0.7)) {
    CHECK((t.view - t.center).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((t.up - t.center).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs((t.view - t.center).dot(t.up - t.center)) <= 1e-14);
  }
  CHECK(anchor_points(c).size() == 3);
}

TEST_CASE("kabsch examples") {
  std::mt19937_64 rng(5);
  const auto x = random_points(rng, 20);
  const RigidPose same = kabsch(x, x);
  CHECK((same.rotation - Mat3::Identity()).norm() <= 1e-12);
  CHECK(same.translation.norm() <= 1e-12);

  std::vector<Vec3> y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = rz90() * x[j] + Vec3(0, 0, 5);
  const RigidPose r = kabsch(x, y);
  CHECK(rotation_angle(r.rotation.transpose() * rz90()) <= 1e-9);
  CHECK((r.translation - Vec3(0, 0, 5)).norm() <= 1e-9);
}

TEST_CASE("kabsch recovers random rigid transforms") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> count(3, 100);
  for (int k = 0; k < 300; ++k) {
    const auto x = random_points(rng, static_cast<std::size_t>(count(rng)));
    const Mat3 rot = oracle::random_rotation(rng);
    const Vec3 t = random_points(rng, 1, 10.0)[0];
    std::vector<Vec3> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = rot * x[j] + t;
    const RigidPose r = kabsch(x, y);
    CHECK(rotation_angle(r.rotation.transpose() * rot) <= 1e-9);
    CHECK((r.translation - t).norm() <= 1e-9);
    CHECK(r.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kabsch is optimal against a 10 degree SO(3) grid") {
  std::normal_distribution<double> g(0.0, 0.3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(60 + seed);
    const auto x = random_points(rng, 15);
    const Mat3 rot = oracle::random_rotation(rng);
    std::vector<Vec3> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = rot * x[j] + Vec3(1, 2, 3) + Vec3(g(rng), g(rng), g(rng));
    const RigidPose r = kabsch(x, y);
    const double ours = oracle::rigid_residual(r.rotation, x, y);
    CHECK(ours <= oracle::so3_grid_residual(x, y, 10.0) + 1e-12);
  }
}

TEST_CASE("kabsch corrects reflections and reports degeneracy") {
  std::mt19937_64 rng(7);
  const auto x = random_points(rng, 30);
  std::vector<Vec3> mirrored(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) mirrored[j] = Vec3(x[j].x(), x[j].y(), -x[j].z());
  const RigidPose r = kabsch(x, mirrored);
  CHECK(r.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(is_rotation(r.rotation));

  std::vector<Vec3> line;
  for (int j = 0; j < 10; ++j) line.push_back(Vec3(j, 2.0 * j, -j));
  CHECK_THROWS_AS(kabsch(line, line), DegenerateGeometry);
  const std::vector<Vec3> coincident(5, Vec3(1, 1, 1));
  CHECK_THROWS_AS(kabsch(coincident, coincident), DegenerateGeometry);
  CHECK_THROWS_AS(kabsch({Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 0, 0), Vec3(1, 0, 0)}),
                  DegenerateGeometry);
  CHECK_THROWS_AS(kabsch(x, line), std::invalid_argument);
}

TEST_CASE("correspondence gates") {
  SceneConfig c = replay_scene();
  c.window_scale_range = {1, 1};
  c.window_rot_deg_range = {0, 0};
  c.window_trans_range = {0, 0};
  const SyntheticScene s = generate_scene(c, 1);
  const WindowSpec w1{1, 1, 10}, w2{2, 6, 10};
  WindowPrediction prev = emit_window(s, w1), curr = emit_window(s, w2);
  const auto overlap = overlap_frames(w1, w2);

  SUBCASE("constant maps give nothing") {
    for (auto& f : prev.frames) std::fill(f.confidence.raw().begin(), f.confidence.raw().end(), 0.5f);
    for (auto& f : curr.frames) std::fill(f.confidence.raw().begin(), f.confidence.raw().end(), 0.5f);
    CHECK(select_correspondences(prev, curr, overlap).empty());
  }
  SUBCASE("row ramp keeps the upper half of the rows") {
    for (auto& f : prev.frames) {
      for (std::size_t p = 0; p < f.confidence.size(); ++p) f.confidence[p] = 1.0f + static_cast<float>(p);
    }
    for (auto& f : curr.frames) {
      for (std::size_t p = 0; p < f.confidence.size(); ++p) f.confidence[p] = static_cast<float>(p / c.width);
    }
    CHECK(median_confidence(curr, overlap) == doctest::Approx((c.height - 1) / 2.0));
    const auto corr = select_correspondences(prev, curr, overlap);
    std::vector<std::size_t> rows_seen(c.height, 0);
    for (const auto& k : corr) rows_seen[k.pixel / c.width]++;
    for (int r = 0; r < c.height; ++r) {
      if (r < c.height / 2) CHECK(rows_seen[r] == 0);
    }
    CHECK(corr.size() > 0);
  }
  SUBCASE("random maps equal the brute-force double gate") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& f : prev.frames) {
      for (auto& v : f.confidence.raw()) v = u(rng);
      f.points.set_valid(3, false);
    }
    for (auto& f : curr.frames) {
      for (auto& v : f.confidence.raw()) v = u(rng);
      f.points.set_valid(7, false);
    }
    std::vector<double> cp, cc;
    for (int t : overlap) {
      for (std::size_t p = 0; p < prev.frame(t).points.size(); ++p) {
        if (prev.frame(t).points.valid(p)) cp.push_back(prev.frame(t).confidence[p]);
        if (curr.frame(t).points.valid(p)) cc.push_back(curr.frame(t).confidence[p]);
      }
    }
    const double gp = oracle::median(cp), gc = oracle::median(cc);
    std::vector<std::pair<int, std::size_t>> expected, got;
    for (int t : overlap) {
      const auto& fp = prev.frame(t);
      const auto& fc = curr.frame(t);
      for (std::size_t p = 0; p < fp.points.size(); ++p) {
        if (fp.points.valid(p) && fc.points.valid(p) && fp.confidence[p] > gp && fc.confidence[p] > gc) {
          expected.emplace_back(t, p);
        }
      }
    }
    for (const auto& k : select_correspondences(prev, curr, overlap)) got.emplace_back(k.timestamp, k.pixel);
    CHECK(got == expected);
  }
}

TEST_CASE("register_submap on self-aligned input is the identity") {
  const SyntheticScene s = generate_scene(replay_scene(), 2);
  const WindowSpec w{2, 6, 10};
  const WindowPrediction pred = emit_window(s, w);
  const std::vector<int> overlap{6, 7, 8, 9, 10};
  const RegistrationResult r = register_submap(pred, pred, overlap, RegistrationConfig{});
  CHECK_FALSE(r.fallback);
  CHECK(std::abs(r.transform.scale - 1.0) <= 1e-6);
  CHECK(rotation_angle(r.transform.rotation) <= 1e-6);
  CHECK(r.transform.translation.norm() <= 1e-6);
  CHECK(r.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("register_submap inverts a known corruption") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (CameraPath path : {CameraPath::Line, CameraPath::Arc, CameraPath::Orbit}) {
      SceneConfig c = replay_scene();
      c.camera_path = path;
      const SyntheticScene s = generate_scene(c, seed);
      const WindowSpec w1{1, 1, 20}, w2{2, 16, 20};
      const WindowPrediction prev = emit_window(s, w1), curr = emit_window(s, w2);
      const Sim3Transform truth = s.true_registration(w1, w2);
      for (RigidSource rigid : {RigidSource::Anchors, RigidSource::Points}) {
        RegistrationConfig cfg;
        cfg.rigid_from = rigid;
        const RegistrationResult r = register_submap(prev, curr, overlap_frames(w1, w2), cfg);
        CHECK_FALSE(r.fallback);
        CHECK(std::abs(r.transform.scale / truth.scale - 1.0) <= 1e-6);
        CHECK(rotation_angle(r.transform.rotation.transpose() * truth.rotation) <= 1e-6);
        CHECK((r.transform.translation - truth.translation).norm() <= 1e-6);
      }
    }
  }
}

TEST_CASE("register_submap scale under noise") {
  double sum_rel = 0.0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    SceneConfig c = replay_scene();
    const double diam = generate_scene(c, 0).diameter();
    c.noise_sigma = 0.01 * diam;
    const SyntheticScene s = generate_scene(c, static_cast<std::uint64_t>(seed));
    const WindowSpec w1{1, 1, 20}, w2{2, 16, 20};
    const RegistrationResult r =
        register_submap(emit_window(s, w1), emit_window(s, w2), overlap_frames(w1, w2), RegistrationConfig{});
    const double truth = s.true_registration(w1, w2).scale;
    sum_rel += std::abs(r.transform.scale / truth - 1.0);
  }
  CHECK(sum_rel / seeds < 0.01);
}

TEST_CASE("register_submap falls back without correspondences") {
  const SyntheticScene s = generate_scene(replay_scene(), 3);
  const WindowSpec w1{1, 1, 10}, w2{2, 6, 10};
  const WindowPrediction prev = emit_window(s, w1);
  WindowPrediction curr = emit_window(s, w2);
  for (auto& f : curr.frames) std::fill(f.confidence.raw().begin(), f.confidence.raw().end(), 1.0f);
  const auto overlap = overlap_frames(w1, w2);
  const RegistrationResult r = register_submap(prev, curr, overlap, RegistrationConfig{}, 1.7);
  CHECK(r.fallback);
  CHECK(r.correspondences == 0);
  CHECK_FALSE(r.fallback_reason.empty());
  CHECK(r.transform.scale == 1.7);
  // the first overlap camera lands exactly on the previous window's pose
  const RigidPose placed = compose_world_pose(r.transform, curr.frame(overlap.front()).pose);
  CHECK(rotation_angle(placed.rotation.transpose() * prev.frame(overlap.front()).pose.rotation) <= 1e-12);
  CHECK((placed.translation - prev.frame(overlap.front()).pose.translation).norm() <= 1e-12);
}

TEST_CASE("register_submap falls back on degenerate anchors") {
  // a single overlap frame whose camera sits at the origin still spans a plane
  // through its three anchors, so build a truly degenerate case by hand
  SceneConfig c = replay_scene();
  const SyntheticScene s = generate_scene(c, 4);
  const WindowSpec w1{1, 1, 10}, w2{2, 10, 10};
  WindowPrediction prev = emit_window(s, w1), curr = emit_window(s, w2);
  RegistrationConfig cfg;
  cfg.rigid_from = RigidSource::Points;
  for (auto& f : curr.frames) {
    for (std::size_t p = 0; p < f.points.size(); ++p) f.points.set_point(p, Vec3(1.0 + p % 3, 0, 0));
  }
  const RegistrationResult r = register_submap(prev, curr, {10}, cfg, 0.9);
  CHECK(r.fallback);
  CHECK(r.transform.scale == 0.9);
  CHECK(r.transform.valid());
}

TEST_CASE("closed-form estimator option") {
  const SyntheticScene s = generate_scene(replay_scene(), 5);
  const WindowSpec w1{1, 1, 20}, w2{2, 16, 20};
  RegistrationConfig cfg;
  cfg.scale_estimator = ScaleEstimator::ClosedForm;
  const RegistrationResult r = register_submap(emit_window(s, w1), emit_window(s, w2), overlap_frames(w1, w2), cfg);
  CHECK(std::abs(r.transform.scale / s.true_registration(w1, w2).scale - 1.0) <= 1e-6);
  CHECK(parse_scale_estimator("closed_form") == ScaleEstimator::ClosedForm);
  CHECK(parse_rigid_source("points") == RigidSource::Points);
  CHECK_THROWS_AS(parse_rigid_source("dense"), std::invalid_argument);
}

TEST_CASE("registration composes through world-frame predictions") {
  // registering against an already registered previous window reproduces the
  // chained ground-truth registration
  const SyntheticScene s = generate_scene(replay_scene(), 6);
  const WindowSpec w1{1, 1, 20}, w2{2, 16, 20}, w3{3, 31, 10};
  const auto r2 = register_submap(emit_window(s, w1), emit_window(s, w2), overlap_frames(w1, w2), RegistrationConfig{});
  const WindowPrediction prev_world = to_world(emit_window(s, w2), r2.transform);
  const auto r3 = register_submap(prev_world, emit_window(s, w3), overlap_frames(w2, w3), RegistrationConfig{});
  const Sim3Transform truth = s.true_registration(w1, w3);
  CHECK(std::abs(r3.transform.scale / truth.scale - 1.0) <= 1e-6);
  CHECK(rotation_angle(r3.transform.rotation.transpose() * truth.rotation) <= 1e-6);
  CHECK((r3.transform.translation - truth.translation).norm() <= 1e-5);
}
