// Randomized inputs shared by the unit tests and the acceptance run.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "layerfuse/lsa.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace layerfuse;

// Points in front of a camera looking down -Z; the first `outlier_frac` of the
// pairs are gross outliers drawn from four models in turn: uniform box, swapped
// correspondence, large random displacement, and depth blow-up along the ray.
inline void outlier_set(std::mt19937_64& rng, std::size_t n, double s, double outlier_frac,
                 std::vector<Vec3>& p, std::vector<Vec3>& q, int model = -1) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-3.0, 3.0), box(-20.0, 20.0), gross(1.0, 5.0);
  p.resize(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng) - 8.0);
  q.resize(n);
  const std::size_t bad = static_cast<std::size_t>(std::round(outlier_frac * static_cast<double>(n)));
  for (std::size_t j = 0; j < n; ++j) {
    const Vec3 inlier = s * p[j] + 0.04 * s * Vec3(g(rng), g(rng), g(rng));
    if (j >= bad) {
      q[j] = inlier;
      continue;
    }
    switch (model >= 0 ? model : static_cast<int>(j % 4)) {
      case 0: q[j] = Vec3(box(rng), box(rng), box(rng)); break;
      case 1: q[j] = s * p[rng() % n]; break;
      case 2: q[j] = inlier + gross(rng) * s * p[j].norm() * Vec3(g(rng), g(rng), g(rng)).normalized(); break;
      default: q[j] = (1.0 + gross(rng)) * inlier; break;
    }
  }
}


inline DepthGrid grid_from(const std::vector<double>& v, int h, int w) {
  DepthGrid d(h, w);
  d.values = v;
  std::fill(d.valid.begin(), d.valid.end(), 1);
  return d;
}


// Random rectangles painted over a background, each at one of `levels` depth
// levels spaced `step` apart. Returns the level index per pixel.
inline std::vector<int> rect_layout(std::mt19937_64& rng, int h, int w, int levels, int rects) {
  std::uniform_int_distribution<int> lvl(0, levels - 1);
  std::vector<int> cls(static_cast<std::size_t>(h) * w, lvl(rng));
  for (int r = 0; r < rects; ++r) {
    std::uniform_int_distribution<int> y0(0, h - 8), x0(0, w - 8);
    const int y = y0(rng), x = x0(rng);
    std::uniform_int_distribution<int> hh(6, h - y), ww(6, w - x);
    const int rh = hh(rng), rw = ww(rng);
    const int c = lvl(rng);
    for (int i = y; i < y + rh; ++i)
      for (int j = x; j < x + rw; ++j) cls[static_cast<std::size_t>(i) * w + j] = c;
  }
  return cls;
}


inline bool components_at_least(const std::vector<int>& cc, std::size_t min_size) {
  std::map<int, std::size_t> sizes;
  for (int c : cc) sizes[c]++;
  for (const auto& [c, n] : sizes) {
    if (n < min_size) return false;
  }
  return true;
}


// The oracle keys vertices by (t, layer) alone; previous-window layers are only
// ever inter-edge parents, which it never reads back, so the keys cannot collide.
struct RandomGraph {
  LayerGraph graph;
  std::vector<double> inter_scales;
  std::vector<oracle::SimEdge> sim;
  WindowSpec window;
};

inline RandomGraph random_graph(std::mt19937_64& rng) {
  RandomGraph g;
  std::uniform_int_distribution<int> len(2, 6), layers(1, 4), ov(1, 3);
  std::uniform_real_distribution<double> w(0.31, 1.0), s(0.5, 2.0), coin(0.0, 1.0);
  g.window = WindowSpec{2, 10, len(rng)};
  const int overlap = std::min(ov(rng), g.window.length);
  std::map<std::pair<int, int>, int> curr_layers;  // (window, t) -> layer count
  int budget = 30;
  for (int t = g.window.start; t < g.window.start + overlap && budget > 0; ++t) {
    const int n = std::min(layers(rng), budget);
    budget -= n;
    for (int l = 0; l < n; ++l) g.graph.add_vertex({1, t, l});
    curr_layers[{1, t}] = n;
  }
  for (int t = g.window.start; t <= g.window.end() && budget > 0; ++t) {
    const int n = std::min(layers(rng), budget);
    budget -= n;
    for (int l = 0; l < n; ++l) g.graph.add_vertex({2, t, l});
    curr_layers[{2, t}] = n;
  }
  auto count = [&](int win, int t) {
    const auto it = curr_layers.find({win, t});
    return it == curr_layers.end() ? 0 : it->second;
  };
  for (int t = g.window.start; t <= g.window.end(); ++t) {
    for (int a = 0; a < count(1, t); ++a) {
      for (int b = 0; b < count(2, t); ++b) {
        if (coin(rng) < 0.5) continue;
        LayerEdge e{g.graph.find(1, t, a), g.graph.find(2, t, b), w(rng), EdgeKind::Inter};
        const double sh = s(rng);
        g.graph.edges.push_back(e);
        g.inter_scales.push_back(sh);
        g.sim.push_back({t, a, t, b, e.weight, true, sh});
      }
    }
    for (int a = 0; a < count(2, t - 1); ++a) {
      for (int b = 0; b < count(2, t); ++b) {
        if (coin(rng) < 0.5) continue;
        LayerEdge e{g.graph.find(2, t - 1, a), g.graph.find(2, t, b), w(rng), EdgeKind::Intra};
        g.graph.edges.push_back(e);
        g.inter_scales.push_back(std::nan(""));
        g.sim.push_back({t - 1, a, t, b, e.weight, false, 0.0});
      }
    }
  }
  return g;
}

}  // namespace fixture
