#include "layerfuse/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace layerfuse {

DepthGrid::DepthGrid(int h, int w) : height(h), width(w) {
  if (h < 1 || w < 1) throw std::invalid_argument("DepthGrid: empty dimensions");
  values.assign(static_cast<std::size_t>(h) * w, 0.0);
  valid.assign(static_cast<std::size_t>(h) * w, 0);
}

std::vector<std::size_t> LayerLabelMap::layer_sizes() const {
  std::vector<std::size_t> sizes(layers, 0);
  for (int l : labels) {
    if (l >= 0) ++sizes[l];
  }
  return sizes;
}

std::vector<std::uint8_t> LayerLabelMap::mask(int layer) const {
  std::vector<std::uint8_t> m(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == layer ? 1 : 0;
  return m;
}

void SegmentationParams::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("seg_sigma must be >= 0");
  if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("seg_k must be >= 0");
  if (!(min_size_frac >= 0.0 && min_size_frac < 1.0)) {
    throw std::invalid_argument("seg_min_size_frac must be in [0, 1)");
  }
}

int SegmentationParams::min_size(std::size_t n) const {
  return std::max(1, static_cast<int>(std::lround(min_size_frac * static_cast<double>(n))));
}

namespace {

struct DisjointSet {
  std::vector<int> parent;
  std::vector<int> size;
  std::vector<double> internal;  // largest MST edge inside the component

  explicit DisjointSet(std::size_t n) : parent(n), size(n, 1), internal(n, 0.0) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  int join(int a, int b, double w) {
    if (size[a] < size[b] || (size[a] == size[b] && b < a)) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
    internal[a] = std::max({internal[a], internal[b], w});
    return a;
  }
};

struct Edge {
  double w;
  int a;
  int b;
};

std::vector<double> normalized(const DepthGrid& d) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.valid[i]) continue;
    lo = std::min(lo, d.values[i]);
    hi = std::max(hi, d.values[i]);
  }
  std::vector<double> out(d.size(), 0.0);
  const double range = hi - lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.valid[i]) out[i] = (d.values[i] - lo) / range;
  }
  return out;
}

// Separable Gaussian, renormalized over valid pixels so invalid holes do not bleed in.
std::vector<double> smooth(const std::vector<double>& v, const std::vector<std::uint8_t>& valid,
                           int h, int w, double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

  auto pass = [&](const std::vector<double>& val, const std::vector<double>& wt, bool horizontal,
                  std::vector<double>& out_val, std::vector<double>& out_wt) {
    out_val.assign(val.size(), 0.0);
    out_wt.assign(val.size(), 0.0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double sv = 0.0, sw = 0.0;
        for (int o = -radius; o <= radius; ++o) {
          const int rr = horizontal ? r : r + o;
          const int cc = horizontal ? c + o : c;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
          sv += kernel[o + radius] * val[j];
          sw += kernel[o + radius] * wt[j];
        }
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        out_val[i] = sv;
        out_wt[i] = sw;
      }
    }
  };

  std::vector<double> wv(v.size()), wt(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    wt[i] = valid[i] ? 1.0 : 0.0;
    wv[i] = valid[i] ? v[i] : 0.0;
  }
  std::vector<double> tv, tw, ov, ow;
  pass(wv, wt, true, tv, tw);
  pass(tv, tw, false, ov, ow);
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (valid[i] && ow[i] > 0.0) out[i] = ov[i] / ow[i];
  }
  return out;
}

}  // namespace

LayerLabelMap segment_depth(const DepthGrid& depth, const SegmentationParams& params) {
  params.validate();
  const int h = depth.height;
  const int w = depth.width;
  const std::size_t n = depth.size();
  if (h < 1 || w < 1 || n != static_cast<std::size_t>(h) * w || depth.valid.size() != n) {
    throw std::invalid_argument("segment_depth: inconsistent grid");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (depth.valid[i] && !std::isfinite(depth.values[i])) {
      throw std::invalid_argument("segment_depth: non-finite valid depth");
    }
  }

  std::vector<double> v = normalized(depth);
  if (params.sigma > 0.0) v = smooth(v, depth.valid, h, w, params.sigma);

  std::vector<Edge> edges;
  edges.reserve(2 * n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int i = r * w + c;
      if (!depth.valid[i]) continue;
      if (c + 1 < w && depth.valid[i + 1]) edges.push_back({std::abs(v[i] - v[i + 1]), i, i + 1});
      if (r + 1 < h && depth.valid[i + w]) edges.push_back({std::abs(v[i] - v[i + w]), i, i + w});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.w, x.a, x.b) < std::tie(y.w, y.a, y.b);
  });

  DisjointSet ds(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    int a = ds.find(e.a);
    int b = ds.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[a] && e.w <= threshold[b]) {
      const int root = ds.join(a, b, e.w);
      threshold[root] = e.w + params.k / ds.size[root];
    }
  }
  const int min_size = params.min_size(n);
  for (const Edge& e : edges) {
    int a = ds.find(e.a);
    int b = ds.find(e.b);
    if (a != b && (ds.size[a] < min_size || ds.size[b] < min_size)) ds.join(a, b, e.w);
  }

  LayerLabelMap out;
  out.height = h;
  out.width = w;
  out.labels.assign(n, LayerLabelMap::kInvalid);
  std::vector<int> remap(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!depth.valid[i]) continue;
    const int root = ds.find(static_cast<int>(i));
    if (remap[root] < 0) remap[root] = out.layers++;
    out.labels[i] = remap[root];
  }
  return out;
}

double layer_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("layer_iou: mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace layerfuse
