#include "layerfuse/lsa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "layerfuse/errors.hpp"
#include "layerfuse/parallel.hpp"

namespace layerfuse {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Joint pixel counts of two label maps, keyed by (label a, label b).
std::map<std::pair<int, int>, std::size_t> contingency(const LayerLabelMap& a, const LayerLabelMap& b) {
  std::map<std::pair<int, int>, std::size_t> counts;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] >= 0 && b.labels[i] >= 0) ++counts[{a.labels[i], b.labels[i]}];
  }
  return counts;
}

void link(LayerGraph& g, const LayerLabelMap& parent, const LayerLabelMap& child, double tau,
          EdgeKind kind) {
  if (parent.labels.size() != child.labels.size()) {
    throw std::invalid_argument("build_layer_graph: label maps differ in size");
  }
  const auto sa = parent.layer_sizes();
  const auto sb = child.layer_sizes();
  for (const auto& [key, inter] : contingency(parent, child)) {
    const double uni = static_cast<double>(sa[key.first] + sb[key.second] - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (!(iou > tau)) continue;
    LayerEdge e;
    e.parent = g.find(parent.window, parent.timestamp, key.first);
    e.child = g.find(child.window, child.timestamp, key.second);
    e.weight = iou;
    e.kind = kind;
    g.edges.push_back(e);
    (kind == EdgeKind::Inter ? g.inter_edges : g.intra_edges) += 1;
  }
}

}  // namespace

DepthGrid pseudo_depth(const PointMap& pm_world) {
  DepthGrid d(pm_world.height(), pm_world.width());
  for (std::size_t i = 0; i < pm_world.size(); ++i) {
    if (!pm_world.valid(i)) continue;
    d.values[i] = pm_world.point(i).z();
    d.valid[i] = 1;
  }
  return d;
}

DepthGrid view_depth(const PointMap& pm_world, const RigidPose& camera_to_world) {
  DepthGrid d(pm_world.height(), pm_world.width());
  const Vec3 axis = camera_to_world.rotation * Vec3(0.0, 0.0, -1.0);
  for (std::size_t i = 0; i < pm_world.size(); ++i) {
    if (!pm_world.valid(i)) continue;
    d.values[i] = axis.dot(pm_world.point(i) - camera_to_world.translation);
    d.valid[i] = 1;
  }
  return d;
}

int LayerGraph::find(int window, int timestamp, int layer) const {
  const auto it = index_.find({window, timestamp, layer});
  return it == index_.end() ? -1 : it->second;
}

int LayerGraph::add_vertex(const LayerVertex& v) {
  const auto [it, inserted] = index_.try_emplace({v.window, v.timestamp, v.layer},
                                                 static_cast<int>(vertices.size()));
  if (inserted) vertices.push_back(v);
  return it->second;
}

LayerGraph build_layer_graph(const std::vector<LayerLabelMap>& prev_layers,
                             const std::vector<LayerLabelMap>& curr_layers, double tau) {
  LayerGraph g;
  for (const auto* set : {&prev_layers, &curr_layers}) {
    for (const auto& m : *set) {
      for (int l = 0; l < m.layers; ++l) g.add_vertex({m.window, m.timestamp, l});
    }
  }

  for (const auto& p : prev_layers) {
    for (const auto& c : curr_layers) {
      if (c.timestamp == p.timestamp) link(g, p, c, tau, EdgeKind::Inter);
    }
  }

  std::vector<const LayerLabelMap*> ordered;
  for (const auto& c : curr_layers) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->timestamp < b->timestamp; });
  for (std::size_t j = 1; j < ordered.size(); ++j) {
    if (ordered[j]->timestamp == ordered[j - 1]->timestamp + 1) {
      link(g, *ordered[j - 1], *ordered[j], tau, EdgeKind::Intra);
    }
  }
  return g;
}

double estimate_layer_scale(const DepthGrid& source, const DepthGrid& target,
                            const std::vector<std::size_t>& pixels, const IrlsConfig& cfg) {
  std::vector<double> p, q;
  p.reserve(pixels.size());
  q.reserve(pixels.size());
  for (std::size_t i : pixels) {
    if (!source.valid[i] || !target.valid[i]) continue;
    if (!(source.values[i] > 0.0) || !(target.values[i] > 0.0)) continue;
    p.push_back(source.values[i]);
    q.push_back(target.values[i]);
  }
  if (p.empty()) throw std::invalid_argument("estimate_layer_scale: empty intersection");
  return irls_scale_1d(p, q, cfg).scale;
}

LayerScaleTable propagate_scales(const LayerGraph& graph, const std::vector<double>& inter_scales,
                                 const WindowSpec& window) {
  if (inter_scales.size() != graph.edges.size()) {
    throw std::invalid_argument("propagate_scales: one scale slot per edge required");
  }
  const std::size_t nv = graph.vertices.size();
  LayerScaleTable table;
  table.accum.assign(nv, 0.0);
  table.weight.assign(nv, 0.0);
  table.scale.assign(nv, 1.0);

  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const LayerEdge& edge = graph.edges[e];
    if (edge.kind != EdgeKind::Inter || !std::isfinite(inter_scales[e])) continue;
    table.accum[edge.child] += edge.weight * inter_scales[e];
    table.weight[edge.child] += edge.weight;
  }

  std::map<int, std::vector<const LayerEdge*>> intra_by_time;
  for (const LayerEdge& edge : graph.edges) {
    if (edge.kind == EdgeKind::Intra) intra_by_time[graph.vertices[edge.child].timestamp].push_back(&edge);
  }
  for (int t = window.start + 1; t <= window.end(); ++t) {
    const auto it = intra_by_time.find(t);
    if (it == intra_by_time.end()) continue;
    for (const LayerEdge* edge : it->second) {
      const double wp = table.weight[edge->parent];
      if (!(wp > 0.0)) continue;
      const double mu = table.accum[edge->parent] / wp;
      table.accum[edge->child] += edge->weight * mu;
      table.weight[edge->child] += edge->weight;
    }
  }

  for (std::size_t v = 0; v < nv; ++v) {
    if (table.weight[v] > 0.0) table.scale[v] = table.accum[v] / table.weight[v];
  }
  return table;
}

PointMap apply_layer_scales(const PointMap& pm_world, const LayerLabelMap& labels,
                            const std::vector<double>& scales, const Vec3& camera_center) {
  if (labels.labels.size() != pm_world.size()) {
    throw std::invalid_argument("apply_layer_scales: label map does not match the point map");
  }
  PointMap out = pm_world;
  for (std::size_t i = 0; i < pm_world.size(); ++i) {
    if (!pm_world.valid(i)) continue;
    const int l = labels.labels[i];
    if (l < 0 || l >= static_cast<int>(scales.size()) || scales[l] == 1.0) continue;
    out.set_point(i, camera_center + scales[l] * (pm_world.point(i) - camera_center));
  }
  return out;
}

void LsaParams::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("iou_tau must be in [0, 1)");
  segmentation.validate();
  irls.validate();
}

LsaResult run_lsa(const WindowPrediction* prev_world, const WindowPrediction& curr_world,
                  const std::vector<int>& overlap, const LsaParams& params) {
  params.validate();
  LsaResult res;
  const WindowSpec& win = curr_world.window;

  auto t0 = std::chrono::steady_clock::now();
  res.curr_layers.resize(curr_world.frames.size());
  parallel_for(curr_world.frames.size(), [&](std::size_t i) {
    const FramePrediction& f = curr_world.frames[i];
    LayerLabelMap m = segment_depth(pseudo_depth(f.points), params.segmentation);
    m.timestamp = f.timestamp;
    m.window = win.index;
    res.curr_layers[i] = std::move(m);
  });
  std::vector<LayerLabelMap> prev_layers;
  if (prev_world != nullptr) {
    prev_layers.resize(overlap.size());
    parallel_for(overlap.size(), [&](std::size_t i) {
      LayerLabelMap m =
          segment_depth(pseudo_depth(prev_world->frame(overlap[i]).points), params.segmentation);
      m.timestamp = overlap[i];
      m.window = prev_world->window.index;
      prev_layers[i] = std::move(m);
    });
  }
  for (const auto& m : res.curr_layers) res.layers += static_cast<std::size_t>(m.layers);
  res.ms_segment = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  res.graph = build_layer_graph(prev_layers, res.curr_layers, params.tau);
  res.ms_graph = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<double> inter_scales(res.graph.edges.size(), std::nan(""));
  if (prev_world != nullptr) {
    for (std::size_t j = 0; j < overlap.size(); ++j) {
      const int t = overlap[j];
      const FramePrediction& fp = prev_world->frame(t);
      const FramePrediction& fc = curr_world.frame(t);
      const DepthGrid target = view_depth(fp.points, fp.pose);
      const DepthGrid source = view_depth(fc.points, fc.pose);
      const LayerLabelMap& lp = prev_layers[j];
      const LayerLabelMap& lc = res.curr_layers[t - win.start];
      std::map<std::pair<int, int>, std::vector<std::size_t>> pixels;
      for (std::size_t i = 0; i < lp.labels.size(); ++i) {
        if (lp.labels[i] >= 0 && lc.labels[i] >= 0) pixels[{lp.labels[i], lc.labels[i]}].push_back(i);
      }
      for (std::size_t e = 0; e < res.graph.edges.size(); ++e) {
        const LayerEdge& edge = res.graph.edges[e];
        if (edge.kind != EdgeKind::Inter) continue;
        const LayerVertex& pv = res.graph.vertices[edge.parent];
        const LayerVertex& cv = res.graph.vertices[edge.child];
        if (pv.timestamp != t) continue;
        try {
          inter_scales[e] = estimate_layer_scale(source, target, pixels[{pv.layer, cv.layer}], params.irls);
        } catch (const std::invalid_argument&) {
          // no usable depth pairs; the edge contributes nothing
        } catch (const NumericalError&) {
        }
      }
    }
  }
  res.table = propagate_scales(res.graph, inter_scales, win);
  res.ms_propagate = elapsed_ms(t0);

  res.corrected = curr_world;
  parallel_for(curr_world.frames.size(), [&](std::size_t i) {
    FramePrediction& f = res.corrected.frames[i];
    const LayerLabelMap& m = res.curr_layers[i];
    std::vector<double> scales(m.layers, 1.0);
    for (int l = 0; l < m.layers; ++l) {
      const int v = res.graph.find(win.index, f.timestamp, l);
      if (v >= 0) scales[l] = res.table.scale[v];
    }
    f.points = apply_layer_scales(f.points, m, scales, f.pose.translation);
  });
  return res;
}

}  // namespace layerfuse
