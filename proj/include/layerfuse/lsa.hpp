#pragma once

#include <map>
#include <tuple>
#include <vector>

#include "layerfuse/geometry.hpp"
#include "layerfuse/ingest.hpp"
#include "layerfuse/irls.hpp"
#include "layerfuse/segmentation.hpp"

namespace layerfuse {

/// Z coordinate of every valid point; the segmentation signal.
DepthGrid pseudo_depth(const PointMap& pm_world);

/// Distance along the optical axis of the camera with the given camera-to-world
/// pose (cameras look along −Z).
DepthGrid view_depth(const PointMap& pm_world, const RigidPose& camera_to_world);

struct LayerVertex {
  int window = 0;
  int timestamp = 0;
  int layer = 0;

  auto key() const { return std::tie(window, timestamp, layer); }
  bool operator==(const LayerVertex&) const = default;
};

enum class EdgeKind { Inter, Intra };

struct LayerEdge {
  int parent = 0;  // vertex ids
  int child = 0;
  double weight = 0.0;  // IoU
  EdgeKind kind = EdgeKind::Inter;
};

struct LayerGraph {
  std::vector<LayerVertex> vertices;
  std::vector<LayerEdge> edges;
  std::size_t inter_edges = 0;
  std::size_t intra_edges = 0;

  /// Vertex id, or −1 when absent.
  int find(int window, int timestamp, int layer) const;
  int add_vertex(const LayerVertex& v);

 private:
  std::map<std::tuple<int, int, int>, int> index_;
};

/// Inter edges link layers of the previous window's overlap frames to the same
/// timestamp of the current window; intra edges link consecutive frames of the
/// current window. Only pairs with IoU strictly above tau are kept. Vertices are
/// created for every layer of every given label map.
LayerGraph build_layer_graph(const std::vector<LayerLabelMap>& prev_layers,
                             const std::vector<LayerLabelMap>& curr_layers, double tau);

/// Robust 1-D scale s with s·source ≈ target over the given pixel indices, where
/// pixels invalid or non-positive in either grid are skipped.
double estimate_layer_scale(const DepthGrid& source, const DepthGrid& target,
                            const std::vector<std::size_t>& pixels, const IrlsConfig& cfg);

struct LayerScaleTable {
  std::vector<double> accum;   // A per vertex
  std::vector<double> weight;  // W per vertex
  std::vector<double> scale;   // A/W, or 1 where W = 0
};

/// Weighted scale propagation. inter_scales is indexed like graph.edges (entries of
/// intra edges are ignored). Inter edges are accumulated first; then, for each
/// timestamp after the window's first frame in increasing order, every intra edge
/// into that timestamp whose parent has W > 0 adds w·(A/W of the parent).
LayerScaleTable propagate_scales(const LayerGraph& graph, const std::vector<double>& inter_scales,
                                 const WindowSpec& window);

/// p' = c + s·(p − c) on every valid pixel, with s looked up by layer label.
/// Labels outside [0, scales.size()) keep scale 1.
PointMap apply_layer_scales(const PointMap& pm_world, const LayerLabelMap& labels,
                            const std::vector<double>& scales, const Vec3& camera_center);

struct LsaParams {
  bool enabled = true;
  double tau = 0.3;
  SegmentationParams segmentation;
  IrlsConfig irls;

  void validate() const;
};

struct LsaResult {
  WindowPrediction corrected;
  LayerGraph graph;
  LayerScaleTable table;
  std::vector<LayerLabelMap> curr_layers;
  std::size_t layers = 0;  // total layers over the current window's frames
  double ms_segment = 0.0;
  double ms_graph = 0.0;
  double ms_propagate = 0.0;  // per-edge scale estimation plus propagation
};

/// Corrects the registered current window against the (already corrected) previous
/// window. Both are in world coordinates. With no previous window or no inter edges
/// every scale is 1 and the geometry is returned unchanged.
LsaResult run_lsa(const WindowPrediction* prev_world, const WindowPrediction& curr_world,
                  const std::vector<int>& overlap, const LsaParams& params);

}  // namespace layerfuse
