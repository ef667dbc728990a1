#pragma once

#include <cstdint>
#include <vector>

namespace layerfuse {

/// Scalar H×W grid with a validity mask.
struct DepthGrid {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthGrid() = default;
  DepthGrid(int h, int w);
  std::size_t size() const { return values.size(); }
};

/// Per-frame layer labels: ids 0..layers−1 in raster order of first appearance,
/// kInvalid where the input was invalid.
struct LayerLabelMap {
  static constexpr int kInvalid = -1;

  int height = 0;
  int width = 0;
  int timestamp = 0;
  int window = 0;
  int layers = 0;
  std::vector<int> labels;

  std::vector<std::size_t> layer_sizes() const;
  /// Boolean mask of one layer.
  std::vector<std::uint8_t> mask(int layer) const;
};

struct SegmentationParams {
  double sigma = 0.0;  // Gaussian pre-smoothing in pixels; 0 disables it
  double k = 0.2;      // in depth normalized to [0, 1]
  double min_size_frac = 0.005;

  void validate() const;
  /// Minimum component size in pixels for a grid of n pixels (at least 1).
  int min_size(std::size_t n) const;
};

/// Graph-based segmentation of a depth grid on the 4-connected pixel graph.
/// Depth is normalized to [0, 1] over the valid pixels and optionally smoothed;
/// edge weight is the absolute difference of neighboring values. Components merge
/// when the edge weight is at most min(Int(C) + k/|C|) of both sides; a final pass
/// merges components below the minimum size along the cheapest remaining edges.
/// Edges are processed in (weight, pixel index) order, so labels are deterministic.
LayerLabelMap segment_depth(const DepthGrid& depth, const SegmentationParams& params);

/// |a ∩ b| / |a ∪ b| over boolean masks of the same size; 0 when the union is empty.
double layer_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

}  // namespace layerfuse
