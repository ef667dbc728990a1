#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "layerfuse/config.hpp"
#include "layerfuse/ingest.hpp"
#include "layerfuse/io.hpp"
#include "layerfuse/metrics.hpp"
#include "layerfuse/synthetic.hpp"

namespace layerfuse {

/// Supplies window predictions in schedule order. fetch() runs on the producer thread.
class PredictionSource {
 public:
  virtual ~PredictionSource() = default;
  virtual int total_frames() const = 0;
  virtual WindowPrediction fetch(const WindowSpec& window) = 0;
};

class SyntheticSource : public PredictionSource {
 public:
  explicit SyntheticSource(const SyntheticScene& scene) : scene_(scene) {}
  int total_frames() const override { return scene_.frames(); }
  WindowPrediction fetch(const WindowSpec& window) override { return emit_window(scene_, window); }

 private:
  const SyntheticScene& scene_;
};

/// Window containers `window_00001.lasr`, ... in one directory. The stream length is
/// the last frame declared by any container header.
class FileSource : public PredictionSource {
 public:
  explicit FileSource(std::filesystem::path dir);
  int total_frames() const override { return total_; }
  WindowPrediction fetch(const WindowSpec& window) override;

 private:
  std::filesystem::path dir_;
  int total_ = 0;
};

std::filesystem::path window_file(const std::filesystem::path& dir, int index);

struct WindowDiagnostics {
  int window = 0;
  double scale = 1.0;
  double rot_deg = 0.0;
  double trans = 0.0;
  std::size_t layers = 0;
  std::size_t inter_edges = 0;
  std::size_t intra_edges = 0;
  double ms_register = 0.0;
  double ms_segment = 0.0;
  double ms_graph = 0.0;
  double ms_propagate = 0.0;
  std::size_t correspondences = 0;
  bool fallback = false;
};

/// World-frame trajectory plus point chunks, one chunk per window. Each timestamp
/// enters once: overlap frames keep their first emission.
class GlobalMap {
 public:
  void append_frame(const FramePrediction& world_frame, bool store_points);
  void begin_window() { chunks_.emplace_back(); }

  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<std::vector<Point3f>>& chunks() const { return chunks_; }
  std::size_t point_count() const { return points_; }
  std::vector<Point3f> points() const;
  int last_timestamp() const { return trajectory_.empty() ? 0 : static_cast<int>(trajectory_.back().timestamp); }

 private:
  Trajectory trajectory_;
  std::vector<std::vector<Point3f>> chunks_;
  std::size_t points_ = 0;
};

struct StreamStats {
  int windows = 0;
  int frames = 0;
  /// Most window predictions held by the consumer at once (previous + current).
  std::size_t peak_retained_windows = 0;
  /// Most frames held by the consumer at once.
  std::size_t peak_retained_frames = 0;
  /// Most predictions waiting in the hand-off queue.
  std::size_t peak_queued = 0;
  std::size_t fallbacks = 0;
  std::vector<double> ms_window;      // consumer processing time per window
  std::vector<double> cpu_ms_window;  // CPU time of the consumer thread per window
  double ms_total = 0.0;
};

struct StreamResult {
  GlobalMap map;
  std::vector<WindowDiagnostics> diagnostics;
  std::vector<Sim3Transform> registrations;
  StreamStats stats;
};

/// Called on the consumer thread for every newly emitted world frame (LSA-corrected),
/// in timestamp order.
using FrameSink = std::function<void(int window, const FramePrediction& world_frame)>;

inline constexpr std::size_t kQueueCapacity = 2;

/// Streams every scheduled window through registration and LSA. Errors abort with
/// the window index in the message, keeping their type (DataError, NumericalError).
StreamResult run_stream(const PipelineConfig& cfg, PredictionSource& source, const FrameSink& sink = {});

/// Builds the source from cfg (synthetic scene or input_dir) and runs it.
StreamResult run_stream(const PipelineConfig& cfg, const FrameSink& sink = {});

void write_diagnostics_csv(const std::vector<WindowDiagnostics>& diags, const std::filesystem::path& path);

/// run_stream plus exports into cfg.output_dir: trajectory.txt, pointcloud.ply,
/// diagnostics.csv and, with export_depth, estimate.lasr (all frames, world frame).
StreamResult run_pipeline(const PipelineConfig& cfg);

}  // namespace layerfuse
