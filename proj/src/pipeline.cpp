#include "layerfuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <numbers>
#include <optional>
#include <thread>

#include "layerfuse/bounded_queue.hpp"
#include "layerfuse/errors.hpp"
#include "layerfuse/lsa.hpp"
#include "layerfuse/registration.hpp"
#include "layerfuse/windowing.hpp"

namespace layerfuse {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Excludes time the thread spends descheduled; worker threads are not counted.
double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return 1e3 * static_cast<double>(ts.tv_sec) + 1e-6 * static_cast<double>(ts.tv_nsec);
}

[[noreturn]] void rethrow_for_window(int window, std::exception_ptr err) {
  const std::string prefix = "window " + std::to_string(window) + ": ";
  try {
    std::rethrow_exception(err);
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const ContainerError& e) {
    throw ContainerError(e.kind(), prefix + e.what(), e.offset(), e.frame());
  } catch (const std::invalid_argument& e) {
    throw DataError(prefix + e.what());
  } catch (const std::out_of_range& e) {
    throw DataError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

void check_prediction(WindowPrediction& pred, const WindowSpec& expected) {
  if (!(pred.window == expected)) {
    throw DataError("prediction declares window " + std::to_string(pred.window.index) + " [" +
                    std::to_string(pred.window.start) + ", " + std::to_string(pred.window.end()) +
                    "], expected [" + std::to_string(expected.start) + ", " +
                    std::to_string(expected.end()) + "]");
  }
  try {
    pred.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  for (auto& f : pred.frames) {
    if (!is_rotation(f.pose.rotation, 1e-5) || !f.pose.translation.allFinite()) {
      throw DataError("frame " + std::to_string(f.timestamp) + " has an invalid pose");
    }
    f.points.mask_non_finite();
    for (std::size_t i = 0; i < f.confidence.size(); ++i) {
      const float c = f.confidence[i];
      if (!std::isfinite(c) || c < 0.0f) {
        throw DataError("frame " + std::to_string(f.timestamp) + " has a negative or non-finite confidence");
      }
    }
  }
}

WindowPrediction to_world(WindowPrediction local, const Sim3Transform& reg) {
  for (auto& f : local.frames) {
    f.points = transform_pointmap(reg, f.points);
    f.pose = compose_world_pose(reg, f.pose);
  }
  return local;
}

// Consumer-side accounting of prediction-sized state.
class Retention {
 public:
  void hold(std::size_t frames) {
    ++windows_;
    frames_ += frames;
    peak_windows_ = std::max(peak_windows_, windows_);
    peak_frames_ = std::max(peak_frames_, frames_);
  }
  void release(std::size_t frames) {
    --windows_;
    frames_ -= frames;
  }
  std::size_t peak_windows() const { return peak_windows_; }
  std::size_t peak_frames() const { return peak_frames_; }

 private:
  std::size_t windows_ = 0, frames_ = 0, peak_windows_ = 0, peak_frames_ = 0;
};

struct Produced {
  WindowSpec spec;
  std::optional<WindowPrediction> pred;
  std::exception_ptr error;
};

// Previous window after registration: the registered geometry is the target of the
// next registration, the LSA-corrected geometry the reference for the next LSA.
struct PrevState {
  WindowPrediction registered;
  WindowPrediction corrected;
  double scale = 1.0;
};

}  // namespace

FileSource::FileSource(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw DataError("input_dir " + dir_.string() + " is not a directory");
  for (int i = 1;; ++i) {
    const auto path = window_file(dir_, i);
    if (!std::filesystem::exists(path)) {
      if (i == 1) throw DataError("no window containers in " + dir_.string());
      break;
    }
    try {
      const ContainerHeader h = inspect_container(path);
      total_ = std::max(total_, h.window.end());
    } catch (...) {
      rethrow_for_window(i, std::current_exception());
    }
  }
}

WindowPrediction FileSource::fetch(const WindowSpec& window) {
  return read_window_predictions(window_file(dir_, window.index), window);
}

std::filesystem::path window_file(const std::filesystem::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "window_%05d.lasr", index);
  return dir / name;
}

void GlobalMap::append_frame(const FramePrediction& f, bool store_points) {
  if (!trajectory_.empty() && f.timestamp <= last_timestamp()) return;
  trajectory_.push_back({static_cast<double>(f.timestamp), f.pose});
  if (!store_points) return;
  if (chunks_.empty()) chunks_.emplace_back();
  auto& chunk = chunks_.back();
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    if (!f.points.valid(i)) continue;
    const float* p = &f.points.raw_points()[3 * i];
    chunk.emplace_back(p[0], p[1], p[2]);
    ++points_;
  }
}

std::vector<Point3f> GlobalMap::points() const {
  std::vector<Point3f> out;
  out.reserve(points_);
  for (const auto& c : chunks_) out.insert(out.end(), c.begin(), c.end());
  return out;
}

StreamResult run_stream(const PipelineConfig& cfg, PredictionSource& source, const FrameSink& sink) {
  cfg.validate();
  const auto t_start = Clock::now();
  const int total = source.total_frames();
  WindowScheduler scheduler(total, cfg.window_len, cfg.overlap);

  LsaParams lsa = cfg.lsa;
  lsa.irls = cfg.registration.irls;

  BoundedQueue<Produced> queue(kQueueCapacity);
  std::thread producer([&] {
    while (!scheduler.done()) {
      Produced item;
      item.spec = scheduler.next();
      try {
        item.pred = source.fetch(item.spec);
        check_prediction(*item.pred, item.spec);
      } catch (...) {
        item.pred.reset();
        item.error = std::current_exception();
      }
      const bool failed = static_cast<bool>(item.error);
      if (!queue.push(std::move(item)) || failed) break;
    }
    queue.close();
  });

  StreamResult res;
  Retention retention;
  std::optional<PrevState> prev;
  std::exception_ptr failure;
  int failed_window = 0;

  while (auto item = queue.pop()) {
    if (item->error) {
      failure = item->error;
      failed_window = item->spec.index;
      break;
    }
    const auto t_window = Clock::now();
    const double cpu_window = thread_cpu_ms();
    WindowPrediction curr = std::move(*item->pred);
    item.reset();
    const WindowSpec spec = curr.window;
    retention.hold(curr.frames.size());
    try {
      if (prev && (curr.height != prev->registered.height || curr.width != prev->registered.width)) {
        throw DataError("image size differs from the previous window");
      }
      WindowDiagnostics diag;
      diag.window = spec.index;

      auto t0 = Clock::now();
      std::vector<int> overlap;
      Sim3Transform reg;
      if (prev) {
        overlap = overlap_frames(prev->registered.window, spec);
        const RegistrationResult r =
            register_submap(prev->registered, curr, overlap, cfg.registration, prev->scale);
        reg = r.transform;
        diag.correspondences = r.correspondences;
        diag.fallback = r.fallback;
        if (r.fallback) ++res.stats.fallbacks;
      }
      if (!reg.valid()) throw NumericalError("registration produced an invalid similarity");
      WindowPrediction world = to_world(std::move(curr), reg);
      diag.ms_register = ms_since(t0);
      diag.scale = reg.scale;
      diag.rot_deg = rotation_angle(reg.rotation) * 180.0 / std::numbers::pi;
      diag.trans = reg.translation.norm();

      WindowPrediction corrected;
      if (cfg.lsa.enabled) {
        LsaResult l = run_lsa(prev ? &prev->corrected : nullptr, world, overlap, lsa);
        corrected = std::move(l.corrected);
        diag.layers = l.layers;
        diag.inter_edges = l.graph.inter_edges;
        diag.intra_edges = l.graph.intra_edges;
        diag.ms_segment = l.ms_segment;
        diag.ms_graph = l.ms_graph;
        diag.ms_propagate = l.ms_propagate;
      } else {
        corrected = world;
      }

      res.map.begin_window();
      for (const auto& f : corrected.frames) {
        if (f.timestamp <= res.map.last_timestamp()) continue;
        res.map.append_frame(f, cfg.store_points);
        if (sink) sink(spec.index, f);
        ++res.stats.frames;
      }

      if (prev) retention.release(prev->registered.frames.size());
      prev = PrevState{std::move(world), std::move(corrected), reg.scale};
      res.registrations.push_back(reg);
      res.diagnostics.push_back(diag);
      ++res.stats.windows;
      res.stats.ms_window.push_back(ms_since(t_window));
      res.stats.cpu_ms_window.push_back(thread_cpu_ms() - cpu_window);
    } catch (...) {
      failure = std::current_exception();
      failed_window = spec.index;
      break;
    }
  }
  queue.close();
  producer.join();
  if (failure) rethrow_for_window(failed_window, failure);

  res.stats.peak_retained_windows = retention.peak_windows();
  res.stats.peak_retained_frames = retention.peak_frames();
  res.stats.peak_queued = queue.peak();
  res.stats.ms_total = ms_since(t_start);
  return res;
}

StreamResult run_stream(const PipelineConfig& cfg, const FrameSink& sink) {
  cfg.validate();
  if (cfg.input_mode == InputMode::Files) {
    FileSource src(cfg.input_dir);
    return run_stream(cfg, src, sink);
  }
  const SyntheticScene scene(cfg.scene);
  SyntheticSource src(scene);
  return run_stream(cfg, src, sink);
}

void write_diagnostics_csv(const std::vector<WindowDiagnostics>& diags, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "window,scale,rot_deg,trans,layers,inter_edges,intra_edges,ms_register,ms_segment,ms_graph,ms_propagate\n";
  char buf[512];
  for (const auto& d : diags) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%zu,%zu,%zu,%.3f,%.3f,%.3f,%.3f\n", d.window, d.scale,
                  d.rot_deg, d.trans, d.layers, d.inter_edges, d.intra_edges, d.ms_register, d.ms_segment,
                  d.ms_graph, d.ms_propagate);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

StreamResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  std::filesystem::path out_dir = cfg.output_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.output_dir);
  std::filesystem::create_directories(out_dir);

  std::unique_ptr<PredictionSource> source;
  std::optional<SyntheticScene> scene;
  if (cfg.input_mode == InputMode::Files) {
    source = std::make_unique<FileSource>(cfg.input_dir);
  } else {
    scene.emplace(cfg.scene);
    source = std::make_unique<SyntheticSource>(*scene);
  }

  std::unique_ptr<ContainerWriter> depth_out;
  FrameSink sink;
  if (cfg.export_depth) {
    int h = 0, w = 0;
    if (scene) {
      h = scene->config().height;
      w = scene->config().width;
    } else {
      const ContainerHeader hd = inspect_container(window_file(cfg.input_dir, 1));
      h = hd.height;
      w = hd.width;
    }
    depth_out = std::make_unique<ContainerWriter>(out_dir / "estimate.lasr",
                                                  WindowSpec{1, 1, source->total_frames()}, h, w);
    sink = [&](int, const FramePrediction& f) { depth_out->write_frame(f); };
  }

  StreamResult res = run_stream(cfg, *source, sink);
  if (depth_out) depth_out->finish();

  if (cfg.export_trajectory) write_tum(res.map.trajectory(), out_dir / "trajectory.txt");
  if (cfg.export_pointcloud != PointCloudFormat::None && cfg.store_points) {
    write_ply(voxel_downsample(res.map.points(), cfg.export_voxel), out_dir / "pointcloud.ply",
              cfg.export_pointcloud == PointCloudFormat::PlyAscii ? PlyFormat::Ascii
                                                                  : PlyFormat::BinaryLittleEndian);
  }
  write_diagnostics_csv(res.diagnostics, out_dir / "diagnostics.csv");
  return res;
}

}  // namespace layerfuse
