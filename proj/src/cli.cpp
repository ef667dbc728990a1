#include "layerfuse/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "layerfuse/errors.hpp"
#include "layerfuse/ingest.hpp"
#include "layerfuse/io.hpp"
#include "layerfuse/lsa.hpp"
#include "layerfuse/metrics.hpp"
#include "layerfuse/pipeline.hpp"
#include "layerfuse/synthetic.hpp"
#include "layerfuse/windowing.hpp"

namespace layerfuse {

namespace {

constexpr std::size_t kEvalPointCap = 200000;

PipelineConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  PipelineConfig cfg;
  if (!path.empty()) cfg = load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

template <typename T>
std::vector<T> stride_sample(const std::vector<T>& v, std::size_t cap) {
  if (v.size() <= cap) return v;
  const std::size_t stride = (v.size() + cap - 1) / cap;
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(v[i]);
  return out;
}

Trajectory ground_truth_trajectory(const SyntheticScene& scene) {
  Trajectory gt;
  for (int t = 1; t <= scene.frames(); ++t) gt.push_back({static_cast<double>(t), scene.pose(t)});
  return gt;
}

int cmd_run(const PipelineConfig& cfg, std::ostream& out) {
  const StreamResult res = run_pipeline(cfg);
  out << "windows = " << res.stats.windows << "\n"
      << "frames = " << res.stats.frames << "\n"
      << "points = " << res.map.point_count() << "\n"
      << "fallbacks = " << res.stats.fallbacks << "\n"
      << "peak_retained_windows = " << res.stats.peak_retained_windows << "\n"
      << "ms_total = " << res.stats.ms_total << "\n";
  return kExitOk;
}

int cmd_gen(const PipelineConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = cfg.output_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.output_dir);
  std::filesystem::create_directories(dir);
  const SyntheticScene scene(cfg.scene);
  int windows = 0;
  for (const WindowSpec& w : schedule_windows(scene.frames(), cfg.window_len, cfg.overlap)) {
    write_window_predictions(emit_window(scene, w), window_file(dir, w.index));
    ++windows;
  }
  write_tum(ground_truth_trajectory(scene), dir / "groundtruth.txt");
  std::ofstream cfg_out(dir / "scene.cfg");
  cfg_out << config_to_text(cfg);
  if (!cfg_out) throw DataError("cannot write " + (dir / "scene.cfg").string());
  out << "wrote " << windows << " window containers to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& dir, const std::string& sequence,
             std::ostream& out) {
  const EvalReport r = evaluate_outputs(cfg, dir);
  const std::string report = format_report(r);
  const std::string record = format_record(r, sequence);
  std::ofstream(std::filesystem::path(dir) / "metrics.txt") << report;
  std::ofstream(std::filesystem::path(dir) / "metrics.jsonl") << record << "\n";
  out << report << record << "\n";
  return kExitOk;
}

int cmd_inspect(const std::vector<std::string>& files, std::ostream& out) {
  for (const auto& f : files) {
    const ContainerHeader h = inspect_container(f);
    out << f << ": version=" << h.version << " window=" << h.window.index << " start=" << h.window.start
        << " frames=" << h.window.length << " height=" << h.height << " width=" << h.width << "\n";
  }
  return kExitOk;
}

}  // namespace

EvalReport evaluate_outputs(const PipelineConfig& cfg, const std::filesystem::path& dir) {
  const SyntheticScene scene(cfg.scene);
  const Trajectory gt = ground_truth_trajectory(scene);
  const Trajectory est = read_tum(dir / "trajectory.txt");
  EvalReport r;
  r.frames = est.size();
  r.ate = ate(est, gt);
  const RpeResult rp = rpe(est, gt, cfg.rpe_delta);
  r.rpe_trans = rp.trans;
  r.rpe_rot_deg = rp.rot_deg;

  if (std::filesystem::exists(dir / "estimate.lasr")) {
    ContainerReader reader(dir / "estimate.lasr");
    DepthEvaluator ev;
    while (reader.has_next()) {
      const FramePrediction f = reader.next();
      const GroundTruthFrame g = scene.render_frame(f.timestamp);
      DepthGrid gd(g.points.height(), g.points.width());
      for (std::size_t i = 0; i < gd.size(); ++i) {
        gd.values[i] = g.depth[i];
        gd.valid[i] = g.labels[i] >= 0 ? 1 : 0;
      }
      ev.add(view_depth(f.points, f.pose), gd);
    }
    const DepthEval d = ev.finish(cfg.depth_align);
    r.has_depth = true;
    r.abs_rel = d.abs_rel;
    r.delta_125 = d.delta_125;
  }

  if (std::filesystem::exists(dir / "pointcloud.ply")) {
    std::vector<Vec3> est_pts;
    for (const auto& p : read_ply(dir / "pointcloud.ply")) est_pts.push_back(p.cast<double>());
    std::vector<Vec3> gt_pts;
    for (int t = 1; t <= scene.frames(); ++t) {
      const GroundTruthFrame g = scene.render_frame(t);
      for (std::size_t i = 0; i < g.points.size(); ++i) {
        if (g.points.valid(i)) gt_pts.push_back(g.points.point(i));
      }
    }
    if (!est_pts.empty()) {
      PointMapEvalConfig pc;
      pc.icp = cfg.icp;
      pc.initial = align_trajectory(match_trajectories(est, gt));
      r.points = pointmap_eval(stride_sample(est_pts, kEvalPointCap), stride_sample(gt_pts, kEvalPointCap), pc);
      r.has_points = true;
    }
  }
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream s;
  s.precision(9);
  s << "frames = " << r.frames << "\n"
    << "ate = " << r.ate << "\n"
    << "rpe_trans = " << r.rpe_trans << "\n"
    << "rpe_rot_deg = " << r.rpe_rot_deg << "\n";
  if (r.has_depth) s << "abs_rel = " << r.abs_rel << "\n" << "delta_125 = " << r.delta_125 << "\n";
  if (r.has_points) {
    s << "acc_mean = " << r.points.acc_mean << "\n"
      << "acc_median = " << r.points.acc_median << "\n"
      << "comp_mean = " << r.points.comp_mean << "\n"
      << "comp_median = " << r.points.comp_median << "\n"
      << "chamfer = " << r.points.chamfer << "\n";
  }
  return s.str();
}

std::string format_record(const EvalReport& r, const std::string& sequence) {
  nlohmann::ordered_json j;
  j["sequence"] = sequence;
  j["frames"] = r.frames;
  j["ate"] = r.ate;
  j["rpe_trans"] = r.rpe_trans;
  j["rpe_rot_deg"] = r.rpe_rot_deg;
  j["abs_rel"] = r.has_depth ? nlohmann::ordered_json(r.abs_rel) : nlohmann::ordered_json(nullptr);
  j["delta_125"] = r.has_depth ? nlohmann::ordered_json(r.delta_125) : nlohmann::ordered_json(nullptr);
  auto pt = [&](double v) { return r.has_points ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  j["acc_mean"] = pt(r.points.acc_mean);
  j["acc_median"] = pt(r.points.acc_median);
  j["comp_mean"] = pt(r.points.comp_mean);
  j["comp_median"] = pt(r.points.comp_median);
  j["chamfer"] = pt(r.points.chamfer);
  return j.dump();
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming Sim(3) submap fusion with layer-wise scale alignment", "layerfuse"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one config key (key=value), repeatable");
  };

  std::string output;
  auto* run = app.add_subcommand("run", "stream windows through registration and LSA");
  add_common(run);
  run->add_option("--output", output, "output directory (overrides output_dir)");

  auto* gen = app.add_subcommand("gen", "write synthetic window containers");
  add_common(gen);
  gen->add_option("--output", output, "output directory (overrides output_dir)");

  std::string eval_dir, sequence = "synthetic";
  auto* eval = app.add_subcommand("eval", "score run outputs against the synthetic ground truth");
  add_common(eval);
  eval->add_option("--dir", eval_dir, "directory written by `run`")->required();
  eval->add_option("--sequence", sequence, "name stored in the record");

  std::vector<std::string> files;
  auto* inspect = app.add_subcommand("inspect", "print window container headers");
  inspect->add_option("files", files, "container files")->required();

  std::vector<std::string> argv_store{"layerfuse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (inspect->parsed()) return cmd_inspect(files, out);
    PipelineConfig cfg;
    try {
      if (!output.empty()) sets.push_back("output_dir=" + output);
      cfg = build_config(config_path, sets);
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    if (run->parsed()) return cmd_run(cfg, out);
    if (gen->parsed()) return cmd_gen(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, eval_dir, sequence, out);
  } catch (const ContainerError& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace layerfuse
