#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "layerfuse/config.hpp"

namespace layerfuse {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Entry point of the `layerfuse` tool. args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

struct EvalReport {
  double ate = 0.0;
  double rpe_trans = 0.0;
  double rpe_rot_deg = 0.0;
  bool has_depth = false;
  double abs_rel = 0.0;
  double delta_125 = 0.0;
  bool has_points = false;
  PointMapEval points;
  std::size_t frames = 0;
};

/// Scores the outputs of a run in `dir` against the synthetic ground truth described
/// by cfg.scene: trajectory.txt always, estimate.lasr and pointcloud.ply when present.
EvalReport evaluate_outputs(const PipelineConfig& cfg, const std::filesystem::path& dir);

/// Flat `key = value` block.
std::string format_report(const EvalReport& r);
/// Single-line JSON record; field order: sequence, frames, ate, rpe_trans, rpe_rot_deg,
/// abs_rel, delta_125, acc_mean, acc_median, comp_mean, comp_median, chamfer.
std::string format_record(const EvalReport& r, const std::string& sequence);

}  // namespace layerfuse
