#include "layerfuse/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "layerfuse/errors.hpp"

namespace layerfuse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest form that round-trips
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < -2147483648LL || x > 2147483647LL) throw std::invalid_argument(key + ": out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": expected true/false, got '" + v + "'");
}

Range to_range(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw std::invalid_argument(key + ": expected 'lo,hi'");
  return {to_double(key, trim(v.substr(0, comma))), to_double(key, trim(v.substr(comma + 1)))};
}

std::string from_bool(bool b) { return b ? "true" : "false"; }
std::string from_range(const Range& r) { return fmt(r.lo) + "," + fmt(r.hi); }

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define LF_INT(expr) \
  Field { [](PipelineConfig& c, const std::string& k, const std::string& v) { expr = to_int(k, v); }, \
          [](const PipelineConfig& c) { return std::to_string(expr); } }
#define LF_DOUBLE(expr) \
  Field { [](PipelineConfig& c, const std::string& k, const std::string& v) { expr = to_double(k, v); }, \
          [](const PipelineConfig& c) { return fmt(expr); } }
#define LF_BOOL(expr) \
  Field { [](PipelineConfig& c, const std::string& k, const std::string& v) { expr = to_bool(k, v); }, \
          [](const PipelineConfig& c) { return from_bool(expr); } }
#define LF_RANGE(expr) \
  Field { [](PipelineConfig& c, const std::string& k, const std::string& v) { expr = to_range(k, v); }, \
          [](const PipelineConfig& c) { return from_range(expr); } }
#define LF_STRING(expr) \
  Field { [](PipelineConfig& c, const std::string&, const std::string& v) { expr = v; }, \
          [](const PipelineConfig& c) { return expr; } }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"window_len", LF_INT(c.window_len)},
      {"overlap", LF_INT(c.overlap)},
      {"huber_delta_factor", LF_DOUBLE(c.registration.irls.delta_factor)},
      {"irls_max_iters", LF_INT(c.registration.irls.max_iters)},
      {"irls_rel_tol", LF_DOUBLE(c.registration.irls.rel_tol)},
      {"scale_estimator",
       {[](PipelineConfig& c, const std::string&, const std::string& v) {
          c.registration.scale_estimator = parse_scale_estimator(v);
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.registration.scale_estimator)); }}},
      {"rigid_from",
       {[](PipelineConfig& c, const std::string&, const std::string& v) {
          c.registration.rigid_from = parse_rigid_source(v);
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.registration.rigid_from)); }}},
      {"lsa_enabled", LF_BOOL(c.lsa.enabled)},
      {"iou_tau", LF_DOUBLE(c.lsa.tau)},
      {"seg_sigma", LF_DOUBLE(c.lsa.segmentation.sigma)},
      {"seg_k", LF_DOUBLE(c.lsa.segmentation.k)},
      {"seg_min_size_frac", LF_DOUBLE(c.lsa.segmentation.min_size_frac)},
      {"depth_align",
       {[](PipelineConfig& c, const std::string&, const std::string& v) { c.depth_align = parse_depth_align(v); },
        [](const PipelineConfig& c) { return std::string(to_string(c.depth_align)); }}},
      {"rpe_delta", LF_INT(c.rpe_delta)},
      {"icp_max_iters", LF_INT(c.icp.max_iters)},
      {"icp_tol", LF_DOUBLE(c.icp.tol)},
      {"input_mode",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) {
          if (v == "files") c.input_mode = InputMode::Files;
          else if (v == "synthetic") c.input_mode = InputMode::Synthetic;
          else throw std::invalid_argument(k + ": expected files|synthetic");
        },
        [](const PipelineConfig& c) {
          return std::string(c.input_mode == InputMode::Files ? "files" : "synthetic");
        }}},
      {"input_dir", LF_STRING(c.input_dir)},
      {"output_dir", LF_STRING(c.output_dir)},
      {"export_pointcloud",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) {
          if (v == "none") c.export_pointcloud = PointCloudFormat::None;
          else if (v == "ply-ascii") c.export_pointcloud = PointCloudFormat::PlyAscii;
          else if (v == "ply-binary") c.export_pointcloud = PointCloudFormat::PlyBinary;
          else throw std::invalid_argument(k + ": expected none|ply-ascii|ply-binary");
        },
        [](const PipelineConfig& c) {
          switch (c.export_pointcloud) {
            case PointCloudFormat::None: return std::string("none");
            case PointCloudFormat::PlyAscii: return std::string("ply-ascii");
            case PointCloudFormat::PlyBinary: return std::string("ply-binary");
          }
          return std::string("none");
        }}},
      {"export_trajectory", LF_BOOL(c.export_trajectory)},
      {"export_depth", LF_BOOL(c.export_depth)},
      {"export_voxel", LF_DOUBLE(c.export_voxel)},
      {"store_points", LF_BOOL(c.store_points)},
      {"frames", LF_INT(c.scene.frames)},
      {"height", LF_INT(c.scene.height)},
      {"width", LF_INT(c.scene.width)},
      {"layers", LF_INT(c.scene.layers)},
      {"camera_path",
       {[](PipelineConfig& c, const std::string&, const std::string& v) { c.scene.camera_path = parse_camera_path(v); },
        [](const PipelineConfig& c) { return std::string(to_string(c.scene.camera_path)); }}},
      {"noise_sigma", LF_DOUBLE(c.scene.noise_sigma)},
      {"window_scale_range", LF_RANGE(c.scene.window_scale_range)},
      {"window_rot_deg_range", LF_RANGE(c.scene.window_rot_deg_range)},
      {"window_trans_range", LF_RANGE(c.scene.window_trans_range)},
      {"layer_scale_range", LF_RANGE(c.scene.layer_scale_range)},
      {"seed",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) {
          const long long s = to_integer(k, v);
          if (s < 0) throw std::invalid_argument(k + ": must be >= 0");
          c.scene.seed = static_cast<std::uint64_t>(s);
        },
        [](const PipelineConfig& c) { return std::to_string(c.scene.seed); }}},
  };
  return table;
}

#undef LF_INT
#undef LF_DOUBLE
#undef LF_BOOL
#undef LF_RANGE
#undef LF_STRING

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  if (window_len < 2) throw std::invalid_argument("window_len must be >= 2");
  if (overlap < 1 || overlap >= window_len) throw std::invalid_argument("overlap must be in [1, window_len)");
  registration.irls.validate();
  lsa.validate();
  if (rpe_delta < 1) throw std::invalid_argument("rpe_delta must be >= 1");
  if (icp.max_iters < 1 || !(icp.tol >= 0.0)) throw std::invalid_argument("icp_max_iters/icp_tol invalid");
  if (!(export_voxel >= 0.0)) throw std::invalid_argument("export_voxel must be >= 0");
  if (input_mode == InputMode::Files && input_dir.empty()) {
    throw std::invalid_argument("input_dir is required when input_mode = files");
  }
  scene.validate();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.first);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, key, value);
}

std::string get_config_value(const PipelineConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(base, key, trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_to_text(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace layerfuse
