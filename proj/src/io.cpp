#include "layerfuse/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "layerfuse/errors.hpp"

namespace layerfuse {

static_assert(std::endian::native == std::endian::little, "binary PLY writer assumes a little-endian host");

void write_ply(const std::vector<Point3f>& points, const std::filesystem::path& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\nend_header\n";
  if (format == PlyFormat::Ascii) {
    char buf[96];
    for (const auto& p : points) {
      // %.9g round-trips float32 exactly
      const int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
      out.write(buf, n);
    }
  } else {
    for (const auto& p : points) out.write(reinterpret_cast<const char*>(p.data()), 3 * sizeof(float));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

std::size_t property_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "float" || type == "int32" || type == "uint32" ||
      type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

}  // namespace

std::vector<Point3f> read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw DataError(path.string() + ": not a PLY file");

  bool binary = false;
  std::size_t count = 0;
  bool in_vertex = false, seen_vertex = false;
  struct Prop {
    std::string name, type;
  };
  std::vector<Prop> props;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw DataError(path.string() + ": unsupported PLY format " + fmt);
    } else if (word == "element") {
      std::string name;
      ls >> name;
      if (seen_vertex && name != "vertex") break;  // later elements are ignored
      in_vertex = name == "vertex";
      if (in_vertex) {
        ls >> count;
        seen_vertex = true;
      }
    } else if (word == "property" && in_vertex) {
      Prop p;
      ls >> p.type;
      if (p.type == "list") throw DataError(path.string() + ": list properties on vertices are unsupported");
      ls >> p.name;
      props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  // skip to the end of the header if we stopped early
  while (line != "end_header" && std::getline(in, line)) {
  }
  if (!seen_vertex) throw DataError(path.string() + ": no vertex element");

  int ix = -1, iy = -1, iz = -1;
  std::vector<std::size_t> offset(props.size());
  std::size_t stride = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    offset[i] = stride;
    const std::size_t sz = property_size(props[i].type);
    if (sz == 0) throw DataError(path.string() + ": unknown property type " + props[i].type);
    stride += sz;
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw DataError(path.string() + ": missing x/y/z");
  for (int i : {ix, iy, iz}) {
    if (props[i].type != "float" && props[i].type != "float32" && props[i].type != "double" &&
        props[i].type != "float64") {
      throw DataError(path.string() + ": coordinates must be float or double");
    }
  }

  std::vector<Point3f> pts(count);
  if (binary) {
    std::vector<char> rec(stride);
    auto get = [&](int i) -> float {
      if (property_size(props[i].type) == 8) {
        double d;
        std::memcpy(&d, rec.data() + offset[i], 8);
        return static_cast<float>(d);
      }
      float f;
      std::memcpy(&f, rec.data() + offset[i], 4);
      return f;
    };
    for (std::size_t k = 0; k < count; ++k) {
      if (!in.read(rec.data(), static_cast<std::streamsize>(stride))) {
        throw DataError(path.string() + ": truncated at vertex " + std::to_string(k));
      }
      pts[k] = {get(ix), get(iy), get(iz)};
    }
  } else {
    std::vector<double> vals(props.size());
    for (std::size_t k = 0; k < count; ++k) {
      if (!std::getline(in, line)) throw DataError(path.string() + ": truncated at vertex " + std::to_string(k));
      std::istringstream ls(line);
      for (auto& v : vals) {
        if (!(ls >> v)) throw DataError(path.string() + ": malformed vertex " + std::to_string(k));
      }
      pts[k] = {static_cast<float>(vals[ix]), static_cast<float>(vals[iy]), static_cast<float>(vals[iz])};
    }
  }
  return pts;
}

Eigen::Vector4d canonical_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Eigen::Vector4d v(q.x(), q.y(), q.z(), q.w());
  if (v(3) < 0.0 || (v(3) == 0.0 && v(2) < 0.0)) v = -v;
  return v;
}

namespace {

double no_negative_zero(double v) { return v == 0.0 ? 0.0 : v; }

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", no_negative_zero(v));
  return buf;
}

// Angle between unit q and the direction of v.
double printed_angle(const Eigen::Vector4d& q, const Eigen::Vector4d& v) {
  const double along = v.dot(q);
  return 2.0 * std::atan2((v - along * q).norm(), std::abs(along));
}

// Rounding to 9 significant digits with the decimal exponent of each component cached.
struct Rounder {
  double unit[4] = {0, 0, 0, 0};
  double lo[4] = {0, 0, 0, 0};
  explicit Rounder(const Eigen::Vector4d& q) {
    for (int i = 0; i < 4; ++i) {
      if (q(i) == 0.0) continue;
      const double e = std::floor(std::log10(std::abs(q(i))));
      unit[i] = std::pow(10.0, e - 8.0);
      lo[i] = std::pow(10.0, e);
    }
  }
  double operator()(int i, double v) const {
    if (v == 0.0) return 0.0;
    double u = unit[i];
    if (std::abs(v) < lo[i] || std::abs(v) >= 10.0 * lo[i]) u = std::pow(10.0, std::floor(std::log10(std::abs(v))) - 8.0);
    return std::round(v / u) * u;
  }
};

// Rounding each component on its own leaves up to ~1.7e-9 rad once the reader
// renormalizes. Readers ignore the norm, so scan a common factor lambda near 1 and
// print the rounding of lambda * q closest to q in angle.
std::array<std::string, 4> quaternion_digits(const Eigen::Vector4d& q) {
  constexpr int kSteps = 2000;
  constexpr double kStep = 2.5e-10;
  const Rounder round9(q);
  auto rounded = [&](double lambda) {
    return Eigen::Vector4d(round9(0, lambda * q(0)), round9(1, lambda * q(1)), round9(2, lambda * q(2)),
                           round9(3, lambda * q(3)));
  };
  Eigen::Vector4d best = rounded(1.0);
  double best_err = printed_angle(q, best);
  for (int j = 1; j <= kSteps && best_err > 1e-10; ++j) {
    for (int sign : {-1, 1}) {
      const Eigen::Vector4d v = rounded(1.0 + sign * j * kStep);
      const double e = printed_angle(q, v);
      if (e < best_err) {
        best_err = e;
        best = v;
      }
    }
  }
  return {g9(best(0)), g9(best(1)), g9(best(2)), g9(best(3))};
}

}  // namespace

std::string format_tum_line(const TimedPose& p) {
  const Eigen::Vector4d q = canonical_quaternion(p.pose.rotation);
  const Vec3& t = p.pose.translation;
  const auto qs = quaternion_digits(q);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", no_negative_zero(p.timestamp));
  return std::string(buf) + " " + g9(t.x()) + " " + g9(t.y()) + " " + g9(t.z()) + " " + qs[0] + " " + qs[1] +
         " " + qs[2] + " " + qs[3];
}

void write_tum(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : traj) out << format_tum_line(p) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 8 numbers");
    }
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.0)) throw DataError(path.string() + ":" + std::to_string(lineno) + ": zero quaternion");
    q.normalize();
    TimedPose p;
    p.timestamp = v[0];
    p.pose.rotation = q.toRotationMatrix();
    p.pose.translation = Vec3(v[1], v[2], v[3]);
    traj.push_back(p);
  }
  return traj;
}

std::vector<Point3f> voxel_downsample(const std::vector<Point3f>& points, double voxel) {
  if (!(voxel > 0.0)) return points;
  std::map<std::tuple<long long, long long, long long>, std::pair<Eigen::Vector3d, std::size_t>> cells;
  for (const auto& p : points) {
    const auto key = std::make_tuple(static_cast<long long>(std::floor(p.x() / voxel)),
                                     static_cast<long long>(std::floor(p.y() / voxel)),
                                     static_cast<long long>(std::floor(p.z() / voxel)));
    auto& cell = cells.try_emplace(key, Eigen::Vector3d::Zero(), 0).first->second;
    cell.first += p.cast<double>();
    ++cell.second;
  }
  std::vector<Point3f> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) out.push_back((cell.first / static_cast<double>(cell.second)).cast<float>());
  return out;
}

}  // namespace layerfuse
