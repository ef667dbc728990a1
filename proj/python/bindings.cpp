#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "layerfuse/cli.hpp"
#include "layerfuse/config.hpp"
#include "layerfuse/errors.hpp"
#include "layerfuse/io.hpp"
#include "layerfuse/irls.hpp"
#include "layerfuse/metrics.hpp"
#include "layerfuse/pipeline.hpp"
#include "layerfuse/registration.hpp"
#include "layerfuse/segmentation.hpp"
#include "layerfuse/windowing.hpp"

namespace py = pybind11;
using namespace layerfuse;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const DoubleArray& a, const char* name) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument(std::string(name) + " must have shape (N, 3)");
  const auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

// Rows of (timestamp, tx, ty, tz, qx, qy, qz, qw).
Trajectory to_trajectory(const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 8) throw std::invalid_argument("trajectory must have shape (N, 8)");
  const auto r = a.unchecked<2>();
  Trajectory out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    Eigen::Quaterniond q(r(i, 7), r(i, 4), r(i, 5), r(i, 6));
    if (!(q.norm() > 0.0)) throw std::invalid_argument("zero quaternion in trajectory row " + std::to_string(i));
    q.normalize();
    TimedPose p;
    p.timestamp = r(i, 0);
    p.pose.rotation = q.toRotationMatrix();
    p.pose.translation = Vec3(r(i, 1), r(i, 2), r(i, 3));
    out.push_back(p);
  }
  return out;
}

py::array_t<double> from_trajectory(const Trajectory& traj) {
  py::array_t<double> out({static_cast<py::ssize_t>(traj.size()), py::ssize_t{8}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Eigen::Vector4d q = canonical_quaternion(traj[i].pose.rotation);
    const Vec3& t = traj[i].pose.translation;
    const double row[8] = {traj[i].timestamp, t.x(), t.y(), t.z(), q(0), q(1), q(2), q(3)};
    for (int j = 0; j < 8; ++j) w(i, j) = row[j];
  }
  return out;
}

py::array_t<float> from_points(const std::vector<Point3f>& pts) {
  py::array_t<float> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = pts[i](j);
  return out;
}

std::string value_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  if (py::isinstance<py::tuple>(v) || py::isinstance<py::list>(v)) {
    const auto seq = v.cast<py::sequence>();
    if (py::len(seq) != 2) throw std::invalid_argument("range values need two elements");
    return py::str(seq[0]).cast<std::string>() + "," + py::str(seq[1]).cast<std::string>();
  }
  return py::str(v).cast<std::string>();
}

py::dict sim3_dict(const Sim3Transform& s) {
  py::dict d;
  d["scale"] = s.scale;
  d["rotation"] = Mat3(s.rotation);
  d["translation"] = Vec3(s.translation);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "layerfuse core bindings";

  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
  static py::exception<ContainerError> container_error(m, "ContainerError", data_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ContainerError& e) {
      py::set_error(container_error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    }
  });

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init([](const py::object& values) {
             PipelineConfig c;
             if (!values.is_none()) {
               for (const auto& [k, v] : values.cast<py::dict>()) set_config_value(c, py::str(k), value_text(v));
             }
             return c;
           }),
           py::arg("values") = py::none())
      .def_static("from_text", [](const std::string& text) { return parse_config(text); })
      .def_static("load", [](const std::filesystem::path& p) { return load_config(p); })
      .def("get", [](const PipelineConfig& c, const std::string& k) { return get_config_value(c, k); })
      .def("set", [](PipelineConfig& c, const std::string& k, const py::object& v) {
        set_config_value(c, k, value_text(v));
      })
      .def("__getitem__", [](const PipelineConfig& c, const std::string& k) { return get_config_value(c, k); })
      .def("__setitem__", [](PipelineConfig& c, const std::string& k, const py::object& v) {
        set_config_value(c, k, value_text(v));
      })
      .def("keys", [](const PipelineConfig&) { return config_keys(); })
      .def("to_text", &config_to_text)
      .def("validate", &PipelineConfig::validate)
      .def("__repr__", [](const PipelineConfig& c) {
        return "Config(window_len=" + get_config_value(c, "window_len") + ", overlap=" +
               get_config_value(c, "overlap") + ", frames=" + get_config_value(c, "frames") + ")";
      });

  m.def("config_keys", &config_keys);

  py::class_<StreamResult>(m, "StreamResult")
      .def_property_readonly("trajectory", [](const StreamResult& r) { return from_trajectory(r.map.trajectory()); })
      .def_property_readonly("points", [](const StreamResult& r) { return from_points(r.map.points()); })
      .def_property_readonly("registrations",
                             [](const StreamResult& r) {
                               py::list out;
                               for (const auto& s : r.registrations) out.append(sim3_dict(s));
                               return out;
                             })
      .def_property_readonly("diagnostics",
                             [](const StreamResult& r) {
                               py::list out;
                               for (const auto& d : r.diagnostics) {
                                 py::dict x;
                                 x["window"] = d.window;
                                 x["scale"] = d.scale;
                                 x["rot_deg"] = d.rot_deg;
                                 x["trans"] = d.trans;
                                 x["layers"] = d.layers;
                                 x["inter_edges"] = d.inter_edges;
                                 x["intra_edges"] = d.intra_edges;
                                 x["correspondences"] = d.correspondences;
                                 x["fallback"] = d.fallback;
                                 x["ms_register"] = d.ms_register;
                                 x["ms_segment"] = d.ms_segment;
                                 x["ms_graph"] = d.ms_graph;
                                 x["ms_propagate"] = d.ms_propagate;
                                 out.append(x);
                               }
                               return out;
                             })
      .def_property_readonly("stats", [](const StreamResult& r) {
        py::dict s;
        s["windows"] = r.stats.windows;
        s["frames"] = r.stats.frames;
        s["peak_retained_windows"] = r.stats.peak_retained_windows;
        s["peak_retained_frames"] = r.stats.peak_retained_frames;
        s["peak_queued"] = r.stats.peak_queued;
        s["fallbacks"] = r.stats.fallbacks;
        s["ms_window"] = r.stats.ms_window;
        s["ms_total"] = r.stats.ms_total;
        return s;
      });

  m.def(
      "run_stream",
      [](const PipelineConfig& cfg) {
        py::gil_scoped_release release;
        return run_stream(cfg);
      },
      py::arg("config"), "Stream the configured source and return the fused map in memory.");
  m.def(
      "run_pipeline",
      [](const PipelineConfig& cfg) {
        py::gil_scoped_release release;
        return run_pipeline(cfg);
      },
      py::arg("config"), "Stream and write trajectory, point cloud and diagnostics to output_dir.");

  m.def(
      "schedule_windows",
      [](int total, int len, int overlap) {
        std::vector<std::tuple<int, int, int>> out;
        for (const auto& w : schedule_windows(total, len, overlap)) out.emplace_back(w.index, w.start, w.length);
        return out;
      },
      py::arg("total_frames"), py::arg("window_len"), py::arg("overlap"),
      "(index, start, length) of every window, 1-based.");

  m.def(
      "umeyama",
      [](const DoubleArray& src, const DoubleArray& dst, bool with_scale) {
        const Sim3Transform s = umeyama(to_points(src, "src"), to_points(dst, "dst"), with_scale);
        return py::make_tuple(s.scale, Mat3(s.rotation), Vec3(s.translation));
      },
      py::arg("src"), py::arg("dst"), py::arg("with_scale") = true, "(s, R, t) with dst = s R src + t.");
  m.def(
      "kabsch",
      [](const DoubleArray& x, const DoubleArray& y) {
        const RigidPose p = kabsch(to_points(x, "x"), to_points(y, "y"));
        return py::make_tuple(Mat3(p.rotation), Vec3(p.translation));
      },
      py::arg("x"), py::arg("y"), "(R, t) with y = R x + t.");
  m.def(
      "irls_scale",
      [](const DoubleArray& source, const DoubleArray& target, double delta_factor, int max_iters) {
        IrlsConfig c;
        c.delta_factor = delta_factor;
        c.max_iters = max_iters;
        return irls_scale(to_points(source, "source"), to_points(target, "target"), c).scale;
      },
      py::arg("source"), py::arg("target"), py::arg("delta_factor") = IrlsConfig{}.delta_factor,
      py::arg("max_iters") = IrlsConfig{}.max_iters, "Huber-robust s with target = s source.");
  m.def(
      "closed_form_scale",
      [](const DoubleArray& source, const DoubleArray& target) {
        return closed_form_scale(to_points(source, "source"), to_points(target, "target"));
      },
      py::arg("source"), py::arg("target"));

  m.def(
      "ate", [](const DoubleArray& est, const DoubleArray& gt) { return ate(to_trajectory(est), to_trajectory(gt)); },
      py::arg("est"), py::arg("gt"), "Sim(3)-aligned RMSE of camera centers; rows (t, tx, ty, tz, qx, qy, qz, qw).");

  m.def(
      "segment_depth",
      [](const DoubleArray& depth, const py::object& valid, double sigma, double k, double min_size_frac) {
        if (depth.ndim() != 2) throw std::invalid_argument("depth must be 2-D");
        const int h = static_cast<int>(depth.shape(0)), w = static_cast<int>(depth.shape(1));
        DepthGrid g(h, w);
        std::copy(depth.data(), depth.data() + g.size(), g.values.begin());
        if (valid.is_none()) {
          std::fill(g.valid.begin(), g.valid.end(), 1);
        } else {
          const auto mask = valid.cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>();
          if (mask.ndim() != 2 || mask.shape(0) != h || mask.shape(1) != w)
            throw std::invalid_argument("valid must match the depth shape");
          for (std::size_t i = 0; i < g.size(); ++i) g.valid[i] = mask.data()[i] ? 1 : 0;
        }
        SegmentationParams p;
        p.sigma = sigma;
        p.k = k;
        p.min_size_frac = min_size_frac;
        const LayerLabelMap m = segment_depth(g, p);
        py::array_t<int> out({depth.shape(0), depth.shape(1)});
        std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
        return out;
      },
      py::arg("depth"), py::arg("valid") = py::none(), py::arg("sigma") = SegmentationParams{}.sigma,
      py::arg("k") = SegmentationParams{}.k, py::arg("min_size_frac") = SegmentationParams{}.min_size_frac,
      "Layer id per pixel, -1 where invalid.");

  m.def("read_tum", [](const std::filesystem::path& p) { return from_trajectory(read_tum(p)); }, py::arg("path"));
  m.def("read_ply", [](const std::filesystem::path& p) { return from_points(read_ply(p)); }, py::arg("path"));
  m.def(
      "write_ply",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pts, const std::filesystem::path& p,
         bool binary) {
        if (pts.ndim() != 2 || pts.shape(1) != 3) throw std::invalid_argument("points must have shape (N, 3)");
        std::vector<Point3f> v(static_cast<std::size_t>(pts.shape(0)));
        const auto r = pts.unchecked<2>();
        for (py::ssize_t i = 0; i < pts.shape(0); ++i) v[i] = Point3f(r(i, 0), r(i, 1), r(i, 2));
        write_ply(v, p, binary ? PlyFormat::BinaryLittleEndian : PlyFormat::Ascii);
      },
      py::arg("points"), py::arg("path"), py::arg("binary") = true);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}
