#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "msifuse/image_io.hpp"
#include "msifuse/pipeline.hpp"

namespace py = pybind11;
using namespace msi;

namespace {

// numpy <-> ImageBuffer: (h, w) or (h, w, 3), dtype uint8 or uint16
ImageBuffer buffer_from_array(const py::array& arr) {
  const int depth = [&] {
    if (py::isinstance<py::array_t<uint8_t>>(arr)) return 8;
    if (py::isinstance<py::array_t<uint16_t>>(arr)) return 16;
    throw py::type_error("image array must be uint8 or uint16");
  }();
  if (arr.ndim() != 2 && !(arr.ndim() == 3 && arr.shape(2) == 3))
    throw py::value_error("image array must be (h, w) or (h, w, 3)");
  const int h = static_cast<int>(arr.shape(0));
  const int w = static_cast<int>(arr.shape(1));
  const int channels = arr.ndim() == 2 ? 1 : 3;
  std::vector<uint16_t> data(static_cast<size_t>(w) * h * channels);
  if (depth == 8) {
    auto a = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>::ensure(arr);
    std::copy(a.data(), a.data() + data.size(), data.begin());
  } else {
    auto a = py::array_t<uint16_t, py::array::c_style | py::array::forcecast>::ensure(arr);
    std::copy(a.data(), a.data() + data.size(), data.begin());
  }
  return ImageBuffer(w, h, channels, depth, std::move(data));
}

py::array array_from_buffer(const ImageBuffer& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() == 3) shape.push_back(3);
  if (img.depth() == 8) {
    py::array_t<uint8_t> out(shape);
    auto* dst = out.mutable_data();
    for (size_t i = 0; i < img.data().size(); ++i)
      dst[i] = static_cast<uint8_t>(img.data()[i]);
    return out;
  }
  py::array_t<uint16_t> out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::array mask_to_array(const ValidityMask& mask) {
  py::array_t<bool> out({mask.height(), mask.width()});
  auto* dst = out.mutable_data();
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      dst[static_cast<size_t>(y) * mask.width() + x] = mask.at(x, y);
  return out;
}

ValidityMask mask_from_array(const py::array& arr) {
  auto a = py::array_t<bool, py::array::c_style | py::array::forcecast>::ensure(arr);
  if (a.ndim() != 2) throw py::value_error("mask must be 2-D");
  ValidityMask mask(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      mask.set(x, y, a.data()[static_cast<size_t>(y) * mask.width() + x]);
  return mask;
}

Homography h_from_array(const py::array_t<double>& arr) {
  auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
  if (a.ndim() != 2 || a.shape(0) != 3 || a.shape(1) != 3)
    throw py::value_error("homography must be 3x3");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a.data()[3 * r + c];
  return Homography::from_matrix(m);
}

py::array h_to_array(const Homography& H) {
  py::array_t<double> out({3, 3});
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.mutable_data()[3 * r + c] = H.h(r, c);
  return out;
}

std::vector<Correspondence> correspondences_from(
    const py::array_t<double>& p, const py::array_t<double>& q) {
  if (p.ndim() != 2 || q.ndim() != 2 || p.shape(1) != 2 || q.shape(1) != 2 ||
      p.shape(0) != q.shape(0))
    throw py::value_error("point arrays must both be (n, 2)");
  std::vector<Correspondence> cs(p.shape(0));
  auto pa = p.unchecked<2>();
  auto qa = q.unchecked<2>();
  for (py::ssize_t i = 0; i < p.shape(0); ++i)
    cs[i] = {{pa(i, 0), pa(i, 1)}, {qa(i, 0), qa(i, 1)}};
  return cs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Thermal/RGB image registration and fusion core";

  m.def("load_image",
        [](const std::filesystem::path& p) { return array_from_buffer(load_image(p)); });
  m.def("save_image", [](const py::array& img, const std::filesystem::path& p) {
    save_image(buffer_from_array(img), p);
  });
  m.def("to_grayscale",
        [](const py::array& img) { return array_from_buffer(to_grayscale(buffer_from_array(img))); });
  m.def("normalize_16_to_8", [](const py::array& img) {
    return array_from_buffer(normalize_16_to_8(buffer_from_array(img)));
  });
  m.def("gradient_magnitude", [](const py::array& img) {
    return array_from_buffer(gradient_magnitude(buffer_from_array(img)));
  });

  m.def(
      "detect",
      [](const py::array& img, double tau, bool nms) {
        const auto kps = detect(buffer_from_array(img), tau, nms);
        py::array_t<double> out({static_cast<py::ssize_t>(kps.size()),
                                 py::ssize_t{3}});
        for (size_t i = 0; i < kps.size(); ++i) {
          out.mutable_data()[3 * i] = kps[i].p.x;
          out.mutable_data()[3 * i + 1] = kps[i].p.y;
          out.mutable_data()[3 * i + 2] = kps[i].score;
        }
        return out;
      },
      py::arg("image"), py::arg("tau") = 20.0, py::arg("nms") = true,
      "Keypoints as an (n, 3) array of (x, y, score)");
  m.def(
      "orientation",
      [](const py::array& img, double x, double y) {
        return orientation(buffer_from_array(img), {x, y});
      },
      py::arg("image"), py::arg("x"), py::arg("y"));

  m.def(
      "detect_and_describe",
      [](const py::array& img, double tau, int bits, uint32_t seed) {
        const ImageBuffer buf = buffer_from_array(img);
        auto kps = detect(buf, tau);
        const auto pattern = make_pattern(bits, seed);
        py::array_t<double> pts({static_cast<py::ssize_t>(kps.size()),
                                 py::ssize_t{3}});
        py::array_t<uint64_t> desc(
            {static_cast<py::ssize_t>(kps.size()),
             static_cast<py::ssize_t>((bits + 63) / 64)});
        for (size_t i = 0; i < kps.size(); ++i) {
          kps[i].theta = orientation(buf, kps[i].p);
          const Descriptor d = describe(buf, kps[i], pattern);
          pts.mutable_data()[3 * i] = kps[i].p.x;
          pts.mutable_data()[3 * i + 1] = kps[i].p.y;
          pts.mutable_data()[3 * i + 2] = kps[i].theta;
          for (size_t w = 0; w < d.words().size(); ++w)
            desc.mutable_data()[i * d.words().size() + w] = d.words()[w];
        }
        return py::make_tuple(pts, desc);
      },
      py::arg("image"), py::arg("tau") = 20.0, py::arg("bits") = 256,
      py::arg("seed") = 42,
      "(keypoints (n,3) of (x, y, theta), packed descriptors (n, bits/64))");

  m.def(
      "apply_h",
      [](const py::array_t<double>& H, double x, double y) {
        const PixelPoint p = apply_h(h_from_array(H), {x, y});
        return py::make_tuple(p.x, p.y);
      },
      py::arg("H"), py::arg("x"), py::arg("y"));
  m.def("estimate_dlt",
        [](const py::array_t<double>& p, const py::array_t<double>& q) {
          return h_to_array(estimate_dlt(correspondences_from(p, q)));
        });
  m.def(
      "estimate_robust",
      [](const py::array_t<double>& p, const py::array_t<double>& q,
         double threshold, int iterations, uint32_t seed) {
        RansacConfig config;
        config.inlier_threshold = threshold;
        config.max_iterations = iterations;
        config.seed = seed;
        const auto report = estimate_robust(correspondences_from(p, q), config);
        py::dict out;
        out["H"] = h_to_array(report.H);
        out["inliers"] = report.inlier_flags;
        out["inlier_count"] = report.inlier_count;
        out["total_error"] = report.total_error;
        return out;
      },
      py::arg("p"), py::arg("q"), py::arg("threshold") = 3.0,
      py::arg("iterations") = 2000, py::arg("seed") = 1);
  m.def(
      "warp",
      [](const py::array& img, const py::array_t<double>& H, int width,
         int height) {
        auto [out, mask] = warp(buffer_from_array(img), h_from_array(H), width,
                                height);
        return py::make_tuple(array_from_buffer(out), mask_to_array(mask));
      },
      py::arg("image"), py::arg("H"), py::arg("width"), py::arg("height"));

  m.def("mean_intensity",
        [](const py::array& img) { return mean_intensity(buffer_from_array(img)); });
  m.def("offset_gamma", &offset_gamma, py::arg("mean_w"), py::arg("mean_2"));
  m.def(
      "optimize_weights",
      [](const py::array& iw, const py::array& i2, const py::array& target,
         const py::array& mask) {
        const auto params =
            optimize_weights(buffer_from_array(iw), buffer_from_array(i2),
                             buffer_from_array(target), mask_from_array(mask));
        return py::make_tuple(params.alpha, params.beta);
      },
      py::arg("I_w"), py::arg("I_2"), py::arg("target"), py::arg("mask"));
  m.def(
      "overlay",
      [](const py::array& iw, const py::array& i2, double alpha, double gamma,
         const std::string& gamma_mode, const py::array& mask) {
        FusionParams params;
        params.alpha = alpha;
        params.beta = 1.0 - alpha;
        params.gamma = gamma;
        params.gamma_mode = gamma_mode == "literal"
                                ? GammaMode::Literal
                                : gamma_mode == "zero" ? GammaMode::Zero
                                                       : GammaMode::Recenter;
        return array_from_buffer(overlay(buffer_from_array(iw),
                                         buffer_from_array(i2), params,
                                         mask_from_array(mask))
                                     .image);
      },
      py::arg("I_w"), py::arg("I_2"), py::arg("alpha") = 0.5,
      py::arg("gamma") = 0.0, py::arg("gamma_mode") = "zero", py::arg("mask"));

  m.def(
      "run_pair",
      [](const py::array& thermal, const py::array& rgb, bool edge_domain,
         uint32_t seed) {
        PipelineConfig config;
        config.edge_domain = edge_domain;
        config.ransac.seed = seed;
        auto [composite, report] =
            run_pair(buffer_from_array(thermal), buffer_from_array(rgb), config);
        py::dict out;
        out["composite"] = array_from_buffer(composite.image);
        out["H"] = h_to_array(report.H);
        out["keypoints_ir"] = report.keypoints_ir;
        out["keypoints_rgb"] = report.keypoints_rgb;
        out["match_count"] = report.match_count;
        out["inlier_count"] = report.inlier_count;
        out["registration_error"] = report.registration_error;
        out["failure_stage"] = report.failure_stage;
        out["alpha"] = report.alpha;
        out["beta"] = report.beta;
        out["gamma"] = report.gamma;
        return out;
      },
      py::arg("thermal"), py::arg("rgb"), py::arg("edge_domain") = true,
      py::arg("seed") = 1);

  m.def(
      "make_synthetic",
      [](int width, int height, const std::string& pattern, double rotation_deg,
         double tx, double ty, double noise_sigma, bool invert, uint32_t seed) {
        SynthSpec spec;
        spec.width = width;
        spec.height = height;
        spec.pattern = synth_pattern_from_string(pattern);
        spec.ground_truth = rotation_translation_h(rotation_deg, tx, ty,
                                                   width / 2.0, height / 2.0);
        spec.noise_sigma = noise_sigma;
        spec.invert_thermal = invert;
        spec.seed = seed;
        const SynthResult r = make_synthetic(spec);
        return py::make_tuple(array_from_buffer(r.rgb),
                              array_from_buffer(r.thermal),
                              h_to_array(r.ground_truth));
      },
      py::arg("width") = 640, py::arg("height") = 480,
      py::arg("pattern") = "blobs", py::arg("rotation_deg") = 0.0,
      py::arg("tx") = 0.0, py::arg("ty") = 0.0, py::arg("noise_sigma") = 0.0,
      py::arg("invert") = false, py::arg("seed") = 1);

  m.def(
      "calibrate",
      [](const py::array_t<double>& X, const py::array_t<double>& uv, double f,
         double cu, double cv, const py::array_t<double>& axis_angle,
         const py::array_t<double>& t, int max_iterations) {
        if (X.ndim() != 2 || X.shape(1) != 3 || uv.ndim() != 2 ||
            uv.shape(1) != 2 || X.shape(0) != uv.shape(0))
          throw py::value_error("X must be (n, 3) and uv (n, 2)");
        std::vector<Observation> obs(X.shape(0));
        auto xa = X.unchecked<2>();
        auto ua = uv.unchecked<2>();
        for (py::ssize_t i = 0; i < X.shape(0); ++i)
          obs[i] = {{xa(i, 0), xa(i, 1), xa(i, 2)}, {ua(i, 0), ua(i, 1)}};
        CameraParams initial;
        initial.f = f;
        initial.cu = cu;
        initial.cv = cv;
        initial.R = axis_angle_to_rotation(
            {axis_angle.at(0), axis_angle.at(1), axis_angle.at(2)});
        initial.t = {t.at(0), t.at(1), t.at(2)};
        SolverConfig config;
        config.max_iterations = max_iterations;
        const auto [params, report] = calibrate(initial, obs, config);
        py::dict out;
        out["f"] = params.f;
        out["c_u"] = params.cu;
        out["c_v"] = params.cv;
        const Eigen::Vector3d aa = rotation_to_axis_angle(params.R);
        out["axis_angle"] = py::make_tuple(aa.x(), aa.y(), aa.z());
        out["t"] = py::make_tuple(params.t.x(), params.t.y(), params.t.z());
        out["initial_E"] = report.initial_error;
        out["final_E"] = report.final_error;
        out["iterations"] = report.iterations;
        out["termination"] = report.termination;
        return out;
      },
      py::arg("X"), py::arg("uv"), py::arg("f"), py::arg("cu"), py::arg("cv"),
      py::arg("axis_angle"), py::arg("t"), py::arg("max_iterations") = 100);
}
