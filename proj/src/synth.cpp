#include "msifuse/synth.hpp"

#include <cmath>
#include <random>

namespace msi {
namespace {

ImageBuffer render_pattern(const SynthSpec& spec) {
  ImageBuffer img(spec.width, spec.height, 3, 8);
  std::mt19937 rng(spec.seed);
  switch (spec.pattern) {
    case SynthPattern::Checker: {
      constexpr int cell = 32;
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const uint16_t v = ((x / cell) + (y / cell)) % 2 ? 220 : 35;
          for (int c = 0; c < 3; ++c) img.set(x, y, c, v);
        }
      break;
    }
    case SynthPattern::Blobs: {
      // seeded Gaussian blobs over a mid-gray background
      std::vector<double> field(static_cast<size_t>(spec.width) * spec.height,
                                128.0);
      const int n_blobs = 160;
      for (int b = 0; b < n_blobs; ++b) {
        const double bx = (rng() % (spec.width * 16)) / 16.0;
        const double by = (rng() % (spec.height * 16)) / 16.0;
        const double sigma = 3.0 + (rng() % 80) / 10.0;
        const double amp = (rng() % 2 ? 1.0 : -1.0) * (60.0 + rng() % 68);
        const int r = static_cast<int>(3 * sigma) + 1;
        for (int y = std::max(0, static_cast<int>(by) - r);
             y <= std::min(spec.height - 1, static_cast<int>(by) + r); ++y)
          for (int x = std::max(0, static_cast<int>(bx) - r);
               x <= std::min(spec.width - 1, static_cast<int>(bx) + r); ++x) {
            const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
            field[static_cast<size_t>(y) * spec.width + x] +=
                amp * std::exp(-d2 / (2 * sigma * sigma));
          }
      }
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const uint16_t v = static_cast<uint16_t>(round_clamp(
              field[static_cast<size_t>(y) * spec.width + x], 0, 255));
          for (int c = 0; c < 3; ++c) img.set(x, y, c, v);
        }
      break;
    }
    case SynthPattern::Gradient: {
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const double v = 255.0 * (x + y) / (spec.width + spec.height - 2);
          for (int c = 0; c < 3; ++c)
            img.set(x, y, c, static_cast<uint16_t>(round_clamp(v, 0, 255)));
        }
      break;
    }
  }
  return img;
}

}  // namespace

SynthResult make_synthetic(const SynthSpec& spec) {
  SynthResult out;
  out.ground_truth = spec.ground_truth;
  out.rgb = render_pattern(spec);

  const ImageBuffer gray = to_grayscale(out.rgb);
  // thermal(p) samples the scene at H(p): warping thermal by H recovers rgb
  auto [thermal, mask] =
      warp(gray, spec.ground_truth.inverse(), spec.width, spec.height);

  std::mt19937 rng(spec.seed ^ 0x9e3779b9u);
  auto uniform = [&rng]() {
    return (rng() + 1.0) / (static_cast<double>(std::mt19937::max()) + 2.0);
  };
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v = thermal.at(x, y);
      if (!mask.at(x, y)) v = 128.0;  // fill uncovered area with mid-gray
      if (spec.invert_thermal) v = 255.0 - v;
      if (spec.noise_sigma > 0) {
        const double u1 = uniform(), u2 = uniform();
        v += spec.noise_sigma * std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * M_PI * u2);
      }
      thermal.set(x, y, 0, static_cast<uint16_t>(round_clamp(v, 0, 255)));
    }
  }
  out.thermal = std::move(thermal);
  return out;
}

Homography rotation_translation_h(double degrees, double tx, double ty,
                                  double cx, double cy) {
  const double a = degrees * M_PI / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, cx - c * cx + s * cy + tx,
       s, c, cy - s * cx - c * cy + ty,
       0, 0, 1;
  return Homography::from_matrix(m);
}

SynthPattern synth_pattern_from_string(const std::string& s) {
  if (s == "checker") return SynthPattern::Checker;
  if (s == "blobs") return SynthPattern::Blobs;
  if (s == "gradient") return SynthPattern::Gradient;
  throw std::runtime_error("unknown synth pattern: " + s);
}

}  // namespace msi
