#include "msifuse/fuse.hpp"

#include <cmath>

namespace msi {
namespace {

ImageBuffer broadcast_to(const ImageBuffer& img, int channels) {
  if (img.channels() == channels) return img;
  if (channels == 1) return to_grayscale(img);
  ImageBuffer out(img.width(), img.height(), 3, img.depth());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.set(x, y, c, img.at(x, y));
  return out;
}

}  // namespace

double mean_intensity(const ImageBuffer& image) {
  if (image.channels() != 1)
    throw FuseError("mean_intensity expects a single-channel image");
  double sum = 0.0;
  for (uint16_t v : image.data()) sum += v;
  return sum / static_cast<double>(image.data().size());
}

double offset_gamma(double mean_w, double mean_2) {
  return 0.5 * (mean_w + mean_2);
}

FusionParams optimize_weights(const ImageBuffer& I_w, const ImageBuffer& I_2,
                              const ImageBuffer& target,
                              const ValidityMask& mask) {
  if (!I_w.same_shape(I_2) || !I_w.same_shape(target) ||
      I_w.width() != mask.width() || I_w.height() != mask.height())
    throw FuseError("optimize_weights inputs must share dimensions");
  if (I_w.channels() != 1)
    throw FuseError("optimize_weights expects single-channel working copies");
  if (!mask.any()) throw FuseError("optimize_weights mask is empty");

  double num = 0.0, den = 0.0;
  for (int y = 0; y < I_w.height(); ++y) {
    for (int x = 0; x < I_w.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const double d = static_cast<double>(I_w.at(x, y)) - I_2.at(x, y);
      num += d * (static_cast<double>(target.at(x, y)) - I_2.at(x, y));
      den += d * d;
    }
  }
  FusionParams params;
  params.alpha = den < 1e-9 ? 0.5 : std::clamp(num / den, 0.0, 1.0);
  params.beta = 1.0 - params.alpha;
  return params;
}

CompositeImage overlay(const ImageBuffer& I_w, const ImageBuffer& I_2,
                       const FusionParams& params, const ValidityMask& mask) {
  params.validate();
  if (I_w.width() != I_2.width() || I_w.height() != I_2.height() ||
      I_w.width() != mask.width() || I_w.height() != mask.height())
    throw FuseError("overlay inputs must share dimensions");

  const int channels = std::max(I_w.channels(), I_2.channels());
  const ImageBuffer A = broadcast_to(I_w, channels);
  const ImageBuffer B = broadcast_to(I_2, channels);

  double gamma = 0.0;
  switch (params.gamma_mode) {
    case GammaMode::Literal:
      gamma = params.gamma;
      break;
    case GammaMode::Zero:
      gamma = 0.0;
      break;
    case GammaMode::Recenter: {
      const double mw = mean_intensity(to_grayscale(I_w));
      const double m2 = mean_intensity(to_grayscale(I_2));
      gamma = params.gamma - (params.alpha * mw + params.beta * m2);
      break;
    }
  }

  CompositeImage out{ImageBuffer(I_2.width(), I_2.height(), channels, 8),
                     params, mask};
  for (int y = 0; y < I_2.height(); ++y) {
    for (int x = 0; x < I_2.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v =
            mask.at(x, y)
                ? params.alpha * A.at(x, y, c) + params.beta * B.at(x, y, c) +
                      gamma
                : static_cast<double>(B.at(x, y, c));
        out.image.set(x, y, c, static_cast<uint16_t>(round_clamp(v, 0, 255)));
      }
    }
  }
  return out;
}

}  // namespace msi
