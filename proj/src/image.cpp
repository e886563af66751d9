#include "msifuse/image.hpp"

#include <algorithm>
#include <cmath>

namespace msi {

size_t ValidityMask::count() const {
  return static_cast<size_t>(std::count(bits_.begin(), bits_.end(), true));
}

int round_clamp(double v, int lo, int hi) {
  const double r = v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
  return static_cast<int>(std::clamp(r, static_cast<double>(lo),
                                     static_cast<double>(hi)));
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1, img.depth());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double luma = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                          0.114 * img.at(x, y, 2);
      out.set(x, y, 0,
              static_cast<uint16_t>(round_clamp(luma, 0, img.max_value())));
    }
  }
  return out;
}

ImageBuffer normalize_16_to_8(const ImageBuffer& img) {
  if (img.depth() != 16 || img.channels() != 1)
    throw ImageError(ImageError::Kind::InvalidBuffer,
                     "normalize_16_to_8 expects a 16-bit single-channel image");
  const auto [min_it, max_it] =
      std::minmax_element(img.data().begin(), img.data().end());
  const uint16_t lo = *min_it, hi = *max_it;
  ImageBuffer out(img.width(), img.height(), 1, 8);
  if (lo == hi) return out;  // constant image maps to 0
  const double scale = 255.0 / (hi - lo);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.set(x, y, 0,
              static_cast<uint16_t>(
                  round_clamp((img.at(x, y) - lo) * scale, 0, 255)));
  return out;
}

ImageBuffer gradient_magnitude(const ImageBuffer& img) {
  const ImageBuffer g = to_grayscale(img);
  ImageBuffer out(g.width(), g.height(), 1, 8);
  const int w = g.width(), h = g.height();
  auto px = [&](int x, int y) {
    return static_cast<double>(g.at(std::clamp(x, 0, w - 1),
                                    std::clamp(y, 0, h - 1)));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      // Sobel responses span [-1020, 1020]; /4 brings magnitude into range.
      out.set(x, y, 0,
              static_cast<uint16_t>(
                  round_clamp(std::hypot(gx, gy) / 4.0, 0, 255)));
    }
  }
  return out;
}

}  // namespace msi
