#include "msifuse/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

namespace msi {

const std::array<std::pair<int, int>, 16>& circle16() {
  static const std::array<std::pair<int, int>, 16> offsets = {{
      {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
      {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
  }};
  return offsets;
}

int hamming_distance(const Descriptor& a, const Descriptor& b) {
  if (a.n_ != b.n_)
    throw FeatureError("descriptor length mismatch");
  int d = 0;
  for (size_t w = 0; w < a.words_.size(); ++w)
    d += std::popcount(a.words_[w] ^ b.words_[w]);
  return d;
}

std::vector<Keypoint> detect(const ImageBuffer& image, double tau, bool nms) {
  if (!(tau > 0)) throw FeatureError("tau must be positive");
  if (image.channels() != 1 || image.depth() != 8)
    throw FeatureError("detect expects an 8-bit single-channel image");
  const int w = image.width(), h = image.height();
  if (w < 33 || h < 33) throw FeatureError("image too small for detection");

  // score > 0 only at candidate pixels
  std::vector<double> score(static_cast<size_t>(w) * h, -1.0);
  for (int y = kBorderMargin; y < h - kBorderMargin; ++y) {
    for (int x = kBorderMargin; x < w - kBorderMargin; ++x) {
      const double ip = image.at(x, y);
      int count = 0;
      double s = 0.0;
      for (const auto& [dx, dy] : circle16()) {
        const double in = image.at(x + dx, y + dy);
        if (in > ip + tau || in < ip - tau) {
          ++count;
          s += std::abs(in - ip);
        }
      }
      if (count >= 7) score[static_cast<size_t>(y) * w + x] = s;
    }
  }

  std::vector<Keypoint> kps;
  for (int y = kBorderMargin; y < h - kBorderMargin; ++y) {
    for (int x = kBorderMargin; x < w - kBorderMargin; ++x) {
      const double s = score[static_cast<size_t>(y) * w + x];
      if (s < 0) continue;
      if (nms) {
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const double sn = score[static_cast<size_t>(y + dy) * w + (x + dx)];
            // equal-score ties go to the earlier pixel in scan order
            if (sn > s || (sn == s && (dy < 0 || (dy == 0 && dx < 0)))) {
              is_max = false;
              break;
            }
          }
        }
        if (!is_max) continue;
      }
      kps.push_back({{static_cast<double>(x), static_cast<double>(y)}, s, 0.0});
    }
  }
  std::stable_sort(kps.begin(), kps.end(),
                   [](const Keypoint& a, const Keypoint& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.p.y != b.p.y) return a.p.y < b.p.y;
                     return a.p.x < b.p.x;
                   });
  return kps;
}

double orientation(const ImageBuffer& image, const PixelPoint& p,
                   bool use_atan2) {
  constexpr int r = 15;
  const int cx = static_cast<int>(std::lround(p.x));
  const int cy = static_cast<int>(std::lround(p.y));
  if (cx - r < 0 || cy - r < 0 || cx + r >= image.width() ||
      cy + r >= image.height())
    throw FeatureError("orientation patch outside image");

  double m10 = 0.0, m01 = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const double i = image.at(cx + dx, cy + dy);
      m10 += dx * i;
      m01 += dy * i;
    }
  }
  if (use_atan2) return std::atan2(m01, m10);
  return m10 == 0.0 ? (m01 >= 0 ? M_PI_2 : -M_PI_2) : std::atan(m01 / m10);
}

SamplingPattern make_pattern(int n_bits, uint32_t seed) {
  if (n_bits < 8) throw FeatureError("pattern needs at least 8 bits");
  constexpr int r = 15;
  const double sigma = 31.0 / 5.0;

  std::mt19937 rng(seed);
  // Hand-rolled Box-Muller keeps the pattern identical across toolchains.
  auto uniform = [&rng]() {
    return (rng() + 1.0) / (static_cast<double>(std::mt19937::max()) + 2.0);
  };
  auto gaussian = [&]() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  auto sample_offset = [&]() {
    for (;;) {
      const int x = static_cast<int>(std::lround(gaussian() * sigma));
      const int y = static_cast<int>(std::lround(gaussian() * sigma));
      if (x * x + y * y <= r * r) return SamplingPattern::Offset{x, y};
    }
  };

  SamplingPattern pattern;
  pattern.seed = seed;
  pattern.pairs.reserve(n_bits);
  for (int i = 0; i < n_bits; ++i)
    pattern.pairs.emplace_back(sample_offset(), sample_offset());
  return pattern;
}

Descriptor describe(const ImageBuffer& image, const Keypoint& kp,
                    const SamplingPattern& pattern) {
  const int cx = static_cast<int>(std::lround(kp.p.x));
  const int cy = static_cast<int>(std::lround(kp.p.y));
  if (cx - kBorderMargin < 0 || cy - kBorderMargin < 0 ||
      cx + kBorderMargin >= image.width() ||
      cy + kBorderMargin >= image.height())
    throw FeatureError("descriptor patch outside image");

  const double c = std::cos(kp.theta), s = std::sin(kp.theta);
  auto sample = [&](const SamplingPattern::Offset& o) {
    const int x = cx + round_clamp(c * o.x - s * o.y, -kBorderMargin,
                                   kBorderMargin);
    const int y = cy + round_clamp(s * o.x + c * o.y, -kBorderMargin,
                                   kBorderMargin);
    return image.at(x, y);
  };

  Descriptor d(static_cast<int>(pattern.pairs.size()));
  for (size_t i = 0; i < pattern.pairs.size(); ++i) {
    if (sample(pattern.pairs[i].first) < sample(pattern.pairs[i].second))
      d.set_bit(static_cast<int>(i));
  }
  return d;
}

std::vector<Match> match(const std::vector<Descriptor>& desc_1,
                         const std::vector<Descriptor>& desc_2,
                         const MatchConfig& config) {
  std::vector<Match> out;
  if (desc_1.empty() || desc_2.empty()) return out;
  const int n = desc_1.front().size();
  const int max_dist =
      config.max_distance >= 0 ? config.max_distance : n / 4;

  auto nearest = [&](const Descriptor& d, const std::vector<Descriptor>& set) {
    int best = -1, best_d = n + 1, second_d = n + 1;
    for (size_t j = 0; j < set.size(); ++j) {
      const int dist = hamming_distance(d, set[j]);
      if (dist < best_d) {
        second_d = best_d;
        best_d = dist;
        best = static_cast<int>(j);
      } else if (dist < second_d) {
        second_d = dist;
      }
    }
    return std::tuple{best, best_d, second_d};
  };

  for (size_t i = 0; i < desc_1.size(); ++i) {
    const auto [j, dist, second] = nearest(desc_1[i], desc_2);
    if (j < 0 || dist > max_dist) continue;
    if (config.ratio > 0 && second <= n &&
        dist >= config.ratio * second)
      continue;
    if (config.cross_check) {
      const auto [back, back_d, back_2nd] = nearest(desc_2[j], desc_1);
      if (back != static_cast<int>(i)) continue;
    }
    out.push_back({static_cast<int>(i), j, dist});
  }
  std::stable_sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.index_1 != b.index_1) return a.index_1 < b.index_1;
    return a.index_2 < b.index_2;
  });
  return out;
}

namespace {

void blit_gray_as_rgb(const ImageBuffer& src, ImageBuffer& dst, int x0) {
  const ImageBuffer g = to_grayscale(src);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const uint16_t v =
          g.depth() == 16 ? static_cast<uint16_t>(g.at(x, y) >> 8) : g.at(x, y);
      for (int c = 0; c < 3; ++c) dst.set(x0 + x, y, c, v);
    }
  }
}

void put_rgb(ImageBuffer& img, int x, int y, uint16_t r, uint16_t g,
             uint16_t b) {
  if (!img.in_bounds(x, y)) return;
  img.set(x, y, 0, r);
  img.set(x, y, 1, g);
  img.set(x, y, 2, b);
}

void draw_circle3(ImageBuffer& img, int cx, int cy) {
  for (const auto& [dx, dy] : circle16())
    put_rgb(img, cx + dx, cy + dy, 0, 255, 0);
}

void draw_line(ImageBuffer& img, int x0, int y0, int x1, int y1) {
  // Bresenham
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put_rgb(img, x0, y0, 255, 0, 0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

ImageBuffer render_matches(const ImageBuffer& img_1, const ImageBuffer& img_2,
                           const std::vector<Keypoint>& kps_1,
                           const std::vector<Keypoint>& kps_2,
                           const std::vector<Match>& matches) {
  ImageBuffer canvas(img_1.width() + img_2.width(),
                     std::max(img_1.height(), img_2.height()), 3, 8);
  blit_gray_as_rgb(img_1, canvas, 0);
  blit_gray_as_rgb(img_2, canvas, img_1.width());

  for (const auto& kp : kps_1)
    draw_circle3(canvas, static_cast<int>(std::lround(kp.p.x)),
                 static_cast<int>(std::lround(kp.p.y)));
  for (const auto& kp : kps_2)
    draw_circle3(canvas, img_1.width() + static_cast<int>(std::lround(kp.p.x)),
                 static_cast<int>(std::lround(kp.p.y)));
  for (const auto& m : matches) {
    const auto& a = kps_1.at(m.index_1).p;
    const auto& b = kps_2.at(m.index_2).p;
    draw_line(canvas, static_cast<int>(std::lround(a.x)),
              static_cast<int>(std::lround(a.y)),
              img_1.width() + static_cast<int>(std::lround(b.x)),
              static_cast<int>(std::lround(b.y)));
  }
  return canvas;
}

}  // namespace msi
