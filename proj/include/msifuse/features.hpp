#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "msifuse/image.hpp"

namespace msi {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Keypoint {
  PixelPoint p;         // integer location at detection time
  double score = 0.0;   // sum of |I_n - I_p| over qualifying circle pixels
  double theta = 0.0;   // orientation, radians in (-pi, pi]
};

/// Packed n-bit binary descriptor.
class Descriptor {
 public:
  Descriptor() = default;
  explicit Descriptor(int n_bits)
      : n_(n_bits), words_((n_bits + 63) / 64, 0) {}

  int size() const { return n_; }
  bool bit(int i) const { return (words_[i / 64] >> (i % 64)) & 1; }
  void set_bit(int i) { words_[i / 64] |= uint64_t{1} << (i % 64); }
  const std::vector<uint64_t>& words() const { return words_; }

  friend int hamming_distance(const Descriptor& a, const Descriptor& b);

 private:
  int n_ = 0;
  std::vector<uint64_t> words_;
};

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct Match {
  int index_1 = 0;
  int index_2 = 0;
  int distance = 0;
};

/// Pixel pair offsets for the binary descriptor, all within radius 15 of
/// the 31x31 patch center. The seed is recorded for reproducibility.
struct SamplingPattern {
  struct Offset {
    int x, y;
  };
  std::vector<std::pair<Offset, Offset>> pairs;
  uint32_t seed = 0;
};

/// The 16 offsets of the radius-3 discrete circle, clockwise from (0,-3).
const std::array<std::pair<int, int>, 16>& circle16();

/// Margin keypoints must keep from every image border.
inline constexpr int kBorderMargin = 16;

/// Segment-test detector: a pixel is a candidate when at least 7 of its 16
/// circle neighbors differ from it by more than tau (either direction, no
/// contiguity requirement). With nms enabled a 3x3 non-maximum suppression
/// on the score runs afterward. Output sorted by descending score, ties by
/// (y, x). Orientations are not assigned here.
std::vector<Keypoint> detect(const ImageBuffer& image, double tau,
                             bool nms = true);

/// Intensity-moment orientation over the circular radius-15 patch around p:
/// theta = atan2(m01, m10) with patch-relative coordinates. Set use_atan2
/// to false for the quadrant-ambiguous arctan(m01/m10) variant.
double orientation(const ImageBuffer& image, const PixelPoint& p,
                   bool use_atan2 = true);

/// Deterministic Gaussian test-pair pattern (sigma = 31/5), identical for
/// identical (n_bits, seed).
SamplingPattern make_pattern(int n_bits, uint32_t seed);

/// Steered binary descriptor: pattern offsets are rotated by kp.theta,
/// rounded, and bit i is set when I(p_a) < I(p_b). Ties give 0.
Descriptor describe(const ImageBuffer& image, const Keypoint& kp,
                    const SamplingPattern& pattern);

struct MatchConfig {
  int max_distance = -1;     // -1 means 0.25 * n bits
  bool cross_check = true;
  double ratio = 0.0;        // Lowe ratio test when in (0, 1); off by default
};

/// Brute-force Hamming matching from set 1 to set 2. Output sorted by
/// ascending distance, ties by (index_1, index_2).
std::vector<Match> match(const std::vector<Descriptor>& desc_1,
                         const std::vector<Descriptor>& desc_2,
                         const MatchConfig& config = {});

/// Side-by-side visualization with keypoint circles and one line per match.
ImageBuffer render_matches(const ImageBuffer& img_1, const ImageBuffer& img_2,
                           const std::vector<Keypoint>& kps_1,
                           const std::vector<Keypoint>& kps_2,
                           const std::vector<Match>& matches);

}  // namespace msi
