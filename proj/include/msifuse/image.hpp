#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msi {

class ImageError : public std::runtime_error {
 public:
  enum class Kind {
    MissingFile,
    UnsupportedFormat,
    CorruptHeader,
    UnwritablePath,
    InvalidBuffer,
  };

  ImageError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Row-major intensity raster, 1 or 3 interleaved channels, 8- or 16-bit
/// samples. Samples are stored widened to uint16_t regardless of depth.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, int depth)
      : width_(width), height_(height), channels_(channels), depth_(depth),
        data_(static_cast<size_t>(width) * height * channels, 0) {
    validate_shape();
  }
  ImageBuffer(int width, int height, int channels, int depth,
              std::vector<uint16_t> data)
      : width_(width), height_(height), channels_(channels), depth_(depth),
        data_(std::move(data)) {
    validate_shape();
    if (data_.size() != static_cast<size_t>(width_) * height_ * channels_)
      throw ImageError(ImageError::Kind::InvalidBuffer,
                       "data length does not match width*height*channels");
    const uint32_t maxv = max_value();
    for (uint16_t s : data_)
      if (s > maxv)
        throw ImageError(ImageError::Kind::InvalidBuffer,
                         "sample exceeds bit depth");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  int depth() const { return depth_; }
  uint16_t max_value() const { return depth_ == 8 ? 255 : 65535; }
  const std::vector<uint16_t>& data() const { return data_; }

  uint16_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  void set(int x, int y, int c, uint16_t v) {
    data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c] = v;
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  bool same_shape(const ImageBuffer& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

 private:
  void validate_shape() const {
    if (width_ <= 0 || height_ <= 0)
      throw ImageError(ImageError::Kind::InvalidBuffer,
                       "image dimensions must be positive");
    if (channels_ != 1 && channels_ != 3)
      throw ImageError(ImageError::Kind::InvalidBuffer,
                       "channels must be 1 or 3");
    if (depth_ != 8 && depth_ != 16)
      throw ImageError(ImageError::Kind::InvalidBuffer,
                       "depth must be 8 or 16");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  int depth_ = 8;
  std::vector<uint16_t> data_;
};

/// Per-pixel coverage flags for a warped image footprint.
class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const {
    return bits_[static_cast<size_t>(y) * width_ + x];
  }
  void set(int x, int y, bool v) {
    bits_[static_cast<size_t>(y) * width_ + x] = v;
  }
  size_t count() const;
  bool any() const { return count() > 0; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<bool> bits_;
};

/// Round half away from zero, then clamp to [lo, hi].
int round_clamp(double v, int lo, int hi);

/// Collapse to a single channel with 0.299/0.587/0.114 luma weights.
/// Single-channel input is returned unchanged.
ImageBuffer to_grayscale(const ImageBuffer& img);

/// Per-frame min-max rescale of a 16-bit single-channel image to [0, 255].
/// A constant image maps to all zeros.
ImageBuffer normalize_16_to_8(const ImageBuffer& img);

/// Gradient magnitude (Sobel, scaled into the 8-bit range) of a grayscale
/// image. Used to bridge the thermal/RGB modality gap before detection.
ImageBuffer gradient_magnitude(const ImageBuffer& img);

}  // namespace msi
