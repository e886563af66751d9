#include "msifuse/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace msi {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool looks_like_other_raster(const unsigned char* sig, size_t n) {
  if (n >= 2 && sig[0] == 'B' && sig[1] == 'M') return true;                 // BMP
  if (n >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return true;              // JPEG
  if (n >= 4 && std::memcmp(sig, "GIF8", 4) == 0) return true;             // GIF
  if (n >= 4 && (std::memcmp(sig, "II*\0", 4) == 0 ||
                 std::memcmp(sig, "MM\0*", 4) == 0)) return true;          // TIFF
  if (n >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6'))
    return true;                                                            // binary PNM
  return false;
}

ImageBuffer load_png(FILE* f, const std::filesystem::path& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(ImageError::Kind::CorruptHeader,
                     "png decoder initialization failed: " + path.string());
  }
  std::vector<uint16_t> data;
  int width = 0, height = 0, channels = 0, depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(ImageError::Kind::CorruptHeader,
                     "corrupt png: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // file is big-endian
  png_read_update_info(png, info);

  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "unsupported png layout: " + path.string());
  }

  const size_t row_samples = static_cast<size_t>(width) * channels;
  data.resize(row_samples * height);
  std::vector<png_bytep> rows(height);
  std::vector<uint8_t> raw;
  if (depth == 8) {
    raw.resize(row_samples * height);
    for (int y = 0; y < height; ++y) rows[y] = raw.data() + y * row_samples;
  } else {
    for (int y = 0; y < height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(data.data() + y * row_samples);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (depth == 8)
    for (size_t i = 0; i < data.size(); ++i) data[i] = raw[i];
  return ImageBuffer(width, height, channels, depth, std::move(data));
}

ImageBuffer load_text_pgm(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string magic;
  in >> magic;
  long w = 0, h = 0, maxv = 0;
  if (magic != "P2" || !(in >> w >> h >> maxv) || w <= 0 || h <= 0 ||
      (maxv != 255 && maxv != 65535))
    throw ImageError(ImageError::Kind::CorruptHeader,
                     "corrupt gray map header: " + path.string());
  std::vector<uint16_t> data;
  data.reserve(static_cast<size_t>(w) * h);
  long v = 0;
  for (long i = 0; i < w * h; ++i) {
    if (!(in >> v) || v < 0 || v > maxv)
      throw ImageError(ImageError::Kind::CorruptHeader,
                       "corrupt gray map samples: " + path.string());
    data.push_back(static_cast<uint16_t>(v));
  }
  return ImageBuffer(static_cast<int>(w), static_cast<int>(h), 1,
                     maxv == 255 ? 8 : 16, std::move(data));
}

void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f)
    throw ImageError(ImageError::Kind::UnwritablePath,
                     "cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageError(ImageError::Kind::UnwritablePath,
                     "png encoder initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError(ImageError::Kind::UnwritablePath,
                     "png write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), img.depth(),
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img.depth() == 16) png_set_swap(png);

  const size_t row_samples =
      static_cast<size_t>(img.width()) * img.channels();
  if (img.depth() == 8) {
    std::vector<uint8_t> row(row_samples);
    for (int y = 0; y < img.height(); ++y) {
      for (size_t i = 0; i < row_samples; ++i)
        row[i] = static_cast<uint8_t>(img.data()[y * row_samples + i]);
      png_write_row(png, row.data());
    }
  } else {
    for (int y = 0; y < img.height(); ++y)
      png_write_row(png, reinterpret_cast<png_const_bytep>(
                             img.data().data() + y * row_samples));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_text_pgm(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.channels() != 1)
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "gray map files are single-channel only");
  std::ofstream out(path);
  if (!out)
    throw ImageError(ImageError::Kind::UnwritablePath,
                     "cannot open for writing: " + path.string());
  out << "P2\n" << img.width() << ' ' << img.height() << '\n'
      << (img.depth() == 8 ? 255 : 65535) << '\n';
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      out << img.at(x, y) << (x + 1 == img.width() ? '\n' : ' ');
  }
  if (!out)
    throw ImageError(ImageError::Kind::UnwritablePath,
                     "write failed: " + path.string());
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f)
    throw ImageError(ImageError::Kind::MissingFile,
                     "no such file: " + path.string());
  unsigned char sig[8] = {};
  const size_t n = std::fread(sig, 1, sizeof(sig), f.get());
  if (n >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
    std::rewind(f.get());
    return load_png(f.get(), path);
  }
  if (n >= 2 && sig[0] == 'P' && sig[1] == '2') {
    f.reset();
    return load_text_pgm(path);
  }
  if (looks_like_other_raster(sig, n))
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "unsupported image format: " + path.string());
  throw ImageError(ImageError::Kind::CorruptHeader,
                   "unrecognized or corrupt header: " + path.string());
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png")
    save_png(img, path);
  else if (ext == ".pgm")
    save_text_pgm(img, path);
  else
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "unsupported output extension: " + ext);
}

}  // namespace msi
