#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "catdet/errors.hpp"
#include "catdet/kitti/scene.hpp"

namespace catdet::kitti {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> pixels;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": not a readable PNG");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor image({3, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) image(ch, r, c) = pixels[r * stride + c * 3 + ch] / 255.0;
    }
  }
  return image;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_png expects a [3, H, W] image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<png_byte> pixels(h * w * 3);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        pixels[(r * w + c) * 3 + ch] =
            static_cast<png_byte>(std::lround(std::clamp(image(ch, r, c), 0.0, 1.0) * 255.0));
      }
    }
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r) png_write_row(png, pixels.data() + r * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Frame read_frame(const std::filesystem::path& dir) {
  Frame f;
  f.calib = parse_calib(read_text_file(dir / "calib.txt"));
  f.cloud = read_velodyne_file(dir / "velodyne.bin");
  f.image = read_png(dir / "image.png");
  const auto label_path = dir / "label.txt";
  if (std::filesystem::exists(label_path)) f.labels = parse_labels(read_text_file(label_path), f.calib);
  label_points(f.cloud, target_boxes(f.labels));
  return f;
}

void write_frame(const std::filesystem::path& dir, const Frame& frame) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "calib.txt", format_calib(frame.calib));
  write_velodyne_file(dir / "velodyne.bin", frame.cloud);
  write_png(dir / "image.png", frame.image);
  write_text_file(dir / "label.txt", format_labels(frame.labels));
}

}  // namespace catdet::kitti
