#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {

std::array<std::uint8_t, 3> hot_colormap(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto channel = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  return {channel(3.0 * v), channel(3.0 * v - 1.0), channel(3.0 * v - 2.0)};
}

Image spectrogram_image(const AudioBuffer& buf, const RenderOptions& opt) {
  if (buf.empty()) throw std::invalid_argument("spectrogram_image: empty buffer");
  if (!(opt.dynamic_range_db > 0.0)) throw std::invalid_argument("spectrogram_image: dynamic range must be positive");
  const spectral::StftConfig cfg{opt.fft_size, opt.fft_size, opt.hop, spectral::FramePadding::kCenter};
  const auto spec = spectral::stft(buf, cfg);

  std::vector<double> db(spec.values.size());
  const double floor_db = 10.0 * std::log10(spectral::kPowerFloor);
  double top = floor_db + opt.dynamic_range_db;
  for (std::size_t i = 0; i < db.size(); ++i) {
    db[i] = 10.0 * std::log10(std::max(std::norm(spec.values[i]), spectral::kPowerFloor));
    top = std::max(top, db[i]);
  }
  const double bottom = top - opt.dynamic_range_db;

  Image img;
  img.width = spec.frames;
  img.height = spec.bins;
  img.rgb.resize(3 * img.width * img.height);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t f = 0; f < spec.bins; ++f) {
      const auto c = hot_colormap((db[t * spec.bins + f] - bottom) / opt.dynamic_range_db);
      const std::size_t y = img.height - 1 - f;  // low frequencies at the bottom
      std::copy(c.begin(), c.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * (y * img.width + t)));
    }
  }
  return img;
}

void write_png(const Image& image, const fs::path& path) {
  if (image.width == 0 || image.height == 0) throw std::invalid_argument("write_png: empty image");
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw DataError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed encoding " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.rgb.data() + 3 * y * image.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw DataError("failed writing " + path.string());
}

void render_spectrogram(const AudioBuffer& buf, const fs::path& out, const RenderOptions& opt) {
  write_png(spectrogram_image(buf, opt), out);
}

}  // namespace bwe::pipeline
