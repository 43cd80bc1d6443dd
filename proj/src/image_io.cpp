#include "g2/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace g2 {

namespace {

void write_pnm(const std::string& path, const Tensor& image, int64_t channels,
               const char* magic) {
  if (image.rank() != 3 || image.extent(0) != channels) {
    throw std::invalid_argument("image write: expected [" + std::to_string(channels) +
                                ",H,W], got " + shape_to_string(image.shape()));
  }
  const int64_t h = image.extent(1), w = image.extent(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open image for write: " + path);
  os << magic << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(w * channels);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < channels; ++c) {
        double v = image[(c * h + y) * w + x];
        v = std::min(1.0, std::max(0.0, v));
        row[x * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("image write failed: " + path);
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& image) { write_pnm(path, image, 1, "P5"); }
void write_ppm(const std::string& path, const Tensor& image) { write_pnm(path, image, 3, "P6"); }

void write_image(const std::string& path, const Tensor& image) {
  if (image.rank() != 3) throw std::invalid_argument("write_image: expected [C,H,W]");
  if (image.extent(0) == 1) {
    write_pgm(path, image);
  } else if (image.extent(0) == 3) {
    write_ppm(path, image);
  } else {
    throw std::invalid_argument("write_image: unsupported channel count " +
                                std::to_string(image.extent(0)));
  }
}

Tensor read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open image: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P6") {
    throw std::runtime_error("unsupported image format in " + path);
  }
  auto skip_ws_comments = [&is]() {
    while (true) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
  };
  int64_t w = 0, h = 0, maxval = 0;
  skip_ws_comments();
  is >> w;
  skip_ws_comments();
  is >> h;
  skip_ws_comments();
  is >> maxval;
  if (!is || w < 1 || h < 1 || maxval != 255) {
    throw std::runtime_error("malformed image header in " + path);
  }
  is.get();  // single whitespace after maxval
  const int64_t channels = magic == "P5" ? 1 : 3;
  std::vector<unsigned char> raw(w * h * channels);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw std::runtime_error("truncated image data in " + path);
  Tensor out(Shape{channels, h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < channels; ++c) {
        out[(c * h + y) * w + x] = raw[(y * w + x) * channels + c] / 255.0;
      }
    }
  }
  return out;
}

namespace {
void check_stackable(const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("stack: no images");
  for (const Tensor& t : images) {
    if (t.rank() != 3 || !t.same_shape(images[0])) {
      throw std::invalid_argument("stack: images must share one [C,H,W] shape");
    }
  }
}
}  // namespace

Tensor hstack_images(const std::vector<Tensor>& images, double separator_value) {
  check_stackable(images);
  const int64_t c = images[0].extent(0), h = images[0].extent(1), w = images[0].extent(2);
  const int64_t n = static_cast<int64_t>(images.size());
  const int64_t out_w = n * w + (n - 1);
  Tensor out(Shape{c, h, out_w}, separator_value);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t x_off = i * (w + 1);
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          out[(ch * h + y) * out_w + x_off + x] = images[i][(ch * h + y) * w + x];
        }
      }
    }
  }
  return out;
}

Tensor vstack_images(const std::vector<Tensor>& images, double separator_value) {
  check_stackable(images);
  const int64_t c = images[0].extent(0), h = images[0].extent(1), w = images[0].extent(2);
  const int64_t n = static_cast<int64_t>(images.size());
  const int64_t out_h = n * h + (n - 1);
  Tensor out(Shape{c, out_h, w}, separator_value);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t y_off = i * (h + 1);
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          out[(ch * out_h + y_off + y) * w + x] = images[i][(ch * h + y) * w + x];
        }
      }
    }
  }
  return out;
}

}  // namespace g2
