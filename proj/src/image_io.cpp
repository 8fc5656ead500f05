#include "ctssl/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace ctssl {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  while (in) {
    const int c = in.get();
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    if (c == EOF) break;
    token.push_back(static_cast<char>(c));
  }
  if (token.empty()) throw std::runtime_error("truncated PGM header");
  return token;
}

Grid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P2" && magic != "P5") throw std::runtime_error("not a grayscale PGM: " + path.string());
  const int width = std::stoi(pnm_token(in));
  const int height = std::stoi(pnm_token(in));
  const int maxval = std::stoi(pnm_token(in));
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error("invalid PGM header: " + path.string());
  }
  Grid out(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      int v = 0;
      if (magic == "P2") {
        v = std::stoi(pnm_token(in));
      } else if (maxval < 256) {
        v = in.get();
      } else {
        const int hi = in.get();
        const int lo = in.get();
        v = (hi << 8) | lo;
      }
      if (!in) throw std::runtime_error("truncated PGM data: " + path.string());
      out(r, c) = static_cast<double>(v) / maxval;
    }
  }
  return out;
}

struct PngReadDeleter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadDeleter() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

Grid read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open " + path.string());
  PngReadDeleter h;
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!h.png) throw std::runtime_error("libpng init failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(h.png))) throw std::runtime_error("cannot decode PNG " + path.string());
  png_init_io(h.png, file.get());
  png_read_info(h.png, h.info);
  const int color = png_get_color_type(h.png, h.info);
  const int depth = png_get_bit_depth(h.png, h.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(h.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(h.png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(h.png, 1, -1, -1);
  }
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(h.png);
  png_read_update_info(h.png, h.info);
  const int width = static_cast<int>(png_get_image_width(h.png, h.info));
  const int height = static_cast<int>(png_get_image_height(h.png, h.info));
  const int out_depth = png_get_bit_depth(h.png, h.info);
  const std::size_t rowbytes = png_get_rowbytes(h.png, h.info);
  std::vector<unsigned char> buffer(rowbytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[static_cast<std::size_t>(r)] = buffer.data() + rowbytes * static_cast<std::size_t>(r);
  png_read_image(h.png, rows.data());
  Grid out(height, width);
  for (int r = 0; r < height; ++r) {
    const unsigned char* row = rows[static_cast<std::size_t>(r)];
    for (int c = 0; c < width; ++c) {
      if (out_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, row + 2 * c, 2);
        out(r, c) = v / 65535.0;
      } else {
        out(r, c) = row[c] / 255.0;
      }
    }
  }
  return out;
}

}  // namespace

Grid read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

void write_pfm(const std::filesystem::path& path, const Grid& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "Pf\n" << values.cols() << ' ' << values.rows() << "\n-1.0\n";
  for (int r = values.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < values.cols(); ++c) {
      const float v = static_cast<float>(values(r, c));
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
  }
}

Grid read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (magic != "Pf" || width <= 0 || height <= 0 || scale == 0.0) {
    throw std::runtime_error("not a grayscale PFM: " + path.string());
  }
  const bool little = scale < 0.0;
  Grid out(height, width);
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      if (!in) throw std::runtime_error("truncated PFM: " + path.string());
      const std::uint32_t bits =
          little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24)
                 : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 | std::uint32_t{b[1]} << 16 | std::uint32_t{b[0]} << 24);
      out(r, c) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Grid& values, double lo, double hi) {
  require(hi > lo, "write_png: empty display range");
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  std::vector<unsigned char> row(static_cast<std::size_t>(values.cols()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("cannot encode PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(values.cols()), static_cast<png_uint_32>(values.rows()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < values.rows(); ++r) {
    for (int c = 0; c < values.cols(); ++c) {
      const double t = std::clamp((values(r, c) - lo) / (hi - lo), 0.0, 1.0);
      row[static_cast<std::size_t>(c)] = static_cast<unsigned char>(std::lround(t * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Grid resize_bilinear(const Grid& image, int size) {
  require(size >= 1, "resize: size must be positive");
  require(image.rows() >= 1 && image.cols() >= 1, "resize: empty image");
  if (image.rows() == size && image.cols() == size) return image;
  Grid out(size, size);
  const double sy = static_cast<double>(image.rows()) / size;
  const double sx = static_cast<double>(image.cols()) / size;
  for (int r = 0; r < size; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.rows() - 1.0);
    const int y0 = std::min(static_cast<int>(y), image.rows() - 1);
    const int y1 = std::min(y0 + 1, image.rows() - 1);
    const double fy = y - y0;
    for (int c = 0; c < size; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.cols() - 1.0);
      const int x0 = std::min(static_cast<int>(x), image.cols() - 1);
      const int x1 = std::min(x0 + 1, image.cols() - 1);
      const double fx = x - x0;
      out(r, c) = (1 - fy) * ((1 - fx) * image(y0, x0) + fx * image(y0, x1)) +
                  fy * ((1 - fx) * image(y1, x0) + fx * image(y1, x1));
    }
  }
  return out;
}

}  // namespace ctssl
