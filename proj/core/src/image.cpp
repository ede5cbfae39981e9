#include "worldmesh/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "worldmesh/error.hpp"

namespace worldmesh {

std::size_t DepthMap::hit_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return std::isfinite(v); }));
}

ImageF to_float(const Image8& img) {
  ImageF out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
  return out;
}

Image8 to_8bit(const ImageF& img) {
  Image8 out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

namespace {

struct PngWriteState {
  std::vector<std::uint8_t>* out;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + len);
}
void png_flush_cb(png_structp) {}

struct PngReadState {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->in.size()) png_error(png, "truncated png");
  std::memcpy(data, st->in.data() + st->pos, len);
  st->pos += len;
}

[[noreturn]] void png_error_cb(png_structp, png_const_charp msg) { throw Error(ErrorCode::kIoError, std::string("png: ") + msg); }
void png_warning_cb(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode_png_raw(int width, int height, int color_type, int bit_depth,
                                         const std::vector<const std::uint8_t*>& rows) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_cb, png_warning_cb);
  if (!png) throw Error(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  PngWriteState st{&out};
  try {
    png_set_write_fn(png, &st, png_write_cb, png_flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (const std::uint8_t* row : rows) png_write_row(png, const_cast<png_bytep>(row));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& img) {
  int color_type = 0;
  switch (img.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw Error(ErrorCode::kInvalidArgument, "png supports 1, 3 or 4 channels");
  }
  std::vector<const std::uint8_t*> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = &img.data[static_cast<std::size_t>(y) * img.width * img.channels];
  return encode_png_raw(img.width, img.height, color_type, 8, rows);
}

Image8 decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::kIoError, "not a png stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_cb, png_warning_cb);
  png_infop info = png_create_info_struct(png);
  PngReadState st{bytes, 0};
  Image8 img;
  try {
    png_set_read_fn(png, &st, png_read_cb);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = png_get_channels(png, info);
    img = Image8(w, h, c);
    for (int y = 0; y < h; ++y) png_read_row(png, &img.data[static_cast<std::size_t>(y) * w * c], nullptr);
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const Image8& img) { write_file(path, encode_png(img)); }

Image8 read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void write_depth_preview_png(const std::filesystem::path& path, const DepthMap& depth) {
  // 16-bit samples are big endian in PNG.
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(depth.width) * depth.height * 2);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    double d = depth.values[i];
    auto mm = std::isfinite(d) ? static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 0L, 65535L)) : std::uint16_t{0};
    buf[2 * i] = static_cast<std::uint8_t>(mm >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(mm & 0xff);
  }
  std::vector<const std::uint8_t*> rows(static_cast<std::size_t>(depth.height));
  for (int y = 0; y < depth.height; ++y) rows[static_cast<std::size_t>(y)] = &buf[static_cast<std::size_t>(y) * depth.width * 2];
  write_file(path, encode_png_raw(depth.width, depth.height, PNG_COLOR_TYPE_GRAY, 16, rows));
}

std::vector<std::uint8_t> encode_pfm(const DepthMap& depth) {
  std::string header = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + depth.values.size() * 4);
  // PFM stores rows bottom-to-top.
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      double d = depth.at(x, y);
      float f = std::isfinite(d) ? static_cast<float>(d) : 0.0f;
      auto bits = std::bit_cast<std::uint32_t>(f);
      for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xff));
    }
  }
  return out;
}

DepthMap decode_pfm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "Pf") throw Error(ErrorCode::kIoError, "not a single-channel PFM");
  int w = 0, h = 0;
  double scale = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIoError, "bad PFM header");
  }
  ++pos;  // single whitespace after scale
  if (w <= 0 || h <= 0 || bytes.size() < pos + static_cast<std::size_t>(w) * h * 4)
    throw Error(ErrorCode::kIoError, "truncated PFM");
  const bool little = scale < 0;
  DepthMap depth(w, h);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) {
        std::uint32_t b = bytes[pos + static_cast<std::size_t>(k)];
        bits |= little ? (b << (8 * k)) : (b << (8 * (3 - k)));
      }
      pos += 4;
      float f = std::bit_cast<float>(bits);
      depth.at(x, y) = (std::isfinite(f) && f > 0.0f) ? static_cast<double>(f) : DepthMap::kNoHit;
    }
  }
  return depth;
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) { write_file(path, encode_pfm(depth)); }

DepthMap read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

}  // namespace worldmesh
