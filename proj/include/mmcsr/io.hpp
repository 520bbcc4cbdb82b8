#pragma once

/// @file
/// File formats: PNG frames (libpng), Middlebury .flo flows, flat key=value
/// text files and frame-set discovery on disk.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcsr/core.hpp"

namespace mmcsr {

/// File-system or format failure; carries the offending path in its message.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded PNG: one plane (gray) or three (RGB), values in [0,1].
struct PngImage {
  std::vector<Image> planes;
  int bitDepth = 8;

  bool is_gray() const { return planes.size() == 1; }
  std::size_t width() const { return planes.front().width(); }
  std::size_t height() const { return planes.front().height(); }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

/// Reads 8- or 16-bit PNGs. Palettes and low bit depths are expanded, alpha
/// is dropped, gray stays single-plane. Samples map to v / (2^depth - 1).
inline PngImage read_png(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_handler,
                                           detail::png_warning_handler);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }

  // Everything touched after setjmp lives in storage that survives longjmp.
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    throw IoError("'" + path.string() + "': unsupported PNG layout");
  }
  PngImage out;
  out.bitDepth = depth;
  out.planes.assign(static_cast<std::size_t>(channels), Image(width, height));
  const double scale = depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes = depth / 8;
  for (std::size_t y = 0; y < height; ++y) {
    const unsigned char* row = rows[y];
    for (std::size_t x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const unsigned char* s = row + (x * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * bytes;
        const unsigned v = bytes == 2 ? (static_cast<unsigned>(s[0]) << 8) | s[1] : s[0];
        out.planes[static_cast<std::size_t>(c)](x, y) = static_cast<double>(v) / scale;
      }
    }
  }
  return out;
}

/// Writes one (gray) or three (RGB) planes. Values are clipped to [0,1] and
/// rounded to the nearest code of the chosen depth (8 or 16).
inline void write_png(const std::filesystem::path& path, const std::vector<Image>& planes, int bitDepth = 8) {
  if (planes.size() != 1 && planes.size() != 3) throw std::invalid_argument("write_png: need 1 or 3 planes");
  if (bitDepth != 8 && bitDepth != 16) throw std::invalid_argument("write_png: bit depth must be 8 or 16");
  for (const auto& p : planes) {
    if (!p.same_dims(planes.front())) throw std::invalid_argument("write_png: plane dimensions differ");
  }
  const std::size_t width = planes.front().width(), height = planes.front().height();
  const std::size_t channels = planes.size(), bytes = static_cast<std::size_t>(bitDepth / 8);
  const double scale = bitDepth == 16 ? 65535.0 : 255.0;

  std::vector<unsigned char> buffer(width * height * channels * bytes);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(planes[c](x, y), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * scale));
        unsigned char* d = buffer.data() + ((y * width + x) * channels + c) * bytes;
        if (bytes == 2) {
          d[0] = static_cast<unsigned char>(q >> 8);
          d[1] = static_cast<unsigned char>(q & 0xFF);
        } else {
          d[0] = static_cast<unsigned char>(q);
        }
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * width * channels * bytes;

  auto file = detail::open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_handler,
                                            detail::png_warning_handler);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bitDepth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("cannot write '" + path.string() + "'");
}

inline void write_png(const std::filesystem::path& path, const Image& gray, int bitDepth = 8) {
  write_png(path, std::vector<Image>{gray}, bitDepth);
}

namespace detail {

static_assert(sizeof(float) == 4);

inline void put_le32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_le32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

/// Middlebury layout: "PIEH", int32 width, int32 height, then (vx, vy) float32
/// pairs row-major, all little-endian.
inline void write_flo(std::ostream& os, const FlowField& flow) {
  os.write("PIEH", 4);
  detail::put_le32(os, static_cast<std::uint32_t>(flow.vx.width()));
  detail::put_le32(os, static_cast<std::uint32_t>(flow.vx.height()));
  for (std::size_t i = 0; i < flow.vx.size(); ++i) {
    detail::put_le32(os, std::bit_cast<std::uint32_t>(static_cast<float>(flow.vx.data()[i])));
    detail::put_le32(os, std::bit_cast<std::uint32_t>(static_cast<float>(flow.vy.data()[i])));
  }
}

inline FlowField read_flo(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PIEH", 4) != 0) throw IoError("bad .flo magic");
  const auto w = static_cast<std::int32_t>(detail::get_le32(is));
  const auto h = static_cast<std::int32_t>(detail::get_le32(is));
  if (w <= 0 || h <= 0 || static_cast<std::int64_t>(w) * h > (std::int64_t{1} << 30)) {
    throw IoError("bad .flo dimensions");
  }
  Image vx(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  Image vy(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < vx.size(); ++i) {
    vx.data()[i] = std::bit_cast<float>(detail::get_le32(is));
    vy.data()[i] = std::bit_cast<float>(detail::get_le32(is));
  }
  return FlowField(std::move(vx), std::move(vy));
}

inline void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_flo(os, flow);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
}

inline FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return read_flo(is);
  } catch (const IoError& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

using KeyValues = std::map<std::string, std::string>;

/// Flat "key=value" lines. Blank lines and lines starting with '#' are
/// skipped; whitespace around keys and values is trimmed. Later duplicates win.
inline KeyValues parse_key_values(std::istream& is, const std::string& source = "<input>") {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  KeyValues out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return parse_key_values(is, path.string());
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

namespace detail {

inline bool wildcard_match(const std::string& pattern, const std::string& name) {
  std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

}  // namespace detail

/// Resolves a frame set: a directory (all *.png inside) or a path whose file
/// name holds '*'/'?' wildcards. Results are sorted lexicographically, which
/// is temporal order for zero-padded names.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& input) {
  namespace fs = std::filesystem;
  fs::path dir = input;
  std::string pattern = "*.png";
  const std::string leaf = input.filename().string();
  if (leaf.find_first_of("*?") != std::string::npos) {
    dir = input.parent_path().empty() ? fs::path(".") : input.parent_path();
    pattern = leaf;
  }
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && detail::wildcard_match(pattern, entry.path().filename().string())) {
      out.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

/// "frame_0007.png" style names.
inline std::string frame_name(std::size_t index, const std::string& prefix = "frame_",
                              const std::string& ext = ".png") {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return prefix + buf + ext;
}

}  // namespace mmcsr
