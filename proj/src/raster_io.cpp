#include "mcof/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace mcof {

void LabelRaster::validate(int class_count) const {
  for (std::uint8_t v : data()) {
    if (v != kIgnore && v >= class_count) {
      throw Error(ErrorKind::Format, "label value " + std::to_string(v) +
                                         " outside [0, " + std::to_string(class_count) + ")");
    }
  }
}

void ScalarRaster::clamp_probability() {
  for (float& v : data()) {
    if (std::isnan(v)) v = 0.0f;
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

bool ScalarRaster::is_probability() const {
  return std::all_of(data().begin(), data().end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path.string() + " does not exist");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "rename to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + n > cur->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes->data() + cur->offset, n);
  cur->offset += n;
}

void png_write_mem(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

void png_flush_mem(png_structp) {}

[[noreturn]] void png_error_throw(png_structp, png_const_charp msg) {
  throw Error(ErrorKind::Format, std::string("PNG: ") + msg);
}

void png_warning_ignore(png_structp, png_const_charp) {}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int color_type = 0;
  int bit_depth = 0;
  int row_channels = 0;
  std::vector<std::uint8_t> pixels;  // row-major, row_channels per pixel
};

// Decodes without any transformation beyond unpacking sub-byte depths;
// palette images keep their indices. Sub-byte gray samples are rescaled to
// 8 bits only when `scale_gray` is set (images, not labels).
DecodedPng decode_png_raw(const std::vector<std::uint8_t>& bytes, bool scale_gray) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorKind::Format, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw,
                                           png_warning_ignore);
  if (!png) throw Error(ErrorKind::Format, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  ReadCursor cursor{&bytes, 0};
  png_set_read_fn(png, &cursor, png_read_mem);
  png_read_info(png, info);

  DecodedPng out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.color_type = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (out.bit_depth == 16) throw Error(ErrorKind::Format, "16-bit PNGs are not supported");
  if (out.bit_depth < 8) png_set_packing(png);
  if (scale_gray && out.color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  out.row_channels = png_get_channels(png, info);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  if (row_bytes != static_cast<std::size_t>(out.width) * out.row_channels) {
    throw Error(ErrorKind::Format, "unexpected PNG row layout");
  }
  out.pixels.resize(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return out;
}

std::vector<std::uint8_t> encode_png_raw(int width, int height, int color_type,
                                         const std::uint8_t* pixels, int channels,
                                         const Palette* palette) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw,
                                            png_warning_ignore);
  if (!png) throw Error(ErrorKind::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_set_write_fn(png, &out, png_write_mem, png_flush_mem);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::array<png_color, 256> colors{};
  if (palette) {
    for (int i = 0; i < 256; ++i) colors[i] = {(*palette)[i].r, (*palette)[i].g, (*palette)[i].b};
    png_set_PLTE(png, info, colors.data(), 256);
  }
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + row_bytes * y));
  }
  png_write_end(png, nullptr);
  return out;
}

}  // namespace

ImageRaster decode_image_png(const std::vector<std::uint8_t>& bytes) {
  DecodedPng png = decode_png_raw(bytes, true);
  const std::size_t n = static_cast<std::size_t>(png.width) * png.height;
  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = png.pixels.data() + i * png.row_channels;
    switch (png.color_type) {
      case PNG_COLOR_TYPE_RGB:
      case PNG_COLOR_TYPE_RGB_ALPHA:
        rgb[3 * i] = p[0];
        rgb[3 * i + 1] = p[1];
        rgb[3 * i + 2] = p[2];
        break;
      case PNG_COLOR_TYPE_GRAY:
      case PNG_COLOR_TYPE_GRAY_ALPHA:
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = p[0];
        break;
      default:
        throw Error(ErrorKind::Format, "palette PNGs are not accepted as images");
    }
  }
  return ImageRaster(png.width, png.height, std::move(rgb));
}

LabelRaster decode_label_png(const std::vector<std::uint8_t>& bytes, int class_count) {
  DecodedPng png = decode_png_raw(bytes, false);
  if (png.color_type != PNG_COLOR_TYPE_GRAY && png.color_type != PNG_COLOR_TYPE_PALETTE) {
    throw Error(ErrorKind::Format, "label PNG must be 8-bit gray or palette");
  }
  LabelRaster labels(png.width, png.height, std::move(png.pixels));
  if (class_count > 0) labels.validate(class_count);
  return labels;
}

std::vector<std::uint8_t> encode_image_png(const ImageRaster& image) {
  return encode_png_raw(image.width(), image.height(), PNG_COLOR_TYPE_RGB, image.data().data(), 3,
                        nullptr);
}

std::vector<std::uint8_t> encode_label_png(const LabelRaster& labels) {
  return encode_png_raw(labels.width(), labels.height(), PNG_COLOR_TYPE_PALETTE,
                        labels.data().data(), 1, &voc_palette());
}

ImageRaster load_image_png(const fs::path& path) { return decode_image_png(read_file(path)); }

void save_image_png(const fs::path& path, const ImageRaster& image) {
  write_file_atomic(path, encode_image_png(image));
}

LabelRaster load_label_png(const fs::path& path, int class_count) {
  return decode_label_png(read_file(path), class_count);
}

void save_label_png(const fs::path& path, const LabelRaster& labels) {
  write_file_atomic(path, encode_label_png(labels));
}

const Palette& voc_palette() {
  static const Palette palette = [] {
    Palette p{};
    for (int i = 0; i < 256; ++i) {
      int r = 0, g = 0, b = 0, c = i;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      p[i] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
              static_cast<std::uint8_t>(b)};
    }
    return p;
  }();
  return palette;
}

// ---------------------------------------------------------------------------
// F32R

namespace {

constexpr char kF32rMagic[4] = {'F', '3', '2', 'R'};
constexpr std::size_t kF32rHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_f32r(const ScalarRaster& raster) {
  std::vector<std::uint8_t> out;
  out.reserve(kF32rHeader + raster.values().size() * 4);
  out.insert(out.end(), kF32rMagic, kF32rMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(raster.width()));
  put_u32(out, static_cast<std::uint32_t>(raster.height()));
  put_u32(out, static_cast<std::uint32_t>(raster.channels()));
  for (float v : raster.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ScalarRaster decode_f32r(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kF32rHeader || std::memcmp(bytes.data(), kF32rMagic, 4) != 0) {
    throw Error(ErrorKind::Format, "bad F32R magic");
  }
  const std::uint64_t w = get_u32(bytes.data() + 4);
  const std::uint64_t h = get_u32(bytes.data() + 8);
  const std::uint64_t c = get_u32(bytes.data() + 12);
  if (w == 0 || h == 0 || c == 0 || w > (1u << 24) || h > (1u << 24) || c > 4096) {
    throw Error(ErrorKind::Format, "F32R dimensions out of range");
  }
  const std::uint64_t count = w * h * c;
  if (count > (std::uint64_t{1} << 32) || bytes.size() != kF32rHeader + count * 4) {
    throw Error(ErrorKind::Format, "F32R payload size does not match header");
  }
  std::vector<float> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes.data() + kF32rHeader + 4 * i));
  }
  return ScalarRaster(static_cast<int>(w), static_cast<int>(h), std::move(values),
                      static_cast<int>(c));
}

void save_f32r(const fs::path& path, const ScalarRaster& raster) {
  write_file_atomic(path, encode_f32r(raster));
}

ScalarRaster load_scalar_raster(const fs::path& path, bool probability) {
  const auto bytes = read_file(path);
  ScalarRaster raster;
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kF32rMagic, 4) == 0) {
    raster = decode_f32r(bytes);
  } else {
    DecodedPng png = decode_png_raw(bytes, true);
    if (png.color_type != PNG_COLOR_TYPE_GRAY) {
      throw Error(ErrorKind::Format, path.string() + ": scalar PNG must be 8-bit gray");
    }
    std::vector<float> values(png.pixels.size());
    std::transform(png.pixels.begin(), png.pixels.end(), values.begin(),
                   [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    raster = ScalarRaster(png.width, png.height, std::move(values));
  }
  if (probability) raster.clamp_probability();
  return raster;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw Error(ErrorKind::Parse, "manifest line " + std::to_string(line) + ": " + msg);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir,
                               int class_count_override, bool check_files) {
  DatasetManifest manifest;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  struct Pending {
    ManifestEntry entry;
    std::vector<std::pair<int, int>> raw_labels;
  };
  std::vector<Pending> pending;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("classes:");
      if (pos != std::string::npos) {
        try {
          manifest.class_count = std::stoi(line.substr(pos + 8));
        } catch (const std::exception&) {
          parse_fail(line_no, "bad classes directive");
        }
      }
      continue;
    }
    const auto fields = split(line, '|');
    if (fields.size() != 5) parse_fail(line_no, "expected 5 pipe-separated fields");
    Pending p;
    p.entry.line = line_no;
    if (fields[0].empty()) parse_fail(line_no, "empty image path");
    p.entry.image = resolve(base_dir, fields[0]);
    if (fields[1].empty()) parse_fail(line_no, "empty label field");
    for (const auto& tok : split(fields[1], ',')) {
      std::size_t used = 0;
      int id = 0;
      try {
        id = std::stoi(tok, &used);
      } catch (const std::exception&) {
        parse_fail(line_no, "bad class id '" + tok + "'");
      }
      if (used != tok.size()) parse_fail(line_no, "bad class id '" + tok + "'");
      p.raw_labels.emplace_back(id, static_cast<int>(p.raw_labels.size()));
    }
    const auto heat = fields[2].empty() ? std::vector<std::string>{} : split(fields[2], ',');
    if (heat.size() != p.raw_labels.size()) {
      parse_fail(line_no, "heatmap count does not match class count");
    }
    // Keep heatmaps aligned with the labels after sorting.
    std::sort(p.raw_labels.begin(), p.raw_labels.end());
    for (std::size_t i = 0; i < p.raw_labels.size(); ++i) {
      if (i > 0 && p.raw_labels[i].first == p.raw_labels[i - 1].first) {
        parse_fail(line_no, "duplicate class id " + std::to_string(p.raw_labels[i].first));
      }
      p.entry.labels.push_back(p.raw_labels[i].first);
      const auto& h = heat[static_cast<std::size_t>(p.raw_labels[i].second)];
      if (h.empty()) parse_fail(line_no, "empty heatmap path");
      p.entry.heatmaps.push_back(resolve(base_dir, h));
    }
    if (fields[3] != "-" && !fields[3].empty()) p.entry.saliency = resolve(base_dir, fields[3]);
    if (fields[4] != "-" && !fields[4].empty()) {
      p.entry.ground_truth = resolve(base_dir, fields[4]);
    }
    pending.push_back(std::move(p));
  }

  if (class_count_override > 0) manifest.class_count = class_count_override;
  if (manifest.class_count < 2 || manifest.class_count > 255) {
    throw Error(ErrorKind::Parse, "class count must be in [2, 255]");
  }
  for (auto& p : pending) {
    for (int id : p.entry.labels) {
      if (id < 1 || id >= manifest.class_count) {
        parse_fail(p.entry.line, "class id " + std::to_string(id) + " outside [1, " +
                                     std::to_string(manifest.class_count) + ")");
      }
    }
    manifest.entries.push_back(std::move(p.entry));
  }

  if (check_files) {
    std::vector<std::string> missing;
    auto check = [&](const fs::path& p) {
      if (!fs::exists(p)) missing.push_back(p.string());
    };
    for (const auto& e : manifest.entries) {
      check(e.image);
      for (const auto& h : e.heatmaps) check(h);
      if (e.saliency) check(*e.saliency);
      if (e.ground_truth) check(*e.ground_truth);
    }
    if (!missing.empty()) {
      std::string msg = std::to_string(missing.size()) + " missing file(s):";
      for (const auto& m : missing) msg += "\n  " + m;
      throw Error(ErrorKind::MissingFile, msg);
    }
  }
  return manifest;
}

DatasetManifest load_manifest(const fs::path& path, int class_count_override) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path(),
                        class_count_override);
}

std::string format_manifest(const DatasetManifest& manifest, const fs::path& base_dir) {
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base_dir).generic_string(); };
  std::ostringstream out;
  out << "# classes: " << manifest.class_count << "\n";
  for (const auto& e : manifest.entries) {
    out << rel(e.image) << "|";
    for (std::size_t i = 0; i < e.labels.size(); ++i) out << (i ? "," : "") << e.labels[i];
    out << "|";
    for (std::size_t i = 0; i < e.heatmaps.size(); ++i) out << (i ? "," : "") << rel(e.heatmaps[i]);
    out << "|" << (e.saliency ? rel(*e.saliency) : "-");
    out << "|" << (e.ground_truth ? rel(*e.ground_truth) : "-") << "\n";
  }
  return out.str();
}

}  // namespace mcof
