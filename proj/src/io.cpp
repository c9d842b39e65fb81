#include "superct/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

#include "superct/error.hpp"

namespace superct {

namespace {

constexpr char kGridMagic[9] = "SUPERCTG";

enum class GridKind : std::uint32_t { image = 0, line_integral = 1, counts = 2, weights = 3 };

GridKind grid_kind(SinogramKind k) {
  switch (k) {
    case SinogramKind::line_integral: return GridKind::line_integral;
    case SinogramKind::counts: return GridKind::counts;
    case SinogramKind::weights: return GridKind::weights;
  }
  return GridKind::line_integral;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  return is;
}

void write_grid(const fs::path& path, GridKind kind, int d0, int d1, const std::vector<double>& values) {
  auto os = open_out(path);
  put_magic(os, kGridMagic);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(kind));
  put_u32(os, static_cast<std::uint32_t>(d0));
  put_u32(os, static_cast<std::uint32_t>(d1));
  for (double v : values) put_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

std::vector<double> read_grid(const fs::path& path, GridKind& kind, int& d0, int& d1) {
  auto is = open_in(path);
  expect_magic(is, kGridMagic, path);
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion) throw FormatError("'" + path.string() + "': unsupported version " + std::to_string(version));
  kind = static_cast<GridKind>(get_u32(is));
  d0 = static_cast<int>(get_u32(is));
  d1 = static_cast<int>(get_u32(is));
  if (static_cast<std::uint32_t>(kind) > 3 || d0 < 0 || d1 < 0) throw FormatError("'" + path.string() + "': corrupt header");
  std::vector<double> values(static_cast<std::size_t>(d0) * static_cast<std::size_t>(d1));
  for (auto& v : values) v = get_f32(is);
  if (!is) throw FormatError("'" + path.string() + "': truncated payload");
  return values;
}

std::vector<std::uint8_t> window_pixels(const Image& image, double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("display window must satisfy hi > lo");
  std::vector<std::uint8_t> px(image.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double d = to_display(image.values[i], image.mu_water);
    const double t = std::clamp((d - lo) / (hi - lo), 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
  return px;
}

}  // namespace

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::ostream& os, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  put_u32(os, static_cast<std::uint32_t>(u));
  put_u32(os, static_cast<std::uint32_t>(u >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4] = {0, 0, 0, 0};
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

double get_f64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t hi = get_u32(is);
  return std::bit_cast<double>(lo | (hi << 32));
}

void put_magic(std::ostream& os, const char (&magic)[9]) { os.write(magic, 8); }

void expect_magic(std::istream& is, const char (&magic)[9], const fs::path& path) {
  char buf[8] = {};
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0) throw FormatError("'" + path.string() + "': bad magic");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

json geometry_to_json(const Geometry& g) {
  json j{{"kind", to_string(g.kind)},
         {"n_views", g.n_views},
         {"n_bins", g.n_bins},
         {"image_rows", g.image_rows},
         {"image_cols", g.image_cols},
         {"pixel_size", g.pixel_size},
         {"bin_spacing", g.bin_spacing},
         {"view_angles", g.view_angles}};
  if (g.kind == GeometryKind::fan_arc) {
    j["source_to_iso"] = g.source_to_iso;
    j["source_to_detector"] = g.source_to_detector;
  }
  return j;
}

Geometry geometry_from_json(const json& j) {
  try {
    Geometry g;
    g.kind = geometry_kind_from_string(j.at("kind").get<std::string>());
    g.n_views = j.at("n_views").get<int>();
    g.n_bins = j.at("n_bins").get<int>();
    g.image_rows = j.at("image_rows").get<int>();
    g.image_cols = j.at("image_cols").get<int>();
    g.pixel_size = j.at("pixel_size").get<double>();
    g.bin_spacing = j.at("bin_spacing").get<double>();
    g.view_angles = j.at("view_angles").get<std::vector<double>>();
    if (g.kind == GeometryKind::fan_arc) {
      g.source_to_iso = j.at("source_to_iso").get<double>();
      g.source_to_detector = j.at("source_to_detector").get<double>();
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("geometry record: ") + e.what());
  }
}

fs::path sidecar_path(const fs::path& path) {
  fs::path p = path;
  p += ".json";
  return p;
}

json read_json(const fs::path& path) {
  auto is = open_in(path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

void write_image(const fs::path& path, const Image& image, const json& extra) {
  write_grid(path, GridKind::image, image.rows, image.cols, image.values);
  json side = extra;
  side["type"] = "image";
  side["rows"] = image.rows;
  side["cols"] = image.cols;
  side["mu_water"] = image.mu_water;
  side["units"] = "mm^-1";
  write_json(sidecar_path(path), side);
}

Image read_image(const fs::path& path) {
  GridKind kind;
  int d0, d1;
  auto values = read_grid(path, kind, d0, d1);
  if (kind != GridKind::image) throw FormatError("'" + path.string() + "' is not an image file");
  double mu = kDefaultMuWater;
  if (fs::exists(sidecar_path(path))) mu = read_json(sidecar_path(path)).value("mu_water", kDefaultMuWater);
  return Image(d0, d1, std::move(values), mu);
}

void write_sinogram(const fs::path& path, const Sinogram& sino, const Geometry& geom, const json& extra) {
  write_grid(path, grid_kind(sino.kind), sino.n_views, sino.n_bins, sino.values);
  json side = extra;
  side["type"] = "sinogram";
  side["kind"] = to_string(sino.kind);
  side["geometry"] = geometry_to_json(geom);
  write_json(sidecar_path(path), side);
}

Sinogram read_sinogram(const fs::path& path, Geometry* geom) {
  GridKind kind;
  int d0, d1;
  auto values = read_grid(path, kind, d0, d1);
  if (kind == GridKind::image) throw FormatError("'" + path.string() + "' is an image, not a sinogram");
  Sinogram s;
  s.kind = kind == GridKind::counts ? SinogramKind::counts
           : kind == GridKind::weights ? SinogramKind::weights
                                       : SinogramKind::line_integral;
  s.n_views = d0;
  s.n_bins = d1;
  s.values = std::move(values);
  if (geom) {
    const json side = read_json(sidecar_path(path));
    if (!side.contains("geometry")) throw FormatError("'" + path.string() + "': sidecar has no geometry");
    *geom = geometry_from_json(side["geometry"]);
    if (geom->n_views != d0 || geom->n_bins != d1) throw FormatError("'" + path.string() + "': sidecar geometry disagrees with payload");
  }
  return s;
}

void write_pgm(const fs::path& path, const Image& image, double lo, double hi) {
  const auto px = window_pixels(image, lo, hi);
  auto os = open_out(path);
  os << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void write_png(const fs::path& path, const Image& image, double lo, double hi) {
  write_png_gray(path, image.rows, image.cols, window_pixels(image, lo, hi));
}

void write_png_gray(const fs::path& path, int rows, int cols, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(rows) * cols) throw DimensionError("png pixel count mismatch");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw FormatError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FormatError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * cols));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace superct
