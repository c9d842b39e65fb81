#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "superct/geometry.hpp"
#include "superct/image.hpp"

namespace superct {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::uint32_t kFormatVersion = 1;

json geometry_to_json(const Geometry& geom);
Geometry geometry_from_json(const json& j);

/// Path of the structured-text sidecar for a binary file.
fs::path sidecar_path(const fs::path& path);

/// Binary grid file: 8-byte magic, u32 version, u32 kind, u32 dim0, u32 dim1,
/// then dim0*dim1 little-endian f32 values. A JSON sidecar carries metadata.
void write_image(const fs::path& path, const Image& image, const json& extra = json::object());
Image read_image(const fs::path& path);

void write_sinogram(const fs::path& path, const Sinogram& sino, const Geometry& geom,
                    const json& extra = json::object());
/// Geometry comes from the sidecar.
Sinogram read_sinogram(const fs::path& path, Geometry* geom = nullptr);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

/// Grayscale export with a display window in shifted HU (water = 1000).
void write_pgm(const fs::path& path, const Image& image, double lo = 800.0, double hi = 1200.0);
void write_png(const fs::path& path, const Image& image, double lo = 800.0, double hi = 1200.0);
/// Raw 8-bit PNG of already-windowed values in [0, 255].
void write_png_gray(const fs::path& path, int rows, int cols, const std::vector<std::uint8_t>& pixels);

/// Little-endian helpers shared by the other binary formats.
void put_u32(std::ostream& os, std::uint32_t v);
void put_f32(std::ostream& os, float v);
void put_f64(std::ostream& os, double v);
std::uint32_t get_u32(std::istream& is);
float get_f32(std::istream& is);
double get_f64(std::istream& is);
void put_magic(std::ostream& os, const char (&magic)[9]);
void expect_magic(std::istream& is, const char (&magic)[9], const fs::path& path);

/// FNV-1a over bytes, for config hashes in run manifests.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace superct
