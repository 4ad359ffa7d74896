#pragma once

#include <refmap/envmap.hpp>
#include <refmap/normal_map.hpp>
#include <refmap/reflectance_map.hpp>

#include <filesystem>

namespace refmap::io {

/// PFM: "PF\n<W> <H>\n<scale>\n" followed by H rows of W RGB float32 triples, bottom row
/// first; negative scale means little-endian. "Pf" grayscale files are expanded to RGB.
HdrImage read_pfm(const std::filesystem::path& path);
/// Writes little-endian ("-1.0") PFM.
void write_pfm(const std::filesystem::path& path, const HdrImage& image);

/// Radiance RGBE. Reads flat and new-style RLE scanlines; writes flat scanlines.
HdrImage read_rgbe(const std::filesystem::path& path);
void write_rgbe(const std::filesystem::path& path, const HdrImage& image);

/// Reads .pfm or .hdr (detected from the magic bytes) and validates the radiance.
EnvironmentMap load_hdr(const std::filesystem::path& path);
void save_pfm(const std::filesystem::path& path, const EnvironmentMap& env);
void save_hdr(const std::filesystem::path& path, const EnvironmentMap& env);

void write_png(const std::filesystem::path& path, const LdrImage& image);
void write_mask_png(const std::filesystem::path& path, const Mask& mask, int height, int width);
Mask read_mask_png(const std::filesystem::path& path, int height, int width);

/// Reflectance maps are stored as <stem>.pfm (radiance) and <stem>_mask.png.
void save_reflectance_map(const std::filesystem::path& stem, const ReflectanceMap& map);
ReflectanceMap load_reflectance_map(const std::filesystem::path& stem);

/// Normal maps are 3-channel PFM with components stored directly; zero vectors are background.
NormalMap load_normal_map(const std::filesystem::path& path);
void save_normal_map(const std::filesystem::path& path, const NormalMap& normals);

} // namespace refmap::io
