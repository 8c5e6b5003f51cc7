#pragma once

#include "primht/core.hpp"

#include <array>
#include <filesystem>

namespace primht {

/// Read a whitespace-separated ASCII cloud: "x y z" or "x y z nx ny nz" per
/// line.  Lines starting with '#' and blank lines are skipped.
PointCloud read_xyz(const std::filesystem::path& path);

/// Write ASCII XYZ ("x y z" or with normals when present).
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

/// Read a PLY file (ascii or binary_little_endian).  Vertex properties
/// x/y/z are required; nx/ny/nz are picked up when present; everything else
/// (extra properties, faces, ...) is skipped.
PointCloud read_ply(const std::filesystem::path& path);

/// Write an ASCII PLY with per-vertex uchar red/green/blue.
void write_ply_colored(const std::filesystem::path& path, const PointCloud& cloud,
                       const std::vector<std::array<std::uint8_t, 3>>& colors);

/// Read either format based on the file extension (.ply vs anything else).
PointCloud read_cloud(const std::filesystem::path& path);

/// Deterministic segment palette: distinct saturated colours per label,
/// black for label -1.
std::array<std::uint8_t, 3> segment_color(long label);

}  // namespace primht
