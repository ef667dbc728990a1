#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "layerfuse/metrics.hpp"

namespace layerfuse {

using Point3f = Eigen::Vector3f;

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// PLY with a single `vertex` element of float x, y, z.
void write_ply(const std::vector<Point3f>& points, const std::filesystem::path& path, PlyFormat format);

/// Reads ascii or binary_little_endian PLY; keeps x, y, z of the vertex element
/// and skips other scalar properties. Throws DataError on malformed files.
std::vector<Point3f> read_ply(const std::filesystem::path& path);

/// TUM lines `timestamp tx ty tz qx qy qz qw`: timestamp with 9 decimals, the rest
/// with 9 significant digits, quaternion normalized with w >= 0 (z >= 0 when w = 0).
void write_tum(const Trajectory& traj, const std::filesystem::path& path);
std::string format_tum_line(const TimedPose& p);
Trajectory read_tum(const std::filesystem::path& path);

/// Unit quaternion (x, y, z, w) of a rotation with the sign convention above.
Eigen::Vector4d canonical_quaternion(const Mat3& r);

/// One centroid per occupied voxel, ordered by voxel coordinate. voxel <= 0 returns
/// the input unchanged.
std::vector<Point3f> voxel_downsample(const std::vector<Point3f>& points, double voxel);

}  // namespace layerfuse
