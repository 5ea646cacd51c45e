#pragma once

// Label volumes and a NIfTI-1 (single file, uncompressed) subset reader/writer.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgx {

/// Raised for malformed or unsupported NIfTI input.
class NiftiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a domain object is constructed with values breaking its invariants.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend constexpr bool operator==(const Index3&, const Index3&) = default;
  friend constexpr auto operator<=>(const Index3& a, const Index3& b) {
    // z-major so that ordering matches the x-fastest storage order
    if (auto c = a.z <=> b.z; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Millimetres per voxel along each grid axis.
class VoxelSpacing {
 public:
  VoxelSpacing(double dx, double dy, double dz);

  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double dz() const { return dz_; }

  VoxelSpacing scaled(double factor) const { return {dx_ * factor, dy_ * factor, dz_ * factor}; }

  friend bool operator==(const VoxelSpacing&, const VoxelSpacing&) = default;

 private:
  double dx_;
  double dy_;
  double dz_;
};

/// Volume of one voxel in cubic centimetres.
double voxel_volume_cc(const VoxelSpacing& spacing);

/// Homogeneous 4x4 transform with the last row fixed to (0,0,0,1), stored row-major.
class AffineTransform {
 public:
  using Matrix = std::array<double, 16>;

  AffineTransform();  // identity
  /// Throws InvalidArgument if the last row is not (0,0,0,1) or the linear part is singular.
  explicit AffineTransform(const Matrix& row_major);

  static AffineTransform identity() { return {}; }
  static AffineTransform diagonal(const VoxelSpacing& spacing);
  static AffineTransform translation(double tx, double ty, double tz);

  const Matrix& matrix() const { return m_; }
  double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row * 4 + col)]; }

  Vec3 apply(const Vec3& p) const;
  AffineTransform inverse() const;
  /// Returns this ∘ other (other applied first).
  AffineTransform compose(const AffineTransform& other) const;
  /// Euclidean norm of column c of the linear part.
  double column_norm(int c) const;
  double linear_determinant() const;

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;

 private:
  Matrix m_;
};

struct Dims {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t nz = 0;

  std::size_t count() const { return static_cast<std::size_t>(nx * ny * nz); }
  bool contains(const Index3& i) const {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < nx && i.y < ny && i.z < nz;
  }
  std::size_t linear(const Index3& i) const {
    return static_cast<std::size_t>((i.z * ny + i.y) * nx + i.x);
  }
  Index3 index(std::size_t linear_index) const {
    const auto l = static_cast<std::int64_t>(linear_index);
    return {l % nx, (l / nx) % ny, l / (nx * ny)};
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dimensions, spacing and voxel-to-world affine of a grid.
struct GridGeometry {
  Dims dims;
  VoxelSpacing spacing{1.0, 1.0, 1.0};
  AffineTransform affine;

  /// Throws InvalidArgument on non-positive dims or spacing inconsistent with the affine.
  void validate() const;
  /// True when dims match exactly and spacing/affine agree within `tol`.
  bool same_grid(const GridGeometry& other, double tol = 1e-6) const;
  std::string describe() const;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Immutable 3D grid of 16-bit labels (0 = background), x-fastest.
class LabelVolume {
 public:
  LabelVolume(GridGeometry geometry, std::vector<std::uint16_t> voxels);
  /// All-background volume; affine defaults to diagonal(spacing).
  LabelVolume(Dims dims, VoxelSpacing spacing);

  const GridGeometry& geometry() const { return geom_; }
  const Dims& dims() const { return geom_.dims; }
  const VoxelSpacing& spacing() const { return geom_.spacing; }
  const AffineTransform& affine() const { return geom_.affine; }
  std::span<const std::uint16_t> voxels() const { return voxels_; }

  std::uint16_t at(const Index3& i) const { return voxels_[geom_.dims.linear(i)]; }
  std::uint16_t max_label() const;
  std::size_t nonzero_count() const;

  friend bool operator==(const LabelVolume&, const LabelVolume&) = default;

 private:
  GridGeometry geom_;
  std::vector<std::uint16_t> voxels_;
};

LabelVolume parse_nifti(std::span<const std::byte> bytes);
/// Little-endian, vox_offset 352, sform from the affine, no extensions.
std::vector<std::byte> write_nifti(const LabelVolume& vol);

LabelVolume read_nifti_file(const std::filesystem::path& path);
void write_nifti_file(const std::filesystem::path& path, const LabelVolume& vol);

namespace nifti {
inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr std::int32_t kVoxOffset = 352;
inline constexpr std::int16_t kUint8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kInt32 = 8;
}  // namespace nifti

}  // namespace pgx
