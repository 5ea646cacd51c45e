#include "pgx/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "pgx/io_util.hpp"

namespace pgx {

VoxelSpacing::VoxelSpacing(double dx, double dy, double dz) : dx_(dx), dy_(dy), dz_(dz) {
  if (!(dx > 0.0 && dy > 0.0 && dz > 0.0) || !std::isfinite(dx) || !std::isfinite(dy) ||
      !std::isfinite(dz)) {
    throw InvalidArgument("voxel spacing must be finite and strictly positive");
  }
}

double voxel_volume_cc(const VoxelSpacing& spacing) {
  return spacing.dx() * spacing.dy() * spacing.dz() / 1000.0;
}

// --- AffineTransform -------------------------------------------------------

AffineTransform::AffineTransform() : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

AffineTransform::AffineTransform(const Matrix& row_major) : m_(row_major) {
  for (double v : m_) {
    if (!std::isfinite(v)) throw InvalidArgument("affine contains non-finite entries");
  }
  if (m_[12] != 0.0 || m_[13] != 0.0 || m_[14] != 0.0 || m_[15] != 1.0) {
    throw InvalidArgument("affine last row must be (0, 0, 0, 1)");
  }
  if (std::abs(linear_determinant()) < 1e-12) throw InvalidArgument("affine is singular");
}

AffineTransform AffineTransform::diagonal(const VoxelSpacing& s) {
  return AffineTransform(Matrix{s.dx(), 0, 0, 0, 0, s.dy(), 0, 0, 0, 0, s.dz(), 0, 0, 0, 0, 1});
}

AffineTransform AffineTransform::translation(double tx, double ty, double tz) {
  return AffineTransform(Matrix{1, 0, 0, tx, 0, 1, 0, ty, 0, 0, 1, tz, 0, 0, 0, 1});
}

Vec3 AffineTransform::apply(const Vec3& p) const {
  return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3],
          m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
          m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
}

double AffineTransform::linear_determinant() const {
  const auto& a = m_;
  return a[0] * (a[5] * a[10] - a[6] * a[9]) - a[1] * (a[4] * a[10] - a[6] * a[8]) +
         a[2] * (a[4] * a[9] - a[5] * a[8]);
}

AffineTransform AffineTransform::inverse() const {
  const auto& a = m_;
  const double det = linear_determinant();
  Matrix r{};
  // adjugate of the 3x3 block
  r[0] = (a[5] * a[10] - a[6] * a[9]) / det;
  r[1] = (a[2] * a[9] - a[1] * a[10]) / det;
  r[2] = (a[1] * a[6] - a[2] * a[5]) / det;
  r[4] = (a[6] * a[8] - a[4] * a[10]) / det;
  r[5] = (a[0] * a[10] - a[2] * a[8]) / det;
  r[6] = (a[2] * a[4] - a[0] * a[6]) / det;
  r[8] = (a[4] * a[9] - a[5] * a[8]) / det;
  r[9] = (a[1] * a[8] - a[0] * a[9]) / det;
  r[10] = (a[0] * a[5] - a[1] * a[4]) / det;
  for (int row = 0; row < 3; ++row) {
    const auto b = static_cast<std::size_t>(row * 4);
    r[b + 3] = -(r[b] * a[3] + r[b + 1] * a[7] + r[b + 2] * a[11]);
  }
  r[15] = 1.0;
  return AffineTransform(r);
}

AffineTransform AffineTransform::compose(const AffineTransform& other) const {
  Matrix r{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += (*this)(i, k) * other(k, j);
      r[static_cast<std::size_t>(i * 4 + j)] = s;
    }
  }
  r[12] = r[13] = r[14] = 0.0;
  r[15] = 1.0;
  return AffineTransform(r);
}

double AffineTransform::column_norm(int c) const {
  const double a = (*this)(0, c), b = (*this)(1, c), d = (*this)(2, c);
  return std::sqrt(a * a + b * b + d * d);
}

// --- GridGeometry / LabelVolume ----------------------------------------------

void GridGeometry::validate() const {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw InvalidArgument("volume dims must be positive, got " + describe());
  }
  const double s[3] = {spacing.dx(), spacing.dy(), spacing.dz()};
  for (int c = 0; c < 3; ++c) {
    if (std::abs(affine.column_norm(c) - s[c]) > 1e-3) {
      throw InvalidArgument("spacing inconsistent with affine column norms");
    }
  }
}

bool GridGeometry::same_grid(const GridGeometry& other, double tol) const {
  if (!(dims == other.dims)) return false;
  if (std::abs(spacing.dx() - other.spacing.dx()) > tol ||
      std::abs(spacing.dy() - other.spacing.dy()) > tol ||
      std::abs(spacing.dz() - other.spacing.dz()) > tol) {
    return false;
  }
  for (std::size_t i = 0; i < 16; ++i) {
    if (std::abs(affine.matrix()[i] - other.affine.matrix()[i]) > tol) return false;
  }
  return true;
}

std::string GridGeometry::describe() const {
  std::ostringstream os;
  os << dims.nx << "x" << dims.ny << "x" << dims.nz << " @ (" << spacing.dx() << ", "
     << spacing.dy() << ", " << spacing.dz() << ") mm";
  return os.str();
}

LabelVolume::LabelVolume(GridGeometry geometry, std::vector<std::uint16_t> voxels)
    : geom_(std::move(geometry)), voxels_(std::move(voxels)) {
  geom_.validate();
  if (voxels_.size() != geom_.dims.count()) {
    throw InvalidArgument("voxel count does not match dims");
  }
}

LabelVolume::LabelVolume(Dims dims, VoxelSpacing spacing)
    : LabelVolume(GridGeometry{dims, spacing, AffineTransform::diagonal(spacing)},
                  std::vector<std::uint16_t>(dims.nx > 0 && dims.ny > 0 && dims.nz > 0 ? dims.count() : 0)) {}

std::uint16_t LabelVolume::max_label() const {
  return voxels_.empty() ? 0 : *std::max_element(voxels_.begin(), voxels_.end());
}

std::size_t LabelVolume::nonzero_count() const {
  return static_cast<std::size_t>(
      std::count_if(voxels_.begin(), voxels_.end(), [](std::uint16_t v) { return v != 0; }));
}

// --- NIfTI-1 -----------------------------------------------------------------

namespace {

// Header field offsets.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T v) {
  auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
  std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

class HeaderReader {
 public:
  HeaderReader(std::span<const std::byte> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T read(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  std::span<const std::byte> bytes_;
  bool swap_;
};

class HeaderWriter {
 public:
  explicit HeaderWriter(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
  void write(std::size_t offset, T v) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
    std::memcpy(out_.data() + offset, &v, sizeof(T));
  }

 private:
  std::vector<std::byte>& out_;
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case nifti::kUint8: return 1;
    case nifti::kInt16: return 2;
    case nifti::kInt32: return 4;
    default: return 0;
  }
}

}  // namespace

LabelVolume parse_nifti(std::span<const std::byte> bytes) {
  if (bytes.size() < static_cast<std::size_t>(nifti::kHeaderSize)) {
    throw NiftiError("truncated header: " + std::to_string(bytes.size()) + " bytes");
  }
  // Byte order is detected from sizeof_hdr; `swap` means file order differs from host order.
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != nifti::kHeaderSize) {
    if (byteswap_value(sizeof_hdr) != nifti::kHeaderSize) {
      throw NiftiError("sizeof_hdr is not 348 in either byte order");
    }
    swap = true;
  }
  const HeaderReader h(bytes, swap);

  const auto* magic = reinterpret_cast<const char*>(bytes.data() + kOffMagic);
  if (!((std::memcmp(magic, "n+1", 4) == 0) || (std::memcmp(magic, "ni1", 4) == 0))) {
    throw NiftiError("bad magic");
  }

  const auto ndim = h.read<std::int16_t>(kOffDim);
  if (ndim != 3) throw NiftiError("dim[0] must be 3, got " + std::to_string(ndim));
  Dims dims{h.read<std::int16_t>(kOffDim + 2), h.read<std::int16_t>(kOffDim + 4),
            h.read<std::int16_t>(kOffDim + 6)};
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) throw NiftiError("non-positive dim entries");

  const auto datatype = h.read<std::int16_t>(kOffDatatype);
  const int bpv = bytes_per_voxel(datatype);
  if (bpv == 0) throw NiftiError("unsupported datatype " + std::to_string(datatype));
  const auto bitpix = h.read<std::int16_t>(kOffBitpix);
  if (bitpix != bpv * 8) throw NiftiError("bitpix does not match datatype");

  const double dx = std::abs(static_cast<double>(h.read<float>(kOffPixdim + 4)));
  const double dy = std::abs(static_cast<double>(h.read<float>(kOffPixdim + 8)));
  const double dz = std::abs(static_cast<double>(h.read<float>(kOffPixdim + 12)));
  if (!(dx > 0 && dy > 0 && dz > 0)) throw NiftiError("pixdim[1..3] must be non-zero");
  const VoxelSpacing spacing(dx, dy, dz);

  AffineTransform affine = AffineTransform::diagonal(spacing);
  if (h.read<std::int16_t>(kOffSformCode) > 0) {
    AffineTransform::Matrix m{};
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        m[r * 4 + c] = static_cast<double>(h.read<float>(kOffSrowX + r * 16 + c * 4));
      }
    }
    m[15] = 1.0;
    try {
      affine = AffineTransform(m);
    } catch (const InvalidArgument& e) {
      throw NiftiError(std::string("invalid sform: ") + e.what());
    }
  }

  const float vox_offset_f = h.read<float>(kOffVoxOffset);
  if (!(vox_offset_f >= 0.0f) || vox_offset_f != std::floor(vox_offset_f)) {
    throw NiftiError("invalid vox_offset");
  }
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);
  const std::size_t count = dims.count();
  if (vox_offset < static_cast<std::size_t>(nifti::kHeaderSize) ||
      bytes.size() < vox_offset + count * static_cast<std::size_t>(bpv)) {
    throw NiftiError("truncated payload");
  }

  std::vector<std::uint16_t> voxels(count);
  const HeaderReader payload(bytes.subspan(vox_offset), swap);
  for (std::size_t i = 0; i < count; ++i) {
    std::int64_t v = 0;
    switch (datatype) {
      case nifti::kUint8: v = std::to_integer<std::uint8_t>(bytes[vox_offset + i]); break;
      case nifti::kInt16: v = payload.read<std::int16_t>(i * 2); break;
      default: v = payload.read<std::int32_t>(i * 4); break;
    }
    if (v < 0 || v > 65535) throw NiftiError("label value out of range: " + std::to_string(v));
    voxels[i] = static_cast<std::uint16_t>(v);
  }
  try {
    return LabelVolume(GridGeometry{dims, spacing, affine}, std::move(voxels));
  } catch (const InvalidArgument& e) {
    throw NiftiError(e.what());
  }
}

std::vector<std::byte> write_nifti(const LabelVolume& vol) {
  const std::uint16_t max_label = vol.max_label();
  const std::int16_t datatype = max_label <= 255     ? nifti::kUint8
                                : max_label <= 32767 ? nifti::kInt16
                                                     : nifti::kInt32;
  const int bpv = bytes_per_voxel(datatype);
  const auto& d = vol.dims();
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) throw NiftiError("dims exceed NIfTI-1 range");

  std::vector<std::byte> out(static_cast<std::size_t>(nifti::kVoxOffset) +
                             vol.voxels().size() * static_cast<std::size_t>(bpv));
  HeaderWriter w(out);
  w.write<std::int32_t>(0, nifti::kHeaderSize);
  w.write<std::int16_t>(kOffDim, 3);
  w.write<std::int16_t>(kOffDim + 2, static_cast<std::int16_t>(d.nx));
  w.write<std::int16_t>(kOffDim + 4, static_cast<std::int16_t>(d.ny));
  w.write<std::int16_t>(kOffDim + 6, static_cast<std::int16_t>(d.nz));
  for (std::size_t i = 4; i < 8; ++i) w.write<std::int16_t>(kOffDim + 2 * i, 1);
  w.write<std::int16_t>(kOffDatatype, datatype);
  w.write<std::int16_t>(kOffBitpix, static_cast<std::int16_t>(bpv * 8));
  w.write<float>(kOffPixdim, 1.0f);
  w.write<float>(kOffPixdim + 4, static_cast<float>(vol.spacing().dx()));
  w.write<float>(kOffPixdim + 8, static_cast<float>(vol.spacing().dy()));
  w.write<float>(kOffPixdim + 12, static_cast<float>(vol.spacing().dz()));
  w.write<float>(kOffVoxOffset, static_cast<float>(nifti::kVoxOffset));
  w.write<float>(kOffSclSlope, 1.0f);
  out[kOffXyztUnits] = std::byte{2};  // NIFTI_UNITS_MM
  w.write<std::int16_t>(kOffSformCode, 1);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      w.write<float>(kOffSrowX + r * 16 + c * 4,
                     static_cast<float>(vol.affine()(static_cast<int>(r), static_cast<int>(c))));
    }
  }
  std::memcpy(out.data() + kOffMagic, "n+1", 4);

  const auto voxels = vol.voxels();
  const std::size_t base = static_cast<std::size_t>(nifti::kVoxOffset);
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    switch (datatype) {
      case nifti::kUint8: out[base + i] = static_cast<std::byte>(voxels[i]); break;
      case nifti::kInt16: w.write<std::int16_t>(base + 2 * i, static_cast<std::int16_t>(voxels[i])); break;
      default: w.write<std::int32_t>(base + 4 * i, static_cast<std::int32_t>(voxels[i])); break;
    }
  }
  return out;
}

LabelVolume read_nifti_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_nifti(bytes);
  } catch (const NiftiError& e) {
    throw NiftiError(path.string() + ": " + e.what());
  }
}

void write_nifti_file(const std::filesystem::path& path, const LabelVolume& vol) {
  write_file_atomic(path, write_nifti(vol));
}

}  // namespace pgx
