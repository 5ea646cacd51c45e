#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "pgx/io_util.hpp"
#include "pgx/volume_io.hpp"

using namespace pgx;

namespace {

// Hand-assembled header following the public NIfTI-1 layout.
struct RawHeader {
  std::vector<std::byte> bytes = std::vector<std::byte>(352);
  bool big = false;

  template <typename T>
  void put(std::size_t off, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes[off + i] = static_cast<std::byte>(big ? b[sizeof(T) - 1 - i] : b[i]);
    }
  }
};

std::vector<std::byte> minimal_file(bool big_endian, const char* magic = "n+1") {
  RawHeader h;
  h.big = big_endian;
  h.put<std::int32_t>(0, 348);
  const std::int16_t dim[8] = {3, 2, 2, 2, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) h.put<std::int16_t>(40 + 2 * i, dim[i]);
  h.put<std::int16_t>(70, 2);
  h.put<std::int16_t>(72, 8);
  const float pixdim[8] = {1, 0.5f, 0.5f, 0.5f, 0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) h.put<float>(76 + 4 * i, pixdim[i]);
  h.put<float>(108, 352.0f);
  h.put<float>(112, 1.0f);
  std::memcpy(h.bytes.data() + 344, magic, 4);
  for (int i = 0; i < 8; ++i) h.bytes.push_back(static_cast<std::byte>(i % 3));
  return h.bytes;
}

LabelVolume random_volume(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 9);
  Dims d{dim(rng), dim(rng), dim(rng)};
  std::uniform_real_distribution<double> sp(0.2, 3.0);
  VoxelSpacing spacing(sp(rng), sp(rng), sp(rng));
  std::uniform_int_distribution<int> range_pick(0, 2);
  const int maxes[] = {255, 32767, 65535};
  std::uniform_int_distribution<int> label(0, maxes[range_pick(rng)]);
  std::vector<std::uint16_t> v(d.count());
  for (auto& x : v) x = static_cast<std::uint16_t>(label(rng));
  auto m = AffineTransform::diagonal(spacing).matrix();
  m[3] = static_cast<float>(sp(rng) * 10);
  m[7] = static_cast<float>(-sp(rng) * 10);
  return LabelVolume(GridGeometry{d, spacing, AffineTransform(m)}, std::move(v));
}

}  // namespace

TEST_CASE("minimal little-endian file parses") {
  const auto bytes = minimal_file(false);
  const LabelVolume v = parse_nifti(bytes);
  CHECK(v.dims() == Dims{2, 2, 2});
  CHECK(v.spacing() == VoxelSpacing(0.5, 0.5, 0.5));
  CHECK(v.at({1, 0, 0}) == 1);
  CHECK(v.at({1, 1, 1}) == 1);
  CHECK(v.affine() == AffineTransform::diagonal(VoxelSpacing(0.5, 0.5, 0.5)));
}

TEST_CASE("byte-swapped file parses identically") {
  CHECK(parse_nifti(minimal_file(true)) == parse_nifti(minimal_file(false)));
}

TEST_CASE("rejects bad magic, datatype, truncation") {
  CHECK_THROWS_WITH_AS(parse_nifti(minimal_file(false, "XXX")), "bad magic", NiftiError);
  auto bytes = minimal_file(false);
  bytes.resize(355);
  CHECK_THROWS_AS(parse_nifti(bytes), NiftiError);
  bytes = minimal_file(false);
  bytes[70] = std::byte{16};  // float32
  CHECK_THROWS_AS(parse_nifti(bytes), NiftiError);
  CHECK_THROWS_AS(parse_nifti(std::span<const std::byte>(bytes.data(), 100)), NiftiError);
}

TEST_CASE("writer round-trip is byte-identical") {
  const auto bytes = minimal_file(false);
  const LabelVolume v = parse_nifti(bytes);
  const auto out = write_nifti(v);
  CHECK(parse_nifti(out) == v);
  CHECK(write_nifti(parse_nifti(out)) == out);
}

TEST_CASE("writer datatype follows max label") {
  auto datatype = [](std::uint16_t label) {
    std::vector<std::uint16_t> vox(8, 0);
    vox[3] = label;
    const auto bytes = write_nifti(LabelVolume(GridGeometry{{2, 2, 2}, {1, 1, 1}, {}}, vox));
    std::int16_t dt;
    std::memcpy(&dt, bytes.data() + 70, 2);
    return dt;
  };
  CHECK(datatype(255) == 2);
  CHECK(datatype(300) == 4);
  CHECK(datatype(32767) == 4);
  CHECK(datatype(40000) == 8);
}

TEST_CASE("random volumes round-trip") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const LabelVolume v = random_volume(rng);
    const LabelVolume back = parse_nifti(write_nifti(v));
    CHECK(back.dims() == v.dims());
    CHECK(back.geometry().same_grid(v.geometry()));
    CHECK(std::equal(back.voxels().begin(), back.voxels().end(), v.voxels().begin()));
  }
}

TEST_CASE("voxel volume") {
  CHECK(voxel_volume_cc({0.39, 0.39, 0.75}) == doctest::Approx(1.14075e-4).epsilon(1e-12));
  CHECK(voxel_volume_cc({1, 1, 1}) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(voxel_volume_cc({0.32, 0.32, 0.5}) == doctest::Approx(5.12e-5).epsilon(1e-12));
  CHECK(voxel_volume_cc({0.78, 0.39, 0.75}) == doctest::Approx(2 * 1.14075e-4).epsilon(1e-12));
}

TEST_CASE("construction invariants") {
  CHECK_THROWS_AS(VoxelSpacing(0, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(LabelVolume(Dims{0, 2, 2}, VoxelSpacing(1, 1, 1)), InvalidArgument);
  CHECK_THROWS_AS(LabelVolume(GridGeometry{{2, 2, 2}, {1, 1, 1}, {}}, std::vector<std::uint16_t>(7)),
                  InvalidArgument);
  // spacing disagrees with the affine column norms
  CHECK_THROWS_AS(LabelVolume(GridGeometry{{2, 2, 2}, {2, 1, 1}, {}}, std::vector<std::uint16_t>(8)),
                  InvalidArgument);
  AffineTransform::Matrix singular{};
  singular[15] = 1;
  CHECK_THROWS_AS(AffineTransform{singular}, InvalidArgument);
}

TEST_CASE("affine inverse and compose") {
  AffineTransform::Matrix m{0, -2, 0, 5, 1.5, 0, 0, -3, 0, 0, 0.75, 1, 0, 0, 0, 1};
  const AffineTransform a(m);
  const AffineTransform id = a.compose(a.inverse());
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(id(r, c) == doctest::Approx(r == c ? 1.0 : 0.0));
  const Vec3 p = a.apply({1, 2, 3});
  CHECK(p.x == doctest::Approx(1.0));
  CHECK(p.y == doctest::Approx(-1.5));
  CHECK(p.z == doctest::Approx(3.25));
  CHECK(a.column_norm(0) == doctest::Approx(1.5));
}

TEST_CASE("file round-trip through disk") {
  const auto dir = std::filesystem::temp_directory_path() / "pgx_volume_io_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(3);
  const LabelVolume v = random_volume(rng);
  write_nifti_file(dir / "a.nii", v);
  CHECK(read_nifti_file(dir / "a.nii").geometry().same_grid(v.geometry()));
  CHECK_THROWS_AS(read_nifti_file(dir / "missing.nii"), std::exception);
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(95.05) == "95.05");
  CHECK(format_double(2.0) == "2");
}
