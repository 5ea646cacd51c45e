#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pgx/morphology.hpp"

using namespace pgx;

namespace {

LabelVolume volume_with(Dims d, VoxelSpacing sp, const std::vector<Index3>& on) {
  std::vector<std::uint16_t> v(d.count(), 0);
  for (const auto& i : on) v[d.linear(i)] = 1;
  return LabelVolume(GridGeometry{d, sp, AffineTransform::diagonal(sp)}, std::move(v));
}

std::vector<Index3> box(Index3 lo, Index3 hi) {
  std::vector<Index3> out;
  for (auto z = lo.z; z <= hi.z; ++z)
    for (auto y = lo.y; y <= hi.y; ++y)
      for (auto x = lo.x; x <= hi.x; ++x) out.push_back({x, y, z});
  return out;
}

}  // namespace

TEST_CASE("components by connectivity") {
  const auto vol = volume_with({4, 4, 4}, {1, 1, 1}, {{0, 0, 0}, {1, 1, 1}});
  CHECK(connected_components(vol, Connectivity::TwentySix).size() == 1);
  CHECK(connected_components(vol, Connectivity::Six).size() == 2);
  const auto edge = volume_with({4, 4, 4}, {1, 1, 1}, {{0, 0, 0}, {1, 1, 0}});
  CHECK(connected_components(edge, Connectivity::Eighteen).size() == 1);
  CHECK(connected_components(edge, Connectivity::Six).size() == 2);
  CHECK(connected_components(LabelVolume(Dims{3, 3, 3}, VoxelSpacing{1, 1, 1})).empty());
  CHECK_THROWS_AS(connectivity_from_int(8), InvalidArgument);
}

TEST_CASE("components sorted by size with ids 1..k") {
  auto on = box({0, 0, 0}, {1, 0, 0});
  for (auto v : box({4, 4, 4}, {6, 6, 4})) on.push_back(v);
  on.push_back({0, 6, 6});
  const auto comps = connected_components(volume_with({8, 8, 8}, {0.5, 0.5, 1}, on));
  REQUIRE(comps.size() == 3);
  CHECK(comps[0].voxel_count() == 9);
  CHECK(comps[1].voxel_count() == 2);
  CHECK(comps[2].voxel_count() == 1);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    CHECK(comps[i].id == static_cast<int>(i + 1));
    CHECK(comps[i].volume_cc ==
          doctest::Approx(static_cast<double>(comps[i].voxel_count()) * 0.25e-3).epsilon(1e-12));
  }
}

TEST_CASE("components match flood-fill oracle on random volumes") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d{7, 6, 5};
    const auto blob = oracle::random_blob(rng, d, 6);
    for (int conn : {6, 18, 26}) {
      const auto comps = connected_components(volume_with(d, {1, 1, 1}, blob), connectivity_from_int(conn));
      auto expected = oracle::components({blob.begin(), blob.end()}, conn);
      std::set<std::set<Index3>> got;
      std::size_t total = 0;
      for (const auto& c : comps) {
        got.emplace(c.voxels.begin(), c.voxels.end());
        total += c.voxel_count();
      }
      CHECK(got == std::set<std::set<Index3>>(expected.begin(), expected.end()));
      CHECK(total == blob.size());
      for (std::size_t i = 1; i < comps.size(); ++i) CHECK(comps[i - 1].voxel_count() >= comps[i].voxel_count());
    }
  }
}

TEST_CASE("volume threshold at the median clinical spacing") {
  const VoxelSpacing sp(0.39, 0.39, 0.75);
  auto make = [&](std::size_t n) {
    std::vector<Index3> on;
    for (std::size_t i = 0; i < n; ++i) on.push_back({static_cast<std::int64_t>(i % 40), static_cast<std::int64_t>(i / 40), 0});
    return connected_components(volume_with({40, 40, 1}, sp, on));
  };
  const auto small = make(876);
  const auto large = make(877);
  CHECK(small[0].volume_cc == doctest::Approx(876 * 1.14075e-4).epsilon(1e-12));
  CHECK(large[0].volume_cc == doctest::Approx(877 * 1.14075e-4).epsilon(1e-12));
  CHECK(filter_components(small, 0.1).discarded.size() == 1);
  CHECK(filter_components(large, 0.1).kept.size() == 1);
  CHECK(filter_components(small, 0.0).kept.size() == 1);
}

TEST_CASE("centroid rounding") {
  CHECK(centroid_index(std::vector<Index3>{{0, 0, 0}, {2, 0, 0}}) == Index3{1, 0, 0});
  CHECK(centroid_index(std::vector<Index3>{{0, 0, 0}, {1, 0, 0}}) == Index3{1, 0, 0});
  // C shape: the mean falls in the opening
  std::vector<Index3> c;
  for (std::int64_t y = 0; y < 5; ++y) c.push_back({0, y, 0});
  for (std::int64_t x = 1; x < 5; ++x) {
    c.push_back({x, 0, 0});
    c.push_back({x, 4, 0});
  }
  normalize(c);
  const Index3 m = centroid_index(c);
  CHECK_FALSE(std::binary_search(c.begin(), c.end(), m));
}

TEST_CASE("surface voxels") {
  const Dims d{5, 5, 5};
  CHECK(surface_voxels(std::vector<Index3>{{2, 2, 2}}, d).size() == 1);
  const auto cube = box({1, 1, 1}, {3, 3, 3});
  const auto s = surface_voxels(cube, d);
  CHECK(s.size() == 26);
  CHECK_FALSE(std::binary_search(s.begin(), s.end(), Index3{2, 2, 2}));
  const auto slab = box({0, 0, 2}, {4, 4, 2});
  CHECK(surface_voxels(slab, d).size() == slab.size());
  // grid border counts as outside
  const auto full = box({0, 0, 0}, {4, 4, 4});
  CHECK(surface_voxels(full, d).size() == 125 - 27);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    auto blob = oracle::random_blob(rng, d, 4);
    CHECK(surface_voxels(blob, d) == oracle::surface(blob, d));
  }
}

TEST_CASE("nearest-neighbour resampling") {
  const VoxelSpacing sp(0.5, 1, 1);
  const Dims d{6, 3, 3};
  const auto moving = volume_with(d, sp, box({0, 0, 0}, {5, 2, 2}));
  const GridGeometry& ref = moving.geometry();
  CHECK(resample_nearest(moving, AffineTransform::identity(), ref) == moving);

  // reference world p samples moving world p + dx: the mask shifts down one index
  const auto shifted = resample_nearest(moving, AffineTransform::translation(0.5, 0, 0), ref);
  for (std::int64_t x = 0; x < 6; ++x) CHECK(shifted.at({x, 1, 1}) == (x < 5 ? 1 : 0));

  const auto half = resample_nearest(moving, AffineTransform::translation(0.25, 0, 0), ref);
  for (std::int64_t x = 0; x < 6; ++x) CHECK(half.at({x, 1, 1}) == (x < 5 ? 1 : 0));

  const auto back = resample_nearest(moving, AffineTransform::translation(-0.5, 0, 0), ref);
  for (std::int64_t x = 0; x < 6; ++x) CHECK(back.at({x, 1, 1}) == (x > 0 ? 1 : 0));
}

TEST_CASE("component label volume") {
  const auto vol = volume_with({6, 6, 6}, {1, 1, 1}, {{0, 0, 0}, {1, 0, 0}, {4, 4, 4}});
  const auto comps = connected_components(vol);
  const auto labels = component_label_volume(vol.geometry(), comps);
  CHECK(labels.at({0, 0, 0}) == 1);
  CHECK(labels.at({4, 4, 4}) == 2);
  CHECK(labels.nonzero_count() == 3);
}
