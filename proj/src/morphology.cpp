#include "pgx/morphology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace pgx {

namespace {

std::vector<Index3> neighbour_offsets(Connectivity conn) {
  const int max_manhattan = conn == Connectivity::Six ? 1 : conn == Connectivity::Eighteen ? 2 : 3;
  std::vector<Index3> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (m == 0 || m > max_manhattan) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

constexpr std::array<Index3, 6> kFaceOffsets{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

std::int64_t round_half_away(double v) {
  return static_cast<std::int64_t>(std::round(v));
}

}  // namespace

Connectivity connectivity_from_int(int value) {
  switch (value) {
    case 6: return Connectivity::Six;
    case 18: return Connectivity::Eighteen;
    case 26: return Connectivity::TwentySix;
    default: throw InvalidArgument("connectivity must be 6, 18 or 26, got " + std::to_string(value));
  }
}

void normalize(VoxelSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

std::vector<TumorComponent> connected_components(const LabelVolume& vol, Connectivity conn) {
  const Dims& dims = vol.dims();
  const auto voxels = vol.voxels();
  const auto offsets = neighbour_offsets(conn);
  const double voxel_cc = voxel_volume_cc(vol.spacing());

  std::vector<std::uint8_t> visited(voxels.size(), 0);
  std::vector<TumorComponent> comps;
  std::vector<std::size_t> stack;

  for (std::size_t seed = 0; seed < voxels.size(); ++seed) {
    if (voxels[seed] == 0 || visited[seed]) continue;
    TumorComponent comp;
    visited[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const Index3 p = dims.index(cur);
      comp.voxels.push_back(p);
      for (const auto& o : offsets) {
        const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
        if (!dims.contains(q)) continue;
        const std::size_t qi = dims.linear(q);
        if (voxels[qi] != 0 && !visited[qi]) {
          visited[qi] = 1;
          stack.push_back(qi);
        }
      }
    }
    std::sort(comp.voxels.begin(), comp.voxels.end());
    comp.volume_cc = static_cast<double>(comp.voxels.size()) * voxel_cc;
    comp.centroid = centroid_index(comp.voxels);
    comps.push_back(std::move(comp));
  }

  std::stable_sort(comps.begin(), comps.end(), [](const TumorComponent& a, const TumorComponent& b) {
    return a.voxels.size() > b.voxels.size();
  });
  for (std::size_t i = 0; i < comps.size(); ++i) comps[i].id = static_cast<int>(i + 1);
  return comps;
}

ComponentFilterResult filter_components(std::vector<TumorComponent> components, double min_volume_cc) {
  if (!(min_volume_cc >= 0.0)) throw InvalidArgument("min_volume must be non-negative");
  ComponentFilterResult r;
  for (auto& c : components) {
    (c.volume_cc >= min_volume_cc ? r.kept : r.discarded).push_back(std::move(c));
  }
  return r;
}

Index3 centroid_index(std::span<const Index3> voxels) {
  if (voxels.empty()) throw InvalidArgument("centroid of an empty voxel set");
  // Integer sums keep the mean exact before rounding.
  std::int64_t sx = 0, sy = 0, sz = 0;
  for (const auto& v : voxels) {
    sx += v.x;
    sy += v.y;
    sz += v.z;
  }
  const auto n = static_cast<std::int64_t>(voxels.size());
  auto mean_rounded = [n](std::int64_t s) {
    // half away from zero: sign(s) * floor((2|s| + n) / 2n)
    const std::int64_t a = s < 0 ? -s : s;
    const std::int64_t r = (2 * a + n) / (2 * n);
    return s < 0 ? -r : r;
  };
  return {mean_rounded(sx), mean_rounded(sy), mean_rounded(sz)};
}

std::vector<std::uint8_t> rasterize(std::span<const Index3> set, const Dims& dims) {
  std::vector<std::uint8_t> grid(dims.count(), 0);
  for (const auto& v : set) {
    if (!dims.contains(v)) throw InvalidArgument("voxel index outside grid");
    grid[dims.linear(v)] = 1;
  }
  return grid;
}

VoxelSet surface_voxels(std::span<const Index3> set, const Dims& dims) {
  const auto grid = rasterize(set, dims);
  VoxelSet out;
  for (const auto& v : set) {
    for (const auto& o : kFaceOffsets) {
      const Index3 q{v.x + o.x, v.y + o.y, v.z + o.z};
      if (!dims.contains(q) || grid[dims.linear(q)] == 0) {
        out.push_back(v);
        break;
      }
    }
  }
  normalize(out);
  return out;
}

LabelVolume resample_nearest(const LabelVolume& moving, const AffineTransform& transform,
                             const GridGeometry& reference) {
  reference.validate();
  if (std::abs(transform.linear_determinant()) < 1e-12) throw InvalidArgument("singular transform");
  // reference index -> reference world -> moving world -> moving index
  const AffineTransform index_map =
      moving.affine().inverse().compose(transform.compose(reference.affine));
  const Dims& rd = reference.dims;
  const Dims& md = moving.dims();
  std::vector<std::uint16_t> out(rd.count(), 0);
  for (std::int64_t z = 0; z < rd.nz; ++z) {
    for (std::int64_t y = 0; y < rd.ny; ++y) {
      for (std::int64_t x = 0; x < rd.nx; ++x) {
        const Vec3 p = index_map.apply({static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});
        const Index3 src{round_half_away(p.x), round_half_away(p.y), round_half_away(p.z)};
        if (md.contains(src)) out[rd.linear({x, y, z})] = moving.at(src);
      }
    }
  }
  return LabelVolume(reference, std::move(out));
}

LabelVolume component_label_volume(const GridGeometry& geometry,
                                   std::span<const TumorComponent> components) {
  std::vector<std::uint16_t> labels(geometry.dims.count(), 0);
  for (const auto& c : components) {
    if (c.id <= 0 || c.id > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("component id does not fit a 16-bit label");
    }
    for (const auto& v : c.voxels) labels[geometry.dims.linear(v)] = static_cast<std::uint16_t>(c.id);
  }
  return LabelVolume(geometry, std::move(labels));
}

}  // namespace pgx
