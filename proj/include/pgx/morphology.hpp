#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgx/volume_io.hpp"

namespace pgx {

/// Neighbourhood used for connectivity: shared face, face-or-edge, or face-edge-or-corner.
enum class Connectivity : int { Six = 6, Eighteen = 18, TwentySix = 26 };

/// Throws InvalidArgument for values other than 6, 18 and 26.
Connectivity connectivity_from_int(int value);

/// Sorted (storage order), duplicate-free list of voxel indices.
using VoxelSet = std::vector<Index3>;

/// Sorts and de-duplicates in place.
void normalize(VoxelSet& set);

struct TumorComponent {
  int id = 0;
  VoxelSet voxels;
  double volume_cc = 0.0;
  Index3 centroid;

  std::size_t voxel_count() const { return voxels.size(); }
};

/// Components of the nonzero voxels, sorted by descending size and numbered 1..k.
/// Equal-size components keep scan order (first voxel in storage order).
std::vector<TumorComponent> connected_components(const LabelVolume& vol,
                                                 Connectivity conn = Connectivity::TwentySix);

struct ComponentFilterResult {
  std::vector<TumorComponent> kept;
  std::vector<TumorComponent> discarded;
};

/// Keeps components with volume_cc >= min_volume_cc; input order is preserved in both lists.
ComponentFilterResult filter_components(std::vector<TumorComponent> components, double min_volume_cc);

/// Per-axis mean of the indices rounded half away from zero. May lie outside the set.
Index3 centroid_index(std::span<const Index3> voxels);
inline Index3 centroid_index(const TumorComponent& comp) { return centroid_index(comp.voxels); }

/// Voxels of `set` with at least one face neighbour outside the set or outside the grid.
VoxelSet surface_voxels(std::span<const Index3> set, const Dims& dims);

/// Dense 0/1 occupancy grid for `set`.
std::vector<std::uint8_t> rasterize(std::span<const Index3> set, const Dims& dims);

/// Pulls `moving` onto `reference` with nearest-neighbour lookup. `transform` maps reference
/// world coordinates to moving world coordinates. Out-of-bounds samples become 0.
LabelVolume resample_nearest(const LabelVolume& moving, const AffineTransform& transform,
                             const GridGeometry& reference);

/// Volume whose voxels carry their component id (0 elsewhere).
LabelVolume component_label_volume(const GridGeometry& geometry,
                                   std::span<const TumorComponent> components);

}  // namespace pgx
