#pragma once

// Overlap, volume and surface-distance metrics between two masks on one grid.

#include <span>
#include <vector>

#include "pgx/morphology.hpp"
#include "pgx/volume_io.hpp"

namespace pgx {

/// Reference and prediction voxel sets sharing one grid.
struct MaskPair {
  VoxelSet reference;
  VoxelSet prediction;
  Dims dims;
  VoxelSpacing spacing{1.0, 1.0, 1.0};
};

/// Closest-surface distances in mm, one entry per surface voxel, in storage order.
struct SurfaceDistanceSet {
  std::vector<double> ref_to_pred;
  std::vector<double> pred_to_ref;
};

enum class HausdorffMode {
  Pooled,          // percentile of both directions pooled together
  MaxOfDirected,   // max of the two directed percentiles
};

double dice(const MaskPair& pair);

SurfaceDistanceSet surface_distances(const MaskPair& pair);

/// Squared mm distance from each query voxel to the nearest site voxel (exact, via a
/// separable Euclidean distance transform over the joint bounding box).
std::vector<double> nearest_site_sq_distances(std::span<const Index3> sites,
                                              std::span<const Index3> queries,
                                              const VoxelSpacing& spacing);

/// Linear interpolation between order statistics at position q·(n−1).
double percentile(std::vector<double> values, double q);

double hausdorff95(const SurfaceDistanceSet& sd, HausdorffMode mode = HausdorffMode::Pooled);
double avg_surface_distance(const SurfaceDistanceSet& sd);

/// 100·|pred − ref| / ref.
double relative_volume_error(double ref_cc, double pred_cc);
/// 100·|v1 − v2| / mean(v1, v2).
double normalized_volume_difference(double v1_cc, double v2_cc);

struct SignedSurfaceDistance {
  Index3 voxel;
  double mm = 0.0;  // > 0 outside the first mask (growth), < 0 inside (decline)
};

/// For every surface voxel of `pair.prediction`, signed distance to the closest surface voxel of
/// `pair.reference`.
std::vector<SignedSurfaceDistance> distance_map(const MaskPair& pair);

}  // namespace pgx
