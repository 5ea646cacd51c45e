#include "pgx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pgx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_non_empty(const MaskPair& pair, const char* what) {
  if (pair.reference.empty() || pair.prediction.empty()) {
    throw InvalidArgument(std::string(what) + " requires two non-empty masks");
  }
}

std::size_t intersection_size(const VoxelSet& a, const VoxelSet& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

// One pass of the lower-envelope squared distance transform along a strided line.
void distance_transform_1d(double* data, std::int64_t n, std::int64_t stride, double w2,
                           std::vector<double>& f, std::vector<std::int64_t>& v,
                           std::vector<double>& z) {
  f.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = data[i * stride];
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);

  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    const double fq = f[static_cast<std::size_t>(q)];
    if (fq == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    // z[0] is -inf, so k never drops below zero
    auto intersect = [&](std::int64_t p) {
      const double fp = f[static_cast<std::size_t>(p)];
      return ((fq + w2 * static_cast<double>(q * q)) - (fp + w2 * static_cast<double>(p * p))) /
             (2.0 * w2 * static_cast<double>(q - p));
    };
    double s = intersect(v[static_cast<std::size_t>(k)]);
    while (s <= z[static_cast<std::size_t>(k)]) {
      --k;
      s = intersect(v[static_cast<std::size_t>(k)]);
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) return;  // line holds no sites

  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < static_cast<double>(q)) ++j;
    const std::int64_t p = v[static_cast<std::size_t>(j)];
    const double d = static_cast<double>(q - p);
    data[q * stride] = w2 * d * d + f[static_cast<std::size_t>(p)];
  }
}

}  // namespace

double dice(const MaskPair& pair) {
  const std::size_t total = pair.reference.size() + pair.prediction.size();
  if (total == 0) throw InvalidArgument("undefined Dice: both masks empty");
  std::size_t inter = 0;
  if (std::is_sorted(pair.reference.begin(), pair.reference.end()) &&
      std::is_sorted(pair.prediction.begin(), pair.prediction.end())) {
    inter = intersection_size(pair.reference, pair.prediction);
  } else {
    VoxelSet a = pair.reference, b = pair.prediction;
    normalize(a);
    normalize(b);
    inter = intersection_size(a, b);
  }
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<double> nearest_site_sq_distances(std::span<const Index3> sites,
                                              std::span<const Index3> queries,
                                              const VoxelSpacing& spacing) {
  if (sites.empty()) throw InvalidArgument("no sites for distance transform");
  if (queries.empty()) return {};
  Index3 lo = sites.front();
  Index3 hi = sites.front();
  auto grow = [&](const Index3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  };
  for (const auto& p : sites) grow(p);
  for (const auto& p : queries) grow(p);
  const Dims box{hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1};
  auto local = [&](const Index3& p) { return box.linear({p.x - lo.x, p.y - lo.y, p.z - lo.z}); };

  std::vector<double> grid(box.count(), kInf);
  for (const auto& p : sites) grid[local(p)] = 0.0;

  std::vector<double> f;
  std::vector<std::int64_t> v;
  std::vector<double> z;
  const double wx = spacing.dx() * spacing.dx();
  const double wy = spacing.dy() * spacing.dy();
  const double wz = spacing.dz() * spacing.dz();
  for (std::int64_t iz = 0; iz < box.nz; ++iz)
    for (std::int64_t iy = 0; iy < box.ny; ++iy)
      distance_transform_1d(&grid[box.linear({0, iy, iz})], box.nx, 1, wx, f, v, z);
  for (std::int64_t iz = 0; iz < box.nz; ++iz)
    for (std::int64_t ix = 0; ix < box.nx; ++ix)
      distance_transform_1d(&grid[box.linear({ix, 0, iz})], box.ny, box.nx, wy, f, v, z);
  for (std::int64_t iy = 0; iy < box.ny; ++iy)
    for (std::int64_t ix = 0; ix < box.nx; ++ix)
      distance_transform_1d(&grid[box.linear({ix, iy, 0})], box.nz, box.nx * box.ny, wz, f, v, z);

  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(grid[local(q)]);
  return out;
}

SurfaceDistanceSet surface_distances(const MaskPair& pair) {
  require_non_empty(pair, "surface distances");
  const VoxelSet ref_surface = surface_voxels(pair.reference, pair.dims);
  const VoxelSet pred_surface = surface_voxels(pair.prediction, pair.dims);
  SurfaceDistanceSet sd;
  sd.ref_to_pred = nearest_site_sq_distances(pred_surface, ref_surface, pair.spacing);
  sd.pred_to_ref = nearest_site_sq_distances(ref_surface, pred_surface, pair.spacing);
  for (double& d : sd.ref_to_pred) d = std::sqrt(d);
  for (double& d : sd.pred_to_ref) d = std::sqrt(d);
  return sd;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("percentile fraction outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double hausdorff95(const SurfaceDistanceSet& sd, HausdorffMode mode) {
  if (sd.ref_to_pred.empty() || sd.pred_to_ref.empty()) {
    throw InvalidArgument("hausdorff95 requires both distance lists non-empty");
  }
  if (mode == HausdorffMode::MaxOfDirected) {
    return std::max(percentile(sd.ref_to_pred, 0.95), percentile(sd.pred_to_ref, 0.95));
  }
  std::vector<double> pooled(sd.ref_to_pred);
  pooled.insert(pooled.end(), sd.pred_to_ref.begin(), sd.pred_to_ref.end());
  return percentile(std::move(pooled), 0.95);
}

double avg_surface_distance(const SurfaceDistanceSet& sd) {
  if (sd.ref_to_pred.empty() || sd.pred_to_ref.empty()) {
    throw InvalidArgument("average surface distance requires both distance lists non-empty");
  }
  // Sort the pooled values so the sum does not depend on which side is the reference.
  std::vector<double> pooled(sd.ref_to_pred);
  pooled.insert(pooled.end(), sd.pred_to_ref.begin(), sd.pred_to_ref.end());
  std::sort(pooled.begin(), pooled.end());
  return std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
}

double relative_volume_error(double ref_cc, double pred_cc) {
  if (!(ref_cc > 0.0)) throw InvalidArgument("relative volume error needs a positive reference volume");
  return 100.0 * std::abs(pred_cc - ref_cc) / ref_cc;
}

double normalized_volume_difference(double v1_cc, double v2_cc) {
  if (!(v1_cc + v2_cc > 0.0)) throw InvalidArgument("normalized volume difference of two zero volumes");
  return 100.0 * std::abs(v1_cc - v2_cc) / ((v1_cc + v2_cc) / 2.0);
}

std::vector<SignedSurfaceDistance> distance_map(const MaskPair& pair) {
  require_non_empty(pair, "distance map");
  const VoxelSet first_surface = surface_voxels(pair.reference, pair.dims);
  const VoxelSet second_surface = surface_voxels(pair.prediction, pair.dims);
  const auto sq = nearest_site_sq_distances(first_surface, second_surface, pair.spacing);
  const auto inside_first = rasterize(pair.reference, pair.dims);
  std::vector<SignedSurfaceDistance> out;
  out.reserve(second_surface.size());
  for (std::size_t i = 0; i < second_surface.size(); ++i) {
    const double d = std::sqrt(sq[i]);
    const bool inside = inside_first[pair.dims.linear(second_surface[i])] != 0;
    out.push_back({second_surface[i], d == 0.0 ? 0.0 : (inside ? -d : d)});
  }
  return out;
}

}  // namespace pgx
