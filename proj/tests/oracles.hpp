#pragma once

// Slow, obviously-correct reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "pgx/volume_io.hpp"

namespace oracle {

using pgx::Dims;
using pgx::Index3;

inline std::vector<Index3> neighbour_offsets(int conn) {
  std::vector<Index3> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (m == 0) continue;
        if (conn == 6 && m > 1) continue;
        if (conn == 18 && m > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

/// Connected components by repeated breadth-first flood fill; each returned as a sorted set.
inline std::vector<std::set<Index3>> components(const std::set<Index3>& voxels, int conn) {
  std::vector<std::set<Index3>> out;
  std::set<Index3> remaining = voxels;
  const auto offs = neighbour_offsets(conn);
  while (!remaining.empty()) {
    std::set<Index3> comp;
    std::vector<Index3> frontier{*remaining.begin()};
    remaining.erase(remaining.begin());
    while (!frontier.empty()) {
      Index3 v = frontier.back();
      frontier.pop_back();
      comp.insert(v);
      for (const auto& o : offs) {
        Index3 n{v.x + o.x, v.y + o.y, v.z + o.z};
        if (auto it = remaining.find(n); it != remaining.end()) {
          remaining.erase(it);
          frontier.push_back(n);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

inline std::vector<Index3> surface(const std::vector<Index3>& set, const Dims& dims) {
  std::set<Index3> s(set.begin(), set.end());
  std::vector<Index3> out;
  for (const auto& v : set) {
    for (const auto& o : neighbour_offsets(6)) {
      Index3 n{v.x + o.x, v.y + o.y, v.z + o.z};
      if (!dims.contains(n) || !s.contains(n)) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

inline double distance_mm(const Index3& a, const Index3& b, const pgx::VoxelSpacing& sp) {
  const double dx = static_cast<double>(a.x - b.x) * sp.dx();
  const double dy = static_cast<double>(a.y - b.y) * sp.dy();
  const double dz = static_cast<double>(a.z - b.z) * sp.dz();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// All-pairs closest distance from each voxel of `from` to the set `to`.
inline std::vector<double> closest(const std::vector<Index3>& from, const std::vector<Index3>& to,
                                   const pgx::VoxelSpacing& sp) {
  std::vector<double> out;
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) best = std::min(best, distance_mm(a, b, sp));
    out.push_back(best);
  }
  return out;
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Exact two-sided Wilcoxon p by enumerating all 2^n sign assignments of the given ranks.
inline double wilcoxon_enumerated_p(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = (static_cast<double>(i + j) + 2.0) / 2.0;
    i = j + 1;
  }
  double total = 0.0, wp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) wp += rank[i];
  }
  const double w_obs = std::min(wp, total - wp);
  std::uint64_t hits = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t m = 0; m < patterns; ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1) s += rank[i];
    if (std::min(s, total - s) <= w_obs + 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(patterns);
}

/// Random voxel blob: a union of a few random boxes inside dims.
inline std::vector<Index3> random_blob(std::mt19937_64& rng, const Dims& dims, int boxes) {
  std::set<Index3> s;
  for (int b = 0; b < boxes; ++b) {
    auto pick = [&](std::int64_t n) { return std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng); };
    const Index3 lo{pick(dims.nx), pick(dims.ny), pick(dims.nz)};
    const Index3 ext{1 + pick(4), 1 + pick(4), 1 + pick(4)};
    for (auto z = lo.z; z < std::min(dims.nz, lo.z + ext.z); ++z)
      for (auto y = lo.y; y < std::min(dims.ny, lo.y + ext.y); ++y)
        for (auto x = lo.x; x < std::min(dims.nx, lo.x + ext.x); ++x) s.insert({x, y, z});
  }
  return {s.begin(), s.end()};
}

}  // namespace oracle
