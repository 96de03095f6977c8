#pragma once

#include "error.hpp"
#include "volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace offres {

/// Synthetic angiogram-like volume plus the masks used to build it.
struct VesselPhantom
{
  ComplexVolume image;
  Mask vessel;     // voxels fully inside a tube (magnitude exactly 1)
  Mask background; // voxels untouched by any tube, magnitude <= 0.4
};

inline constexpr int kMinVesselShape = 12;

namespace detail {

using Vec3 = std::array<double, 3>;

inline Vec3 catmull_rom(Vec3 const &p0, Vec3 const &p1, Vec3 const &p2, Vec3 const &p3, double t)
{
  Vec3 out{};
  double const t2 = t * t, t3 = t2 * t;
  for (int a = 0; a < 3; ++a) {
    out[a] = 0.5 * (2 * p1[a] + (-p0[a] + p2[a]) * t + (2 * p0[a] - 5 * p1[a] + 4 * p2[a] - p3[a]) * t2 +
                    (-p0[a] + 3 * p1[a] - 3 * p2[a] + p3[a]) * t3);
  }
  return out;
}

// Smooth step from 1 (q <= lo) to 0 (q >= hi).
inline double taper(double q, double lo, double hi)
{
  if (q <= lo) { return 1.0; }
  if (q >= hi) { return 0.0; }
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (q - lo) / (hi - lo)));
}

} // namespace detail

/*
 * Tubes of unit magnitude along Catmull-Rom centerlines, tapering from a
 * 3-6 voxel radius to 1 voxel, over a background of soft ellipsoids with
 * magnitudes in [0.1, 0.4]. A random quadratic phase bounded by pi/2 is
 * applied everywhere.
 */
inline VesselPhantom gen_vessel_phantom_masked(Shape3 shape, int n_vessels, std::uint64_t seed)
{
  require(n_vessels >= 1, "n_vessels must be >= 1");
  require(shape.min() >= kMinVesselShape,
          "shape " + shape.str() + " is too small for a vessel (need >= " + std::to_string(kMinVesselShape) + ")");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  Shape3 const s = shape;
  detail::Vec3 const ext{double(s.x), double(s.y), double(s.z)};

  // Background: one large ellipsoid plus a few smaller ones; magnitude is the max of their profiles.
  RealVolume bg(s, 0.0);
  int const n_ell = 3 + static_cast<int>(rng() % 3);
  for (int e = 0; e < n_ell; ++e) {
    double const amp = uni(0.1, 0.4);
    detail::Vec3 c{}, ax{};
    for (int a = 0; a < 3; ++a) {
      c[a] = ext[a] * (e == 0 ? 0.5 : uni(0.3, 0.7));
      ax[a] = ext[a] * (e == 0 ? uni(0.38, 0.45) : uni(0.12, 0.3));
    }
    for (int z = 0; z < s.z; ++z) {
      for (int y = 0; y < s.y; ++y) {
        for (int x = 0; x < s.x; ++x) {
          double const q = std::hypot((x - c[0]) / ax[0], (y - c[1]) / ax[1], (z - c[2]) / ax[2]);
          bg(x, y, z) = std::max(bg(x, y, z), amp * detail::taper(q, 0.8, 1.2));
        }
      }
    }
  }

  // Vessels: densely sampled centerline points with the local radius.
  struct Node
  {
    detail::Vec3 p;
    double r;
  };
  std::vector<Node> nodes;
  double const r_cap = std::max(3.0, s.min() / 5.0);
  for (int v = 0; v < n_vessels; ++v) {
    std::array<detail::Vec3, 6> ctrl{};
    for (auto &p : ctrl) {
      for (int a = 0; a < 3; ++a) { p[a] = ext[a] * uni(0.2, 0.8); }
    }
    double const r0 = std::min(uni(3.0, 6.0), r_cap);
    int const segs = static_cast<int>(ctrl.size()) - 3;
    int const per_seg = 4 * s.min();
    for (int g = 0; g < segs; ++g) {
      for (int i = 0; i < per_seg; ++i) {
        double const t = static_cast<double>(i) / per_seg;
        double const along = (g + t) / segs;
        nodes.push_back({detail::catmull_rom(ctrl[g], ctrl[g + 1], ctrl[g + 2], ctrl[g + 3], t), r0 + (1.0 - r0) * along});
      }
    }
    nodes.push_back({ctrl[segs + 1], 1.0});
  }

  // Coverage per voxel: 1 inside a tube, linear partial-volume ramp over one voxel at the wall.
  RealVolume cover(s, 0.0);
  for (auto const &nd : nodes) {
    int const reach = static_cast<int>(std::ceil(nd.r + 1.0));
    int const cx = static_cast<int>(std::lround(nd.p[0])), cy = static_cast<int>(std::lround(nd.p[1])),
              cz = static_cast<int>(std::lround(nd.p[2]));
    for (int z = std::max(0, cz - reach); z <= std::min(s.z - 1, cz + reach); ++z) {
      for (int y = std::max(0, cy - reach); y <= std::min(s.y - 1, cy + reach); ++y) {
        for (int x = std::max(0, cx - reach); x <= std::min(s.x - 1, cx + reach); ++x) {
          double const d = std::hypot(x - nd.p[0], y - nd.p[1], z - nd.p[2]);
          double const c = std::clamp(nd.r + 0.5 - d, 0.0, 1.0);
          cover(x, y, z) = std::max(cover(x, y, z), c);
        }
      }
    }
  }

  // Quadratic phase on normalized coordinates, rescaled into [-pi/2, pi/2].
  std::array<double, 10> coef{};
  for (auto &c : coef) { c = uni(-1.0, 1.0); }
  auto raw_phase = [&](int x, int y, int z) {
    double const u = 2.0 * x / (s.x - 1) - 1.0, v = 2.0 * y / (s.y - 1) - 1.0, w = 2.0 * z / (s.z - 1) - 1.0;
    return coef[0] + coef[1] * u + coef[2] * v + coef[3] * w + coef[4] * u * u + coef[5] * v * v + coef[6] * w * w +
           coef[7] * u * v + coef[8] * v * w + coef[9] * u * w;
  };
  double pmax = 0.0;
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) { pmax = std::max(pmax, std::abs(raw_phase(x, y, z))); }
    }
  }
  double const pscale = uni(0.5, 1.0) * 0.5 * std::numbers::pi / std::max(pmax, 1e-12);

  VesselPhantom out{ComplexVolume(s), Mask(s, 0), Mask(s, 0)};
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) {
        double const c = cover(x, y, z);
        double const mag = c + (1.0 - c) * bg(x, y, z);
        out.image(x, y, z) = std::polar(mag, pscale * raw_phase(x, y, z));
        out.vessel(x, y, z) = c >= 1.0 ? 1 : 0;
        out.background(x, y, z) = c <= 0.0 ? 1 : 0;
      }
    }
  }
  return out;
}

inline ComplexVolume gen_vessel_phantom(Shape3 shape, int n_vessels, std::uint64_t seed)
{
  return gen_vessel_phantom_masked(shape, n_vessels, seed).image;
}

struct FieldMapParams
{
  double f_max = 250.0; // Hz
  int n_blobs = 4;
  bool ramp = false;
  double min_width = 0.2; // Gaussian sigma as a fraction of the smallest dimension
  double max_width = 0.35;
};

/// Sum of random-sign Gaussian bumps (and an optional linear ramp), rescaled so max |f| = f_max.
inline FieldMap gen_field_map(Shape3 shape, FieldMapParams const &p, std::uint64_t seed)
{
  require(p.f_max > 0.0 && std::isfinite(p.f_max), "f_max must be positive");
  require(p.n_blobs >= 0, "n_blobs must be >= 0");
  require(p.min_width > 0.0 && p.max_width >= p.min_width, "invalid blob width range");
  require(shape.min() >= 1, "empty field-map shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  FieldMap raw(shape, 0.0);
  double const scale = shape.min();
  for (int b = 0; b < p.n_blobs; ++b) {
    double const cx = uni(0.2, 0.8) * shape.x, cy = uni(0.2, 0.8) * shape.y, cz = uni(0.2, 0.8) * shape.z;
    double const sig = std::max(1.5, uni(p.min_width, p.max_width) * scale);
    double const sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    double const amp = sign * uni(0.5, 1.0);
    for (int z = 0; z < shape.z; ++z) {
      for (int y = 0; y < shape.y; ++y) {
        for (int x = 0; x < shape.x; ++x) {
          double const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
          raw(x, y, z) += amp * std::exp(-0.5 * d2 / (sig * sig));
        }
      }
    }
  }
  if (p.ramp) {
    std::array<double, 3> g{uni(-1, 1), uni(-1, 1), uni(-1, 1)};
    for (int z = 0; z < shape.z; ++z) {
      for (int y = 0; y < shape.y; ++y) {
        for (int x = 0; x < shape.x; ++x) {
          raw(x, y, z) += g[0] * (x - 0.5 * shape.x) / shape.x + g[1] * (y - 0.5 * shape.y) / shape.y +
                          g[2] * (z - 0.5 * shape.z) / shape.z;
        }
      }
    }
  }
  double peak = 0.0;
  for (double v : raw) { peak = std::max(peak, std::abs(v)); }
  if (peak == 0.0) { return raw; }
  for (double &v : raw) { v = (v / peak) * p.f_max; }
  return raw;
}

inline FieldMap gen_field_map(Shape3 shape, double f_max, int n_blobs, std::uint64_t seed)
{
  FieldMapParams p;
  p.f_max = f_max;
  p.n_blobs = n_blobs;
  return gen_field_map(shape, p, seed);
}

inline FieldMap constant_field_map(Shape3 shape, double f0) { return FieldMap(shape, f0); }

inline ComplexVolume delta_phantom(Shape3 shape, Index3 location)
{
  require(shape.contains(location), "delta location outside the volume");
  ComplexVolume v(shape);
  v(location) = Cx{1.0, 0.0};
  return v;
}

} // namespace offres
