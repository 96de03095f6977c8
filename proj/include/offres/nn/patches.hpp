#pragma once

#include "network.hpp"

#include <algorithm>
#include <vector>

namespace offres::nn {

/// Patch origins along one axis: a stride grid whose last patch is clamped to
/// the edge; a single centered (negative, i.e. padded) origin when n < patch.
inline std::vector<int> patch_origins(int n, int patch, int stride)
{
  require(n >= 1 && patch >= 1 && stride >= 1, "patch geometry must be positive");
  if (n <= patch) { return {-((patch - n) / 2)}; }
  std::vector<int> o;
  for (int s = 0;; s += stride) {
    if (s + patch >= n) {
      o.push_back(n - patch);
      break;
    }
    o.push_back(s);
  }
  return o;
}

inline std::vector<Index3> patch_grid(Shape3 shape, int patch, int stride)
{
  auto const ox = patch_origins(shape.x, patch, stride), oy = patch_origins(shape.y, patch, stride),
             oz = patch_origins(shape.z, patch, stride);
  std::vector<Index3> out;
  for (int z : oz) {
    for (int y : oy) {
      for (int x : ox) { out.push_back({x, y, z}); }
    }
  }
  return out;
}

/// Cube of side `patch` starting at `origin`; voxels outside the source are zero.
template <typename S>
Tensor<S> crop(Tensor<S> const &src, Index3 origin, Shape3 size)
{
  Tensor<S> out(src.channels, size);
  for (int c = 0; c < src.channels; ++c) {
    for (int z = 0; z < size.z; ++z) {
      int const sz = origin.z + z;
      if (sz < 0 || sz >= src.shape.z) { continue; }
      for (int y = 0; y < size.y; ++y) {
        int const sy = origin.y + y;
        if (sy < 0 || sy >= src.shape.y) { continue; }
        for (int x = 0; x < size.x; ++x) {
          int const sx = origin.x + x;
          if (sx >= 0 && sx < src.shape.x) { out.at(c, x, y, z) = src.at(c, sx, sy, sz); }
        }
      }
    }
  }
  return out;
}

struct ComplexPatch
{
  Index3 origin;
  ComplexVolume data;
};

inline std::vector<ComplexPatch> extract_patches(ComplexVolume const &vol, int patch, int stride)
{
  std::vector<ComplexPatch> out;
  Shape3 const s = vol.shape();
  for (Index3 o : patch_grid(s, patch, stride)) {
    ComplexVolume p(Shape3::cube(patch), Cx{}, vol.spacing());
    for (int z = 0; z < patch; ++z) {
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          Index3 const q{o.x + x, o.y + y, o.z + z};
          if (s.contains(q)) { p(x, y, z) = vol(q); }
        }
      }
    }
    out.push_back({o, std::move(p)});
  }
  return out;
}

namespace detail {

// Blend weight at distance d from a tile face that borders another tile: zero
// inside the receptive radius m, then a linear ramp across the rest of the overlap.
inline double edge_weight(int d, int m, int overlap)
{
  int const ramp = std::max(1, overlap - 2 * m);
  return std::clamp(static_cast<double>(d - m + 1), 0.0, static_cast<double>(ramp)) / ramp;
}

} // namespace detail

/*
 * Full-volume inference in overlapping cubic tiles. Tiles overlap by
 * `overlap` voxels; in each overlap the contributions are blended with a
 * linear taper that ignores the outer receptive-field band of every tile,
 * where zero padding differs from the true neighbourhood.
 */
template <typename S>
ComplexVolume apply_tiled(NetParams<S> const &p, ComplexVolume const &vol, int tile, int overlap)
{
  int const k = p.cfg.kernel;
  require(overlap >= k - 1, "tile overlap must be >= kernel - 1");
  require(tile > overlap, "tile must be larger than the overlap");
  Shape3 const s = vol.shape();
  if (tile >= s.x && tile >= s.y && tile >= s.z) { return net_forward(p, vol); }

  int const m = std::min(p.cfg.receptive_radius(), (overlap - 1) / 2);
  auto const x = to_channels<S>(vol);
  Tensor<double> acc(2, s);
  Volume<double> wsum(s, 0.0);
  std::array<std::vector<int>, 3> origins;
  std::array<int, 3> size{};
  for (int a = 0; a < 3; ++a) {
    size[a] = std::min(tile, s[a]);
    origins[a] = patch_origins(s[a], size[a], size[a] - overlap);
  }
  for (int oz : origins[2]) {
    for (int oy : origins[1]) {
      for (int ox : origins[0]) {
        Index3 const o{ox, oy, oz};
        Shape3 const ts{size[0], size[1], size[2]};
        auto const y = net_forward(p, crop(x, o, ts));
        std::array<std::vector<double>, 3> w;
        int const org[3] = {ox, oy, oz};
        for (int a = 0; a < 3; ++a) {
          w[a].assign(size[a], 1.0);
          bool const lo_inner = org[a] > 0, hi_inner = org[a] + size[a] < s[a];
          for (int i = 0; i < size[a]; ++i) {
            if (lo_inner) { w[a][i] *= detail::edge_weight(i, m, overlap); }
            if (hi_inner) { w[a][i] *= detail::edge_weight(size[a] - 1 - i, m, overlap); }
          }
        }
        for (int z = 0; z < ts.z; ++z) {
          for (int yy = 0; yy < ts.y; ++yy) {
            for (int xx = 0; xx < ts.x; ++xx) {
              double const ww = w[0][xx] * w[1][yy] * w[2][z];
              if (ww == 0.0) { continue; }
              int const gx = ox + xx, gy = oy + yy, gz = oz + z;
              wsum(gx, gy, gz) += ww;
              for (int c = 0; c < 2; ++c) { acc.at(c, gx, gy, gz) += ww * y.at(c, xx, yy, z); }
            }
          }
        }
      }
    }
  }
  ComplexVolume out(s, Cx{}, vol.spacing());
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(wsum[i] > 0.0, "tile layout leaves voxels uncovered; increase the overlap");
    out[i] = Cx(acc.v[i], acc.v[i + out.size()]) / wsum[i];
  }
  return out;
}

} // namespace offres::nn
