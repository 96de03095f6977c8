#pragma once

// Fixtures and brute-force oracles shared by the unit and acceptance tests.
// Nothing here calls into the gridding code paths it is used to check.

#include <offres/trajectory.hpp>
#include <offres/volume.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace offres::test {

/// 9984-sample cones set that adequately covers a 16^3 matrix.
inline ConesParams small_cones(double t_read = 1.18e-3)
{
  ConesParams p;
  p.n_cones = 32;
  p.interleaves_per_cone = 4;
  p.samples_per_interleaf = 78;
  p.twist = 2.0;
  p.grid_size = 16;
  p.t_read = t_read;
  return p;
}

inline ComplexVolume random_volume(Shape3 s, unsigned seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexVolume v(s);
  for (auto &x : v) { x = {nd(rng), nd(rng)}; }
  return v;
}

/// Smooth complex test image: a few Gaussian blobs with a linear phase.
inline ComplexVolume smooth_volume(int n, unsigned seed = 1)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.4, 0.6), a(0.5, 1.0), s(1.2, 2.0);
  ComplexVolume v(Shape3::cube(n));
  for (int b = 0; b < 4; ++b) {
    double const cx = u(rng) * n, cy = u(rng) * n, cz = u(rng) * n, amp = a(rng), sig = s(rng);
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          double const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
          v(x, y, z) += amp * std::exp(-d2 / (2 * sig * sig));
        }
      }
    }
  }
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) { v(x, y, z) *= std::polar(1.0, 0.05 * (x + 0.5 * y - z)); }
    }
  }
  return v;
}

/// Direct DTFT  s_j = sum_r img(r) exp(-i 2 pi k_j . r / N), r = index - N/2.
inline std::vector<Cx> direct_dtft(ComplexVolume const &img, std::span<KPoint const> k)
{
  int const n = img.shape().x;
  std::vector<Cx> out(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) {
    Cx acc{};
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          double const ph = -kTwoPi * (k[j][0] * (x - n / 2) + k[j][1] * (y - n / 2) + k[j][2] * (z - n / 2)) / n;
          acc += img(x, y, z) * std::polar(1.0, ph);
        }
      }
    }
    out[j] = acc;
  }
  return out;
}

inline Cx inner(std::span<Cx const> a, std::span<Cx const> b)
{
  Cx s{};
  for (std::size_t i = 0; i < a.size(); ++i) { s += std::conj(b[i]) * a[i]; }
  return s;
}

inline double knorm(KPoint const &p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

} // namespace offres::test
