#pragma once

#include "gridding.hpp"
#include "kspace.hpp"
#include "parallel.hpp"
#include "phantom.hpp"
#include "recon.hpp"
#include "trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace offres {

struct ForwardOptions
{
  double max_work = 2e9;      // nonzero voxels x samples accepted by the direct sum
  double noise_sigma = 0.0;   // std of additive complex Gaussian noise per component
  std::uint64_t noise_seed = 0;
};

namespace detail {

inline void add_noise(KSpaceData &ks, ForwardOptions const &opt)
{
  if (opt.noise_sigma <= 0.0) { return; }
  std::mt19937_64 rng(opt.noise_seed);
  std::normal_distribution<double> nd(0.0, opt.noise_sigma);
  for (auto &v : ks.values) {
    double const re = nd(rng);
    v += Cx{re, nd(rng)};
  }
}

inline void check_forward_inputs(ComplexVolume const &img, FieldMap const &fmap, ConesTrajectory const &traj)
{
  require_same_shape(img.shape(), fmap.shape(), "forward model image/field map");
  require_matrix(traj, img.shape());
  require(all_finite(img), "image contains non-finite values");
  require(all_finite(fmap), "field map contains non-finite values");
}

} // namespace detail

/*
 * Direct evaluation of the signal equation
 *   s_j = sum_r M(r) exp(-i 2 pi k_j . r / N) exp(-i 2 pi f(r) t_j),
 * skipping zero voxels. Cost is (nonzero voxels) x (samples) complex
 * exponentials, bounded by opt.max_work.
 */
inline KSpaceData forward_exact(ComplexVolume const &img,
                                FieldMap const &fmap,
                                ConesTrajectory const &traj,
                                ForwardOptions const &opt = {})
{
  detail::check_forward_inputs(img, fmap, traj);
  int const n = traj.grid_size();

  struct Src
  {
    double x, y, z, f;
    Cx m;
  };
  std::vector<Src> src;
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (img(x, y, z) != Cx{}) { src.push_back({double(x - n / 2), double(y - n / 2), double(z - n / 2), fmap(x, y, z), img(x, y, z)}); }
      }
    }
  }
  double const work = static_cast<double>(src.size()) * static_cast<double>(traj.size());
  require<SizeGuardError>(work <= opt.max_work, "forward_exact would need " + std::to_string(work) +
                                                  " terms (limit " + std::to_string(opt.max_work) + ")");

  KSpaceData ks;
  ks.values.assign(traj.size(), Cx{});
  auto const size = static_cast<std::int64_t>(traj.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::int64_t j = 0; j < size; ++j) {
    auto const &k = traj.k(j);
    double const t = traj.t(j);
    double const kx = k[0] / n, ky = k[1] / n, kz = k[2] / n;
    Cx acc{};
    for (auto const &s : src) {
      double const ph = -kTwoPi * (kx * s.x + ky * s.y + kz * s.z + s.f * t);
      acc += s.m * Cx{std::cos(ph), std::sin(ph)};
    }
    ks.values[j] = acc;
  }
  detail::add_noise(ks, opt);
  return ks;
}

/// Multiplies each sample by exp(-i 2 pi f0 t_j).
inline KSpaceData add_global_offres(KSpaceData const &ks, ConesTrajectory const &traj, double f0)
{
  require_aligned(ks, traj);
  require(std::isfinite(f0), "frequency must be finite");
  KSpaceData out = ks;
  if (f0 == 0.0) { return out; }
  for (std::size_t j = 0; j < out.size(); ++j) { out.values[j] *= std::polar(1.0, -kTwoPi * f0 * traj.t(j)); }
  return out;
}

/// Multiplies each sample by exp(+i 2 pi f t_j), undoing add_global_offres(f).
inline KSpaceData demodulate_global(KSpaceData const &ks, ConesTrajectory const &traj, double f)
{
  require_aligned(ks, traj);
  require(std::isfinite(f), "frequency must be finite");
  KSpaceData out = ks;
  if (f == 0.0) { return out; }
  for (std::size_t j = 0; j < out.size(); ++j) { out.values[j] *= std::polar(1.0, kTwoPi * f * traj.t(j)); }
  return out;
}

/// Equal-width bins over [min f, max f]; each voxel goes to the bin whose centre is nearest.
struct FrequencyBins
{
  std::vector<double> centers;
  std::vector<int> voxel_bin;
};

inline FrequencyBins bin_field_map(FieldMap const &fmap, int n_bins)
{
  require(n_bins >= 1, "n_bins must be >= 1");
  auto const [lo_it, hi_it] = std::minmax_element(fmap.begin(), fmap.end());
  double const lo = *lo_it, hi = *hi_it;
  FrequencyBins b;
  b.voxel_bin.assign(fmap.size(), 0);
  if (hi == lo) {
    b.centers = {lo};
    return b;
  }
  double const width = (hi - lo) / n_bins;
  b.centers.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) { b.centers[i] = lo + (i + 0.5) * width; }
  for (std::size_t v = 0; v < fmap.size(); ++v) {
    b.voxel_bin[v] = std::clamp(static_cast<int>(std::floor((fmap[v] - lo) / width)), 0, n_bins - 1);
  }
  return b;
}

/// Frequency-segmented approximation: one gridded forward transform per occupied bin.
inline KSpaceData forward_freq_segmented(ComplexVolume const &img,
                                         FieldMap const &fmap,
                                         ConesTrajectory const &traj,
                                         int n_bins,
                                         GridOptions grid = {},
                                         ForwardOptions const &opt = {})
{
  detail::check_forward_inputs(img, fmap, traj);
  auto const bins = bin_field_map(fmap, n_bins);
  Gridder const plan(traj.points(), traj.grid_size(), grid);

  KSpaceData ks;
  ks.values.assign(traj.size(), Cx{});
  ComplexVolume part(img.shape());
  for (std::size_t b = 0; b < bins.centers.size(); ++b) {
    bool any = false;
    for (std::size_t v = 0; v < img.size(); ++v) {
      bool const in = bins.voxel_bin[v] == static_cast<int>(b) && img[v] != Cx{};
      part[v] = in ? img[v] : Cx{};
      any = any || in;
    }
    if (!any) { continue; }
    auto const s = plan.forward(part);
    double const f = bins.centers[b];
    for (std::size_t j = 0; j < s.size(); ++j) { ks.values[j] += s[j] * std::polar(1.0, -kTwoPi * f * traj.t(j)); }
  }
  detail::add_noise(ks, opt);
  return ks;
}

/// Image of a unit impulse at `location` under a constant off-resonance f0.
inline ComplexVolume psf_local(ConesTrajectory const &traj, Index3 location, double f0, Shape3 shape, GridOptions grid = {})
{
  require(shape.contains(location), "PSF location outside the volume");
  auto const delta = delta_phantom(shape, location);
  auto const ks = forward_exact(delta, constant_field_map(shape, f0), traj);
  return grid_adjoint(ks, traj, shape, grid);
}

/// Smallest radius around `center` whose ball holds at least `fraction` of the energy of v.
inline double energy_radius(ComplexVolume const &v, Index3 center, double fraction = 0.9)
{
  require(fraction > 0.0 && fraction <= 1.0, "energy fraction must lie in (0, 1]");
  Shape3 const s = v.shape();
  std::vector<std::pair<double, double>> de;
  de.reserve(v.size());
  double total = 0.0;
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) {
        double const e = std::norm(v(x, y, z));
        de.emplace_back(std::hypot(x - center.x, y - center.y, z - center.z), e);
        total += e;
      }
    }
  }
  require(total > 0.0, "energy_radius of an all-zero volume");
  std::sort(de.begin(), de.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < de.size(); ++i) {
    acc += de[i].second;
    bool const last_at_radius = i + 1 == de.size() || de[i + 1].first != de[i].first;
    if (last_at_radius && acc >= fraction * total) { return de[i].first; }
  }
  return de.back().first;
}

/// Ratio of |v| at `peak` to the largest |v| farther than `exclusion` voxels from it.
inline double peak_to_sidelobe(ComplexVolume const &v, Index3 peak, double exclusion = 1.5)
{
  Shape3 const s = v.shape();
  double side = 0.0;
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) {
        if (std::hypot(x - peak.x, y - peak.y, z - peak.z) > exclusion) { side = std::max(side, std::abs(v(x, y, z))); }
      }
    }
  }
  return side > 0.0 ? std::abs(v(peak)) / side : std::numeric_limits<double>::infinity();
}

} // namespace offres
