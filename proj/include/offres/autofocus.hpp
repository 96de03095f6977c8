#pragma once

#include "filters.hpp"
#include "forward.hpp"
#include "recon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace offres {

struct AutofocusConfig
{
  double f_min = -1000.0; // Hz
  double f_max = 1000.0;
  int n_freqs = 41;
  int metric_window = 2;       // half-width of the cubic metric window
  double lowpass_sigma = 4.0;  // voxels, for low-frequency phase removal
  double fieldmap_smooth_sigma = 2.0;
  double mask_fraction = 0.05; // voxels below this fraction of the peak magnitude get f = 0
  int max_resident = 64;       // candidate images kept in memory at once
  GridOptions grid{};

  void validate() const
  {
    require(std::isfinite(f_min) && std::isfinite(f_max) && f_min < f_max, "autofocus needs f_min < f_max");
    require(n_freqs >= 2, "autofocus needs n_freqs >= 2");
    require(metric_window >= 0, "metric window must be >= 0");
    require(lowpass_sigma >= 0.0 && fieldmap_smooth_sigma >= 0.0, "smoothing widths must be >= 0");
    require(mask_fraction >= 0.0 && mask_fraction < 1.0, "mask fraction must lie in [0, 1)");
    require(max_resident >= 1, "max_resident must be >= 1");
  }

  std::vector<double> candidates() const
  {
    std::vector<double> f(n_freqs);
    for (int i = 0; i < n_freqs; ++i) { f[i] = f_min + (f_max - f_min) * i / (n_freqs - 1); }
    return f;
  }
};

/// Windowed sum of |imag(img e^{-i phase(lowpass(img))})|.
inline RealVolume metric_map(ComplexVolume const &img, double lowpass_sigma, int window)
{
  require(all_finite(img), "metric_map input must be finite");
  auto const lp = gaussian_smooth(img, lowpass_sigma);
  RealVolume m(img.shape(), 0.0, img.spacing());
  for (std::size_t i = 0; i < img.size(); ++i) {
    double const a = std::abs(lp[i]);
    Cx const rot = a > 0.0 ? std::conj(lp[i]) / a : Cx{1.0, 0.0};
    m[i] = std::abs((img[i] * rot).imag());
  }
  return box_sum(std::move(m), window);
}

struct AutofocusResult
{
  ComplexVolume image;
  FieldMap fieldmap;     // smoothed estimate used for assembly
  FieldMap raw_argmin;   // per-voxel argmin before smoothing
  Mask signal;           // voxels above the magnitude threshold
  std::vector<double> mean_metric; // per candidate, in candidates() order
};

namespace detail {

// Candidate visit order: increasing |f|, negative first on ties. With a strict
// "<" update this resolves equal metrics toward the smaller |f|.
inline std::vector<int> tie_order(std::vector<double> const &f)
{
  std::vector<int> idx(f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    double const aa = std::abs(f[a]), bb = std::abs(f[b]);
    return aa != bb ? aa < bb : f[a] < f[b];
  });
  return idx;
}

inline Mask signal_mask(ComplexVolume const &img, double fraction)
{
  double const thr = fraction * max_abs(img);
  Mask m(img.shape(), 0);
  if (max_abs(img) == 0.0) { return m; }
  for (std::size_t i = 0; i < img.size(); ++i) { m[i] = std::abs(img[i]) >= thr ? 1 : 0; }
  return m;
}

inline std::size_t nearest_candidate(std::vector<double> const &f, double x)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (std::abs(f[i] - x) < std::abs(f[best] - x)) { best = i; }
  }
  return best;
}

} // namespace detail

/*
 * Blind correction by exhaustive demodulation. Candidate reconstructions are
 * streamed through a running per-voxel argmin; when more candidates exist
 * than cfg.max_resident, the ones needed for assembly are rebuilt afterwards.
 */
inline AutofocusResult autofocus_correct(KSpaceData const &ks, ConesTrajectory const &traj, Shape3 shape,
                                         AutofocusConfig const &cfg = {})
{
  cfg.validate();
  require_aligned(ks, traj);
  detail::require_matrix(traj, shape);
  Gridder const plan(traj.points(), traj.grid_size(), cfg.grid);
  auto recon_at = [&](double f) { return grid_adjoint(plan, demodulate_global(ks, traj, f), traj); };

  auto const freqs = cfg.candidates();
  AutofocusResult out{ComplexVolume(shape), FieldMap(shape, 0.0), FieldMap(shape, 0.0), Mask(shape, 0),
                      std::vector<double>(freqs.size(), 0.0)};
  auto const plain = recon_at(0.0);
  out.signal = detail::signal_mask(plain, cfg.mask_fraction);
  if (max_abs(plain) == 0.0) { return out; }

  bool const keep_all = static_cast<int>(freqs.size()) <= cfg.max_resident;
  std::map<std::size_t, ComplexVolume> resident;
  RealVolume best(shape, std::numeric_limits<double>::infinity());
  std::vector<int> arg(shape.voxels(), -1);
  for (int c : detail::tie_order(freqs)) {
    auto img = recon_at(freqs[c]);
    auto const m = metric_map(img, cfg.lowpass_sigma, cfg.metric_window);
    out.mean_metric[c] = std::accumulate(m.begin(), m.end(), 0.0) / m.size();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] < best[i]) {
        best[i] = m[i];
        arg[i] = c;
      }
    }
    if (keep_all) { resident.emplace(c, std::move(img)); }
  }
  for (std::size_t i = 0; i < arg.size(); ++i) { out.raw_argmin[i] = out.signal[i] ? freqs[arg[i]] : 0.0; }
  out.fieldmap = FieldMap(masked_smooth(out.raw_argmin, out.signal, cfg.fieldmap_smooth_sigma));

  // Assembly: each voxel comes from the candidate nearest its smoothed frequency.
  std::vector<std::size_t> pick(shape.voxels());
  for (std::size_t i = 0; i < pick.size(); ++i) { pick[i] = detail::nearest_candidate(freqs, out.fieldmap[i]); }
  std::vector<std::size_t> used(pick);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  for (std::size_t c : used) {
    std::optional<ComplexVolume> rebuilt;
    if (!keep_all) { rebuilt = recon_at(freqs[c]); }
    ComplexVolume const &img = keep_all ? resident.at(c) : *rebuilt;
    for (std::size_t i = 0; i < pick.size(); ++i) {
      if (pick[i] == c) { out.image[i] = img[i]; }
    }
  }
  return out;
}

/*
 * Field map implied by a (corrected, uncorrected) pair: blur `corrected` with
 * each candidate global frequency and pick, per voxel, the frequency whose
 * simulated image is closest to `uncorrected` (windowed |difference|).
 */
inline FieldMap estimate_consistency_fieldmap(ComplexVolume const &corrected, ComplexVolume const &uncorrected,
                                              ConesTrajectory const &traj, AutofocusConfig const &cfg = {})
{
  cfg.validate();
  require_same_shape(corrected.shape(), uncorrected.shape(), "consistency field map");
  detail::require_matrix(traj, corrected.shape());
  Shape3 const shape = corrected.shape();
  Gridder const plan(traj.points(), traj.grid_size(), cfg.grid);
  KSpaceData const ks{plan.forward(corrected), {}};
  auto const freqs = cfg.candidates();
  auto const signal = detail::signal_mask(uncorrected, cfg.mask_fraction);

  RealVolume best(shape, std::numeric_limits<double>::infinity());
  FieldMap map(shape, 0.0);
  for (int c : detail::tie_order(freqs)) {
    auto const sim = grid_adjoint(plan, add_global_offres(ks, traj, freqs[c]), traj);
    RealVolume d(shape);
    for (std::size_t i = 0; i < d.size(); ++i) { d[i] = std::abs(sim[i] - uncorrected[i]); }
    d = box_sum(std::move(d), cfg.metric_window);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] < best[i]) {
        best[i] = d[i];
        map[i] = signal[i] ? freqs[c] : 0.0;
      }
    }
  }
  return map;
}

} // namespace offres
