#pragma once

#include "filters.hpp"
#include "volume.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace offres {

// All image-quality metrics compare magnitude images.

inline double nrmse(ComplexVolume const &x, ComplexVolume const &ref)
{
  require_same_shape(x.shape(), ref.shape(), "nrmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const r = std::abs(ref[i]);
    double const d = std::abs(x[i]) - r;
    num += d * d;
    den += r * r;
  }
  require(den > 0.0, "nrmse reference has zero norm");
  return std::sqrt(num / den);
}

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 20 log10(max|ref| / rmse); returns kPsnrIdentical when the magnitudes agree exactly.
inline double psnr(ComplexVolume const &x, ComplexVolume const &ref)
{
  require_same_shape(x.shape(), ref.shape(), "psnr");
  double const peak = max_abs(ref);
  require(peak > 0.0, "psnr reference is all zero");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const d = std::abs(x[i]) - std::abs(ref[i]);
    se += d * d;
  }
  if (se == 0.0) { return kPsnrIdentical; }
  return 20.0 * std::log10(peak / std::sqrt(se / x.size()));
}

struct SsimOptions
{
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 0.0; // <= 0 means max |ref|
};

/// Mean structural similarity with Gaussian-weighted local statistics (weights renormalized at borders).
inline double ssim(ComplexVolume const &x, ComplexVolume const &ref, SsimOptions const &opt = {})
{
  require_same_shape(x.shape(), ref.shape(), "ssim");
  double const L = opt.dynamic_range > 0.0 ? opt.dynamic_range : max_abs(ref);
  double const c1 = (opt.k1 * L) * (opt.k1 * L), c2 = (opt.k2 * L) * (opt.k2 * L);
  Shape3 const s = x.shape();
  RealVolume a(s), b(s), aa(s), bb(s), ab(s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = std::abs(x[i]);
    b[i] = std::abs(ref[i]);
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  auto const smooth = [&](RealVolume v) { return gaussian_smooth(std::move(v), opt.window_sigma, Border::renormalize); };
  auto const ma = smooth(a), mb = smooth(b), saa = smooth(aa), sbb = smooth(bb), sab = smooth(ab);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
    double const num = (2 * ma[i] * mb[i] + c1) * (2 * cov + c2);
    double const den = (ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2);
    total += den > 0.0 ? num / den : 1.0;
  }
  return total / x.size();
}

/// Repeatedly applies `step`, returning the iterates and each consecutive
/// difference norm divided by the first one.
struct IterateResult
{
  std::vector<ComplexVolume> volumes; // v0 .. vn
  std::vector<double> diff_nrms;      // ||v_{k+1} - v_k|| / ||v_1 - v_0||, k = 0 .. n-1
};

inline IterateResult iterate_apply(std::function<ComplexVolume(ComplexVolume const &)> const &step,
                                   ComplexVolume const &vol, int n = 4)
{
  require(n >= 2, "iterate_apply needs n >= 2");
  IterateResult r;
  r.volumes.push_back(vol);
  std::vector<double> raw;
  for (int k = 0; k < n; ++k) {
    r.volumes.push_back(step(r.volumes.back()));
    auto const &p = r.volumes[r.volumes.size() - 2], &q = r.volumes.back();
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) { s += std::norm(q[i] - p[i]); }
    raw.push_back(std::sqrt(s));
  }
  for (double d : raw) { r.diff_nrms.push_back(raw.front() > 0.0 ? d / raw.front() : 0.0); }
  return r;
}

} // namespace offres
