#pragma once

#include "autofocus.hpp"
#include "forward.hpp"
#include "metrics.hpp"
#include "nn/patches.hpp"
#include "recon.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace offres {

/// A named correction applied to one off-resonant acquisition. It receives the
/// k-space and the plain reconstruction of that k-space.
struct Corrector
{
  std::string name;
  std::function<ComplexVolume(KSpaceData const &, ComplexVolume const &)> apply;
};

inline Corrector corrector_none()
{
  return {"none", [](KSpaceData const &, ComplexVolume const &img) { return img; }};
}

inline Corrector corrector_autofocus(ConesTrajectory const &traj, AutofocusConfig cfg = {})
{
  cfg.validate();
  return {"autofocus", [traj, cfg](KSpaceData const &ks, ComplexVolume const &img) {
            return autofocus_correct(ks, traj, img.shape(), cfg).image;
          }};
}

/// tile <= 0 runs the whole volume in one pass.
inline Corrector corrector_net(nn::NetParams<float> params, int tile = 0, int overlap = 0)
{
  return {"net", [p = std::move(params), tile, overlap](KSpaceData const &, ComplexVolume const &img) {
            return tile > 0 ? nn::apply_tiled(p, img, tile, overlap) : nn::net_forward(p, img);
          }};
}

/// Default sweep grid: 41 points uniform over +-1 kHz.
inline std::vector<double> default_sweep_freqs(double f_max = 1000.0, int n = 41)
{
  require(n >= 2 && f_max > 0.0, "sweep needs n >= 2 points over a positive range");
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) { f[i] = -f_max + 2.0 * f_max * i / (n - 1); }
  return f;
}

struct SweepRow
{
  double f_hz = 0.0;
  std::string method;
  double nrmse = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;
};

inline std::string format_sweep_row(SweepRow const &r)
{
  std::ostringstream o;
  o.precision(10);
  o << r.f_hz << "," << r.method << "," << r.nrmse << "," << r.ssim << ",";
  if (std::isinf(r.psnr_db)) {
    o << (r.psnr_db > 0 ? "inf" : "-inf");
  } else {
    o << r.psnr_db;
  }
  return o.str();
}

inline constexpr char kSweepHeader[] = "f_hz,method,nrmse,ssim,psnr_db";

/*
 * For every frequency (ascending) the reference k-space gets a global
 * off-resonance, is reconstructed, and each corrector (sorted by name) is scored
 * against the on-resonance reconstruction. With an output path, every row is
 * written and flushed as soon as it is computed.
 */
inline std::vector<SweepRow> sweep_eval(KSpaceData const &ks_ref,
                                        ConesTrajectory const &traj,
                                        std::vector<Corrector> correctors,
                                        std::vector<double> freqs,
                                        std::filesystem::path const &out_csv = {},
                                        GridOptions grid = {})
{
  require(!correctors.empty(), "sweep needs at least one corrector");
  require(!freqs.empty(), "sweep needs at least one frequency");
  require_aligned(ks_ref, traj);
  std::sort(correctors.begin(), correctors.end(), [](auto const &a, auto const &b) { return a.name < b.name; });
  for (std::size_t i = 1; i < correctors.size(); ++i) {
    require(correctors[i].name != correctors[i - 1].name, "duplicate corrector " + correctors[i].name);
  }
  std::sort(freqs.begin(), freqs.end());

  Gridder const plan(traj.points(), traj.grid_size(), grid);
  auto const reference = grid_adjoint(plan, ks_ref, traj);

  std::ofstream csv;
  if (!out_csv.empty()) {
    if (out_csv.has_parent_path()) { std::filesystem::create_directories(out_csv.parent_path()); }
    csv.open(out_csv);
    if (!csv) { throw IoError("cannot write " + out_csv.string()); }
    csv << kSweepHeader << "\n" << std::flush;
  }
  std::vector<SweepRow> rows;
  for (double f : freqs) {
    auto const ks = add_global_offres(ks_ref, traj, f);
    auto const plain = grid_adjoint(plan, ks, traj);
    for (auto const &c : correctors) {
      auto const img = c.apply(ks, plain);
      SweepRow r{f, c.name, nrmse(img, reference), ssim(img, reference), psnr(img, reference)};
      if (csv.is_open()) {
        csv << format_sweep_row(r) << "\n" << std::flush;
        if (!csv) { throw IoError("write failed for " + out_csv.string()); }
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

/// Feeds the network its own output n times.
inline IterateResult iterate_apply(nn::NetParams<float> const &p, ComplexVolume const &vol, int n = 4, int tile = 0, int overlap = 0)
{
  return iterate_apply(
    [&](ComplexVolume const &v) { return tile > 0 ? nn::apply_tiled(p, v, tile, overlap) : nn::net_forward(p, v); }, vol, n);
}

} // namespace offres
