#pragma once

#include "gridding.hpp"
#include "kspace.hpp"
#include "trajectory.hpp"

#include <cmath>
#include <vector>

namespace offres {

struct AdjointFlags
{
  bool use_dcf = true;
  bool normalize = true; // scale by 1/N^3 so an all-ones image reconstructs with unit mean
};

namespace detail {

inline void require_matrix(ConesTrajectory const &traj, Shape3 shape)
{
  require(shape == Shape3::cube(traj.grid_size()),
          "trajectory grid " + std::to_string(traj.grid_size()) + " does not match image shape " + shape.str());
}

inline std::vector<Cx> weighted(KSpaceData const &ks, ConesTrajectory const &traj, bool use_dcf)
{
  std::vector<Cx> v(ks.values);
  if (use_dcf) {
    auto const w = traj.dcf();
    for (std::size_t j = 0; j < v.size(); ++j) { v[j] *= w[j]; }
  }
  return v;
}

inline double recon_scale(int n, bool normalize)
{
  return normalize ? 1.0 / std::pow(static_cast<double>(n), 3) : 1.0;
}

} // namespace detail

/// Adjoint with a prebuilt plan; used when one trajectory is reconstructed many times.
inline ComplexVolume grid_adjoint(Gridder const &plan,
                                  KSpaceData const &ks,
                                  ConesTrajectory const &traj,
                                  AdjointFlags flags = {})
{
  require(ks.size() > 0, "cannot reconstruct zero-length k-space data");
  require_aligned(ks, traj);
  return plan.adjoint(detail::weighted(ks, traj, flags.use_dcf), detail::recon_scale(plan.matrix(), flags.normalize));
}

inline ComplexVolume grid_adjoint(KSpaceData const &ks,
                                  ConesTrajectory const &traj,
                                  Shape3 shape,
                                  GridOptions opt = {},
                                  AdjointFlags flags = {})
{
  require(ks.size() > 0 && traj.size() > 0, "cannot reconstruct zero-length k-space data");
  require_aligned(ks, traj);
  detail::require_matrix(traj, shape);
  Gridder const plan(traj.points(), traj.grid_size(), opt);
  return grid_adjoint(plan, ks, traj, flags);
}

inline KSpaceData grid_forward(ComplexVolume const &img, ConesTrajectory const &traj, GridOptions opt = {})
{
  require(traj.size() > 0, "cannot sample an empty trajectory");
  detail::require_matrix(traj, img.shape());
  Gridder const plan(traj.points(), traj.grid_size(), opt);
  return KSpaceData{plan.forward(img), {}};
}

inline constexpr double kDefaultOracleWork = 4e8;

/// Direct conjugate-phase sum (1/N^3) sum_j dcf_j s_j exp(+i 2 pi k_j . r / N).
inline ComplexVolume naive_adjoint_oracle(KSpaceData const &ks,
                                          ConesTrajectory const &traj,
                                          Shape3 shape,
                                          double max_work = kDefaultOracleWork)
{
  require_aligned(ks, traj);
  detail::require_matrix(traj, shape);
  int const n = traj.grid_size();
  double const work = static_cast<double>(ks.size()) * static_cast<double>(shape.voxels());
  require<SizeGuardError>(work <= max_work, "naive adjoint would need " + std::to_string(work) + " terms");

  ComplexVolume img(shape);
  double const scale = detail::recon_scale(n, true);
  // Separable phasors per sample; accumulate over samples for each z-plane.
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int z = 0; z < n; ++z) {
    std::vector<Cx> px(n), py(n);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      auto const &k = traj.k(j);
      Cx const c = ks.values[j] * traj.dcf()[j] * std::polar(1.0, kTwoPi * k[2] * (z - n / 2) / n);
      for (int i = 0; i < n; ++i) {
        px[i] = std::polar(1.0, kTwoPi * k[0] * (i - n / 2) / n);
        py[i] = std::polar(1.0, kTwoPi * k[1] * (i - n / 2) / n);
      }
      for (int y = 0; y < n; ++y) {
        Cx const cy = c * py[y];
        for (int x = 0; x < n; ++x) { img(x, y, z) += cy * px[x]; }
      }
    }
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) { img(x, y, z) *= scale; }
    }
  }
  return img;
}

struct RegridOptions
{
  GridOptions grid{};
  bool reuse_coincident = true; // copy values when source and target positions are identical
};

/// Moves data acquired on one trajectory onto another (adjoint then forward).
/// The result carries the target's timestamps.
inline KSpaceData regrid_to_trajectory(KSpaceData const &ks_src,
                                       ConesTrajectory const &traj_src,
                                       ConesTrajectory const &traj_dst,
                                       Shape3 shape,
                                       RegridOptions opt = {})
{
  require_aligned(ks_src, traj_src);
  require(traj_src.grid_size() == traj_dst.grid_size(), "regrid needs matching grid sizes");
  if (opt.reuse_coincident && traj_src.same_positions(traj_dst)) { return KSpaceData{ks_src.values, {}}; }
  ComplexVolume const img = grid_adjoint(ks_src, traj_src, shape, opt.grid);
  return grid_forward(img, traj_dst, opt.grid);
}

} // namespace offres
