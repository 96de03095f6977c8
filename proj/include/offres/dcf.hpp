#pragma once

#include "gridding.hpp"
#include "trajectory.hpp"

#include <algorithm>
#include <vector>

namespace offres {

struct DcfOptions
{
  int iterations = 10;
  double kernel_width = 4.0; // in units of the 2x oversampled grid
  double epsilon = 1e-12;    // floor for the density estimate
};

/// Density of weights w at each sample: sum_i w_i (K * K)(k_j - k_i) via the grid.
inline std::vector<double> sample_density(Gridder const &plan, std::span<double const> w)
{
  std::vector<Cx> v(w.begin(), w.end());
  FftBuffer grid(static_cast<std::size_t>(plan.grid()) * plan.grid() * plan.grid());
  plan.spread(v, grid);
  plan.interpolate(grid, v);
  std::vector<double> d(v.size());
  std::transform(v.begin(), v.end(), d.begin(), [](Cx const &c) { return c.real(); });
  return d;
}

/// Iterative density compensation w <- w / (C w), starting from the
/// trajectory's current weights, then rescaled to unit DC gain.
inline ConesTrajectory refine_dcf_pipemenon(ConesTrajectory const &traj, DcfOptions const &opt = {})
{
  require(opt.iterations >= 1, "dcf refinement needs at least one iteration");
  require(opt.epsilon > 0.0, "dcf epsilon must be positive");
  Gridder const plan(traj.points(), traj.grid_size(), GridOptions{2.0, opt.kernel_width});
  std::vector<double> w(traj.dcf().begin(), traj.dcf().end());
  if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) { std::fill(w.begin(), w.end(), 1.0); }
  for (int it = 0; it < opt.iterations; ++it) {
    auto const d = sample_density(plan, w);
    for (std::size_t j = 0; j < w.size(); ++j) { w[j] /= std::max(d[j], opt.epsilon); }
  }
  ConesTrajectory out = traj;
  out.set_dcf(normalize_dcf(traj.points(), std::move(w), traj.grid_size()));
  return out;
}

} // namespace offres
