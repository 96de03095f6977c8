#pragma once

#include "trajectory.hpp"
#include "volume.hpp"

#include <string>
#include <vector>

namespace offres {

/// Complex samples aligned index-for-index with a trajectory.
struct KSpaceData
{
  std::vector<Cx> values;
  std::string traj_ref; // file the data was acquired on, empty when in-memory

  std::size_t size() const { return values.size(); }
};

inline void require_aligned(KSpaceData const &ks, ConesTrajectory const &traj)
{
  require(ks.values.size() == traj.size(), "k-space data length " + std::to_string(ks.values.size()) +
                                             " does not match trajectory length " + std::to_string(traj.size()));
}

} // namespace offres
