#pragma once

#include <omp.h>

#include <algorithm>

namespace offres {

// Process-wide cap on worker threads. Every parallel region in the library
// reads this through thread_count().
inline int &thread_cap()
{
  static int cap = 0;
  return cap;
}

inline void set_threads(int n)
{
  thread_cap() = std::max(1, n);
  omp_set_num_threads(thread_cap());
}

inline int thread_count()
{
  return thread_cap() > 0 ? thread_cap() : omp_get_max_threads();
}

} // namespace offres
