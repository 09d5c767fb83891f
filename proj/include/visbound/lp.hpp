#pragma once

#include <cstddef>
#include <vector>

namespace visb {

struct LpResult {
  bool optimal = false;
  bool unbounded = false;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

/// Dense primal simplex for packing-type programs:
///   maximise c.x  subject to  A x <= b,  x >= 0,  with b >= 0.
/// The slack basis is feasible, so no phase one is needed. Dantzig pricing,
/// switching to Bland's rule after a run of degenerate pivots.
/// A is row-major with rows.size() == b.size().
LpResult maximize_packing(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                          const std::vector<double>& c, std::size_t max_pivots = 200000);

}  // namespace visb
