#pragma once

#include <cmath>

namespace visb {

/// Maximum ratio between the octile (8-neighbour) grid metric and the
/// Euclidean metric: sqrt(4 - 2*sqrt(2)).
inline const double kOctileDistortion = std::sqrt(4.0 - 2.0 * std::sqrt(2.0));

/// Every rasterisation slack used by the geometric tests lives here.
struct Tolerances {
  /// Additive length slack where continuum identities meet the raster.
  double length_slack = 0.0;
  /// Multiplicative metric distortion allowed in twisted-cone tests.
  double distortion = 1.0;
  /// Tangency slack: a ball "touches" a set when it comes within this length.
  double contact = 0.0;

  /// Default slacks for an 8-neighbour grid of cell size h (2h / octile / h).
  static Tolerances grid(double h) { return {2.0 * h, kOctileDistortion, h}; }
  /// No slack at all (exact graphs, brute-force comparisons).
  static Tolerances exact() { return {0.0, 1.0, 0.0}; }
};

}  // namespace visb
