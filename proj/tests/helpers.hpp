#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "visbound/space.hpp"

namespace testkit {

// Square raster of n x n cells covering [-ext, ext]^2 with cell centres at
// origin + (col, row) * h.
struct Canvas {
  int n;
  double ext;
  double h() const { return 2.0 * ext / n; }
  visb::GridFrame frame() const {
    const double o = -ext + 0.5 * h();
    return {o, o, h()};
  }
  visb::BoolRaster fill(const std::function<bool(double, double)>& inside) const {
    visb::BoolRaster m(n, n);
    const auto f = frame();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const auto p = f.position(r, c);
        m.set(r, c, inside(p[0], p[1]));
      }
    }
    return m;
  }
};

// Full square ambient space with a per-vertex interior predicate.
struct Scene {
  visb::SpaceGraph space;
  std::vector<std::uint8_t> interior;
};

inline Scene scene(const Canvas& cv, const std::function<bool(double, double)>& inside) {
  Scene s{visb::build_grid_space(cv.fill([](double, double) { return true; }), cv.frame(), {}),
          {}};
  s.interior.resize(s.space.size());
  for (visb::VertexId v = 0; v < s.space.size(); ++v) {
    const auto p = s.space.position(v);
    s.interior[v] = inside(p[0], p[1]) ? 1 : 0;
  }
  return s;
}

inline bool in_disk(double x, double y) { return x * x + y * y < 1.0; }

// Unit disk minus the horizontal slit [0,1] x {0}, slit one cell thick.
inline std::function<bool(double, double)> slit_disk(double h) {
  return [h](double x, double y) {
    if (!in_disk(x, y)) return false;
    return !(x >= -0.5 * h && std::abs(y) < 0.5 * h);
  };
}

inline visb::VertexId nearest_vertex(const visb::SpaceGraph& g, double x, double y) {
  visb::VertexId best = 0;
  double bd = 1e300;
  for (visb::VertexId v = 0; v < g.size(); ++v) {
    const auto p = g.position(v);
    const double d = std::hypot(p[0] - x, p[1] - y);
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine); }
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine);
  }
};

}  // namespace testkit
