#include "visbound/generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

#include "visbound/error.hpp"
#include "visbound/mask_io.hpp"

namespace visb {
namespace {

constexpr double kPi = std::numbers::pi;

using Point = std::array<double, 2>;
using Predicate = std::function<bool(double, double)>;

GeneratedDomain canvas(const DomainSpec& s, const Predicate& inside) {
  if (!(s.h > 0.0) || !(s.extent > 0.0))
    throw Error("invalid-domain-params", "h and extent must be positive");
  const double cells = std::ceil(2.0 * s.extent / s.h - 1e-9);
  if (cells > 20000.0) throw Error("invalid-domain-params", "canvas too large");
  const int n = std::max(2, static_cast<int>(cells));
  GeneratedDomain d;
  d.name = s.name;
  d.frame = {-0.5 * n * s.h + 0.5 * s.h, -0.5 * n * s.h + 0.5 * s.h, s.h};
  d.ambient = BoolRaster(n, n, true);
  d.interior = BoolRaster(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const auto p = d.frame.position(r, c);
      d.interior.set(r, c, inside(p[0], p[1]));
    }
  return d;
}

// Distance range from the origin over the closed cell square around p.
std::array<double, 2> cell_radial_range(const Point& p, double h) {
  const double hx = 0.5 * h;
  const double nx = std::max(0.0, std::abs(p[0]) - hx), ny = std::max(0.0, std::abs(p[1]) - hx);
  const double fx = std::abs(p[0]) + hx, fy = std::abs(p[1]) + hx;
  return {std::hypot(nx, ny), std::hypot(fx, fy)};
}

std::vector<Point> koch_polygon(int level) {
  std::vector<Point> poly;
  for (int i = 0; i < 3; ++i) {
    const double a = kPi / 2 + 2.0 * kPi * i / 3;
    poly.push_back({std::cos(a), std::sin(a)});
  }
  const double c60 = 0.5, s60 = -std::sqrt(3.0) / 2;  // rotation by -60 degrees
  for (int l = 0; l < level; ++l) {
    std::vector<Point> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point a = poly[i], b = poly[(i + 1) % poly.size()];
      const Point d{(b[0] - a[0]) / 3, (b[1] - a[1]) / 3};
      const Point p1{a[0] + d[0], a[1] + d[1]};
      const Point p3{a[0] + 2 * d[0], a[1] + 2 * d[1]};
      const Point p2{p1[0] + c60 * d[0] - s60 * d[1], p1[1] + s60 * d[0] + c60 * d[1]};
      next.insert(next.end(), {a, p1, p2, p3});
    }
    poly = std::move(next);
  }
  return poly;
}

bool in_polygon(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
  }
  return in;
}

GeneratedDomain from_file(const DomainSpec& s) {
  if (!(s.h > 0.0)) throw Error("invalid-domain-params", "h must be positive");
  GeneratedDomain d;
  d.name = s.name;
  d.interior = read_mask(s.path);
  d.ambient = BoolRaster(d.interior.rows, d.interior.cols, true);
  d.frame = {-0.5 * d.interior.cols * s.h + 0.5 * s.h, -0.5 * d.interior.rows * s.h + 0.5 * s.h, s.h};
  return d;
}

}  // namespace

const std::vector<std::string>& domain_names() {
  static const std::vector<std::string> names{"disk",           "annulus",
                                              "slit_disk",      "comb",
                                              "punctured_disk", "koch_flake_interior",
                                              "mask_file"};
  return names;
}

bool angle_in_arc(double theta, double alpha, double beta) {
  double phi = std::fmod(theta - alpha, 2.0 * kPi);
  if (phi < 0.0) phi += 2.0 * kPi;
  return phi <= beta - alpha;
}

std::vector<CombArc> comb_arcs(int teeth) {
  std::vector<CombArc> arcs;
  for (int n = 2; n <= teeth; ++n) {
    const double inv = 1.0 / n;
    CombArc a;
    a.n = n;
    a.radius = 1.0 - inv;
    if (n % 2 == 0) {
      a.alpha = inv - kPi;
      a.beta = kPi - inv;
    } else {
      a.alpha = inv;
      a.beta = 2.0 * kPi - inv;
    }
    arcs.push_back(a);
  }
  return arcs;
}

GeneratedDomain generate_domain(const DomainSpec& s) {
  const double h = s.h;
  if (s.name == "disk") {
    if (!(s.radius > 0.0 && s.radius < s.extent))
      throw Error("invalid-domain-params", "disk radius must lie in (0, extent)");
    const double R = s.radius;
    auto d = canvas(s, [R](double x, double y) { return x * x + y * y < R * R; });
    d.inradius_hint = R;
    return d;
  }
  if (s.name == "annulus") {
    if (!(s.inner_radius > 0.0 && s.inner_radius < 1.0))
      throw Error("invalid-domain-params", "annulus inner radius must lie in (0, 1)");
    const double a = s.inner_radius;
    auto d = canvas(s, [a](double x, double y) {
      const double r2 = x * x + y * y;
      return r2 < 1.0 && r2 > a * a;
    });
    d.inradius_hint = 0.5 * (1.0 - a);
    return d;
  }
  // Half-cell band, closed up to rounding so a centre line on a cell edge
  // marks both neighbouring rows.
  const double half = 0.5 * h * (1.0 + 1e-9);
  if (s.name == "slit_disk") {
    auto d = canvas(s, [half](double x, double y) {
      if (x * x + y * y >= 1.0) return false;
      return !(x >= -half && std::abs(y) <= half);
    });
    d.inradius_hint = 0.5;
    return d;
  }
  if (s.name == "comb") {
    if (s.teeth < 2) throw Error("invalid-domain-params", "comb needs at least 2 teeth");
    const double N = s.teeth;
    // Narrowest corridor is between the last two arcs; openings are wider.
    const double corridor = std::min(1.0 / (N * (N + 1.0)), 1.0 / N);
    if (corridor < 3.0 * h) throw Error("teeth-unresolved", "comb corridors narrower than 3 cells");
    const auto arcs = comb_arcs(s.teeth);
    auto d = canvas(s, [&](double x, double y) {
      if (x * x + y * y >= 1.0) return false;
      const auto range = cell_radial_range({x, y}, h);
      const double theta = std::atan2(y, x);
      for (const auto& a : arcs)
        if (range[0] <= a.radius && a.radius <= range[1] && angle_in_arc(theta, a.alpha, a.beta))
          return false;
      return true;
    });
    d.inradius_hint = 0.5;
    return d;
  }
  if (s.name == "punctured_disk") {
    if (!(s.puncture_radius >= 0.0 && s.puncture_radius < 1.0))
      throw Error("invalid-domain-params", "puncture radius must lie in [0, 1)");
    const double pr = s.puncture_radius;
    auto d = canvas(s, [pr, half](double x, double y) {
      const double r = std::hypot(x, y);
      if (r >= 1.0) return false;
      if (pr > 0.0) return r > pr;
      return !(std::abs(x) <= half && std::abs(y) <= half);
    });
    d.inradius_hint = 0.5 * (1.0 - pr);
    return d;
  }
  if (s.name == "koch_flake_interior") {
    if (s.koch_level < 0 || s.koch_level > 6)
      throw Error("invalid-domain-params", "koch level must lie in [0, 6]");
    const auto poly = koch_polygon(s.koch_level);
    auto d = canvas(s, [&poly](double x, double y) { return in_polygon(poly, x, y); });
    d.inradius_hint = 0.5;
    return d;
  }
  if (s.name == "mask_file") return from_file(s);
  throw Error("unknown-domain", "unknown domain generator '" + s.name + "'");
}

DomainInstance realize(const GeneratedDomain& d) {
  DomainInstance out{build_grid_space(d.ambient, d.frame, {}), {}};
  out.interior.resize(out.space.size());
  for (VertexId v = 0; v < out.space.size(); ++v) {
    const auto p = out.space.position(v);
    const int c = static_cast<int>(std::lround((p[0] - d.frame.origin_x) / d.frame.h));
    const int r = static_cast<int>(std::lround((p[1] - d.frame.origin_y) / d.frame.h));
    out.interior[v] = d.interior.at(r, c) ? 1 : 0;
  }
  return out;
}

}  // namespace visb
