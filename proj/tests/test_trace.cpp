#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "visbound/domain.hpp"
#include "visbound/error.hpp"
#include "visbound/frostman.hpp"
#include "visbound/trace.hpp"

using namespace visb;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

// Path 0 - 1 - ... - (n-1), unit spacing and mass; interior = 1..n-2.
struct PathCase {
  SpaceGraph g;
  std::unique_ptr<DomainDecomp> dd;
  explicit PathCase(int n) : g(make(n)) {
    std::vector<std::uint8_t> in(n, 1);
    in[0] = in[n - 1] = 0;
    dd = std::make_unique<DomainDecomp>(decompose(g, in));
  }
  static SpaceGraph make(int n) {
    std::vector<std::array<double, 3>> e;
    for (int i = 0; i + 1 < n; ++i) e.push_back({double(i), double(i + 1), 1.0});
    std::vector<std::array<double, 2>> pos;
    for (int i = 0; i < n; ++i) pos.push_back({double(i), 0.0});
    return SpaceGraph::from_edges(n, e, std::vector<double>(n, 1.0), 1.0, pos);
  }
};

struct DiskTree {
  testkit::Scene s;
  std::unique_ptr<DomainDecomp> dd;
  VertexId z0 = 0;
  std::vector<VertexId> atoms;
  std::vector<double> weights;
  DiskTree(int n, int depth) : s(testkit::scene({n, 1.1}, testkit::in_disk)) {
    dd = std::make_unique<DomainDecomp>(decompose(s.space, s.interior));
    z0 = testkit::nearest_vertex(s.space, 0.0, 0.0);
    GenerationOptions opt;
    opt.eta = 1.0 / 6.0;
    opt.depth = depth;
    const auto t = build_generations(*dd, z0, opt, Tolerances::grid(s.space.h()));
    const auto nu = frostman_weights(t);
    for (const auto& p : t.levels.back().points) atoms.push_back(p.w);
    weights = nu.atoms();
  }
  std::vector<double> field(const std::function<double(VertexId)>& f) const {
    std::vector<double> u(s.space.size());
    for (VertexId v = 0; v < u.size(); ++v) u[v] = f(v);
    return u;
  }
};

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("minimal upper gradient: constants, distance, coordinates") {
  DiskTree d(61, 1);
  const auto& dd = *d.dd;
  const auto& g = d.s.space;
  const auto c = d.field([](VertexId) { return 2.5; });
  for (double x : minimal_upper_gradient(dd, c)) CHECK(x == 0.0);

  const auto dist = d.field([&](VertexId v) { return dd.d_omega(v); });
  const auto gd = minimal_upper_gradient(dd, dist);
  for (double x : gd) CHECK(x <= 1.0 + 1e-12);
  CHECK(is_upper_gradient(dd, dist, gd));

  const auto xs = d.field([&](VertexId v) { return g.position(v)[0]; });
  const auto gx = minimal_upper_gradient(dd, xs);
  std::size_t ones = 0;
  for (VertexId v : dd.interior()) {
    CHECK(gx[v] <= 1.0 + 1e-12);
    if (std::abs(gx[v] - 1.0) < 1e-12) ++ones;
  }
  CHECK(ones * 10 >= dd.interior().size() * 9);
  CHECK(is_upper_gradient(dd, xs, gx));
  auto low = gx;
  for (auto& x : low) x *= 0.5;
  CHECK_FALSE(is_upper_gradient(dd, xs, low));
}

TEST_CASE("trace values: constants, distance function, linearity, consistency") {
  DiskTree d(81, 1);
  const auto& dd = *d.dd;
  const auto& g = d.s.space;
  const double h = g.h();
  const auto radii = halving_radii(0.5, 2.0 * h);
  CHECK(radii.back() >= 2.0 * h * (1 - 1e-12));
  CHECK(radii.back() < 4.0 * h);
  std::vector<VertexId> support;
  for (std::size_t i = 0; i < dd.boundary().size(); i += 7) support.push_back(dd.boundary()[i]);

  const auto k = d.field([](VertexId) { return -1.25; });
  const auto tk = trace_values(dd, k, support, radii);
  for (std::size_t i = 0; i < support.size(); ++i) {
    CHECK(tk.value[i] == doctest::Approx(-1.25).epsilon(1e-14));
    CHECK(tk.gap[i] <= 1e-13);
  }

  const auto dist = d.field([&](VertexId v) { return dd.d_omega(v); });
  const auto td = trace_values(dd, dist, support, radii);
  const double rmin = radii.back();
  for (std::size_t i = 0; i < support.size(); ++i) {
    CHECK(td.value[i] >= 0.0);
    CHECK(td.value[i] <= rmin);
    CHECK(td.fine_gap[i] <= 2.0 * rmin);
  }

  const auto xs = d.field([&](VertexId v) { return g.position(v)[0]; });
  const auto ys = d.field([&](VertexId v) { return g.position(v)[1] * g.position(v)[1]; });
  std::vector<double> mix(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) mix[i] = 2.0 * xs[i] - 3.0 * ys[i];
  const auto tx = trace_values(dd, xs, support, radii);
  const auto ty = trace_values(dd, ys, support, radii);
  const auto tm = trace_values(dd, mix, support, radii);
  for (std::size_t i = 0; i < support.size(); ++i) {
    CHECK(tm.value[i] == doctest::Approx(2.0 * tx.value[i] - 3.0 * ty.value[i]).epsilon(1e-12));
    // x is 1-Lipschitz for the graph metric, which dominates the Euclidean one.
    CHECK(std::abs(tx.value[i] - g.position(support[i])[0]) <= rmin);
  }

  CHECK(error_code([&] { trace_values(dd, xs, support, {}); }) == "invalid-radii");
  CHECK(error_code([&] { trace_values(dd, xs, support, {0.0}); }) == "invalid-radii");
  const VertexId corner = testkit::nearest_vertex(g, -1.09, -1.09);
  const VertexId far[1] = {corner};
  CHECK(error_code([&] { trace_values(dd, xs, far, {2.0 * h}); }) == "isolated-boundary-point");
}

TEST_CASE("Besov seminorm: two atoms, constants, relabelling, S monotonicity, homogeneity") {
  const double d = 0.7, theta = 0.5, q = 3.0;
  const std::vector<double> dist{0.0, d, d, 0.0};
  const std::vector<double> w{0.5, 0.5};
  // Closed ball of radius 2d around either atom holds both.
  CHECK(besov_seminorm(dist, w, std::vector<double>{0.0, 1.0}, {theta, q, 2.0}) ==
        doctest::Approx(1.0 / (2.0 * std::pow(d, theta * q))).epsilon(1e-14));
  CHECK(besov_seminorm(dist, w, std::vector<double>{3.0, 3.0}, {theta, q, 2.0}) == 0.0);

  testkit::Rng rng(5);
  const std::size_t n = 12;
  std::vector<std::array<double, 2>> pts(n);
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
  std::vector<double> D(n * n), wt(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    wt[i] = 0.1 + rng.uniform();
    f[i] = rng.uniform();
    for (std::size_t j = 0; j < n; ++j)
      D[i * n + j] = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
  }
  const double base = besov_seminorm(D, wt, f, {theta, q, 2.0});
  CHECK(base > 0.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine);
  std::vector<double> D2(n * n), w2(n), f2(n);
  for (std::size_t i = 0; i < n; ++i) {
    w2[i] = wt[perm[i]];
    f2[i] = f[perm[i]];
    for (std::size_t j = 0; j < n; ++j) D2[i * n + j] = D[perm[i] * n + perm[j]];
  }
  CHECK(besov_seminorm(D2, w2, f2, {theta, q, 2.0}) == doctest::Approx(base).epsilon(1e-12));
  double prev = kInf;
  for (double S : {1.0, 1.5, 2.0, 4.0, 8.0}) {
    const double v = besov_seminorm(D, wt, f, {theta, q, S});
    CHECK(v <= prev);
    prev = v;
  }
  std::vector<double> f3(f);
  for (auto& x : f3) x *= 2.0;
  CHECK(besov_seminorm(D, wt, f3, {theta, q, 2.0}) ==
        doctest::Approx(std::pow(2.0, q) * base).epsilon(1e-12));
  CHECK(error_code([&] { besov_seminorm(D, w, f, {theta, q, 2.0}); }) == "atoms-mismatch");
}

TEST_CASE("restricted maximal function: constants and a hand-checked indicator") {
  PathCase pc(7);
  const auto& dd = *pc.dd;
  std::vector<std::uint8_t> all(7, 1);
  const std::vector<double> radii{0.5, 1.5, 2.5};
  const auto mk = restricted_maximal(dd, std::vector<double>(7, 0.75), all, radii);
  for (VertexId v : dd.interior()) CHECK(mk[v] == doctest::Approx(0.75));

  std::vector<double> ind(7, 0.0);
  ind[3] = 1.0;
  const auto m = restricted_maximal(dd, ind, all, radii);
  const double expect[7] = {0.0, 1.0 / 3, 1.0 / 3, 1.0, 1.0 / 3, 1.0 / 3, 0.0};
  for (int i = 0; i < 7; ++i) CHECK(m[i] == doctest::Approx(expect[i]));
  for (VertexId v : dd.interior()) CHECK(m[v] >= ind[v]);
  // Outside the window the indicator is invisible.
  std::vector<std::uint8_t> none(7, 0);
  for (double x : restricted_maximal(dd, ind, none, radii)) CHECK(x == 0.0);
}

TEST_CASE("Lq estimate on a hand instance") {
  PathCase pc(7);
  const VertexId atoms[2] = {0, 6};
  const double w[2] = {0.5, 0.5};
  TraceParams tp;
  tp.p = 1.5;
  tp.q_hat = 2.0;
  tp.q = 3.0;
  tp.c = 2.0;
  const std::vector<double> one(7, 1.0);
  const auto rep = verify_Lq_estimate(*pc.dd, 3, one, atoms, w, tp, Tolerances::exact());
  CHECK(rep.d0 == 3.0);
  CHECK(rep.trace.radii == std::vector<double>{3.0});
  CHECK(rep.trace.value[0] == 1.0);
  CHECK(rep.lq_trace == doctest::Approx(1.0));
  CHECK(rep.john_size == 5);
  CHECK(rep.lq_u == doctest::Approx(5.0));
  CHECK(rep.energy == 0.0);
  CHECK(rep.besov == 0.0);
  CHECK(rep.ratio_energy == 0.0);
  CHECK(rep.ratio_lq == doctest::Approx(std::pow(3.0, 1.5) / 5.0));
  CHECK(rep.tau == 5.0);
  CHECK(rep.alpha == doctest::Approx(1.75));

  const std::vector<double> zero(7, 0.0);
  const auto z = verify_Lq_estimate(*pc.dd, 3, zero, atoms, w, tp, Tolerances::exact());
  CHECK(z.lq_trace == 0.0);
  CHECK(z.ratio_lq == 0.0);
}

TEST_CASE("parameter validation") {
  PathCase pc(7);
  const VertexId atoms[1] = {0};
  const double w[1] = {1.0};
  const std::vector<double> u(7, 0.0);
  TraceParams tp;
  tp.q_hat = 3.5;
  CHECK(error_code([&] { verify_trace_energy(*pc.dd, 3, u, atoms, w, tp); }) == "invalid-exponents");
  tp = {};
  tp.c = 1.0;
  CHECK(error_code([&] { verify_trace_energy(*pc.dd, 3, u, atoms, w, tp); }) ==
        "invalid-john-constant");
  tp = {};
  CHECK(error_code([&] { verify_trace_energy(*pc.dd, 0, u, atoms, w, tp); }) == "center-outside");
}

TEST_CASE("trace energy on the disk: annihilation, homogeneity, finiteness, proof mode") {
  DiskTree d(161, 2);
  REQUIRE(d.atoms.size() >= 2);
  const auto& dd = *d.dd;
  const auto& g = d.s.space;
  const auto tol = Tolerances::grid(g.h());
  TraceParams tp;

  const auto k = d.field([](VertexId) { return 4.0; });
  const auto rk = verify_Lq_estimate(dd, d.z0, k, d.atoms, d.weights, tp, tol);
  CHECK(rk.besov == 0.0);
  CHECK(rk.energy == 0.0);
  CHECK(rk.ratio_energy == 0.0);
  CHECK(rk.lq_trace == doctest::Approx(std::pow(4.0, 3.0)));

  const auto xs = d.field([&](VertexId v) { return g.position(v)[0]; });
  auto x2 = xs;
  for (auto& x : x2) x *= 2.0;
  const auto r1 = verify_Lq_estimate(dd, d.z0, xs, d.atoms, d.weights, tp, tol);
  const auto r2 = verify_Lq_estimate(dd, d.z0, x2, d.atoms, d.weights, tp, tol);
  CHECK(std::isfinite(r1.ratio_energy));
  CHECK(r1.ratio_energy > 0.0);
  CHECK(std::isfinite(r1.ratio_lq));
  CHECK(r2.besov == doctest::Approx(8.0 * r1.besov).epsilon(1e-12));
  CHECK(r2.energy == doctest::Approx(8.0 * r1.energy).epsilon(1e-12));
  CHECK(std::abs(r2.ratio_energy - r1.ratio_energy) <= 1e-12 * r1.ratio_energy);
  CHECK(std::abs(r2.ratio_lq - r1.ratio_lq) <= 1e-12 * r1.ratio_lq);
  CHECK(r1.window_size == dd.interior().size());  // 10 c d0 covers the disk

}

TEST_CASE("proof-mode gradient dominates the minimal one") {
  DiskTree d(41, 1);
  TraceParams tp;
  tp.proof_mode = true;
  const auto& g = d.s.space;
  const auto u = d.field([&](VertexId v) { return g.position(v)[0] * g.position(v)[1]; });
  const auto pm = verify_trace_energy(*d.dd, d.z0, u, d.atoms, d.weights, tp);
  CHECK(pm.energy > 0.0);
  CHECK(pm.proof_energy >= pm.energy);
}

}  // TEST_SUITE
