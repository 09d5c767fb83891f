#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "doctest.h"
#include "helpers.hpp"
#include "visbound/domain.hpp"
#include "visbound/error.hpp"
#include "visbound/frostman.hpp"

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

// The DomainDecomp keeps a pointer to the space; rebuild it after moves.
struct DiskCase {
  testkit::Scene s;
  std::unique_ptr<DomainDecomp> dd;
  VertexId z0 = 0;
  explicit DiskCase(int n) : s(testkit::scene({n, 1.1}, testkit::in_disk)) {
    dd = std::make_unique<DomainDecomp>(decompose(s.space, s.interior));
    z0 = testkit::nearest_vertex(s.space, 0.0, 0.0);
  }
};

// Levels {1; 2, 2; 1, 3 / 2, 2} with prescribed ball masses.
GenerationTree hand_tree() {
  GenerationTree t;
  t.r = 1.0;
  t.eta = 0.125;
  Generation l0, l1, l2;
  GenPoint root;
  root.ball_mass = 1.0;
  root.children = {0, 1};
  l0.points = {root};
  GenPoint a, b;
  a.ball_mass = 2.0;
  a.parent = 0;
  a.children = {0, 1};
  b.ball_mass = 2.0;
  b.parent = 0;
  b.children = {2, 3};
  l1.points = {a, b};
  for (auto [m, par] : {std::pair{1.0, 0u}, {3.0, 0u}, {2.0, 1u}, {2.0, 1u}}) {
    GenPoint p;
    p.ball_mass = m;
    p.parent = par;
    l2.points.push_back(p);
  }
  t.levels = {l0, l1, l2};
  return t;
}

double dist(const SpaceGraph& g, VertexId a, VertexId b) {
  BallSearch s(g);
  return s.distance(a, b);
}

}  // namespace

TEST_SUITE("frostman") {

TEST_CASE("weight recursion on a hand-built tree") {
  const auto t = hand_tree();
  const auto nu = frostman_weights(t);
  REQUIRE(nu.a.size() == 3);
  CHECK(nu.a[0][0] == 1.0);
  CHECK(std::abs(nu.a[1][0] - 0.5) <= 1e-15);
  CHECK(std::abs(nu.a[1][1] - 0.5) <= 1e-15);
  const double expect[4] = {0.5 * 1.0 / 4.0, 0.5 * 3.0 / 4.0, 0.5 * 2.0 / 4.0, 0.5 * 2.0 / 4.0};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(nu.a[2][i] - expect[i]) <= 1e-15);
  for (double m : nu.level_mass) CHECK(std::abs(m - 1.0) <= 1e-12);

  const auto nu0 = frostman_weights(t, 0);
  CHECK(nu0.a.size() == 1);
  CHECK(nu0.atoms()[0] == 1.0);
}

TEST_CASE("childless weighted point is orphaned mass") {
  auto t = hand_tree();
  t.levels[1].points[1].children.clear();
  CHECK(error_code([&] { frostman_weights(t); }) == "orphaned-mass");
  CHECK_NOTHROW(frostman_weights(t, 1));
}

TEST_CASE("argument contracts") {
  DiskCase d(41);
  const auto tol = Tolerances::grid(d.s.space.h());
  GenerationOptions opt;
  opt.eta = 0.01;
  opt.strict = true;
  CHECK(error_code([&] { build_generations(*d.dd, d.z0, opt, tol); }) == "invalid-eta");
  opt.eta = 1.5;
  opt.strict = false;
  CHECK(error_code([&] { build_generations(*d.dd, d.z0, opt, tol); }) == "invalid-eta");
  opt.eta = 0.25;
  CHECK(error_code([&] { build_generations(*d.dd, d.dd->boundary()[0], opt, tol); }) ==
        "center-outside");
  const VertexId w = d.dd->nearest_boundary(d.z0);
  const double h = d.s.space.h();
  CHECK(error_code([&] { well_placed_family(*d.dd, w, 4.0 * h, 0.25, {d.z0, h}, tol); }) ==
        "scale-unresolved");
}

TEST_CASE("resolution guard truncates the depth") {
  DiskCase d(61);
  GenerationOptions opt;
  opt.eta = 0.25;
  opt.depth = 6;
  const auto t = build_generations(*d.dd, d.z0, opt, Tolerances::grid(d.s.space.h()));
  CHECK(t.resolution_truncated);
  CHECK(t.depth() < 6);
  CHECK(t.levels.back().radius >= 2.0 * d.s.space.h() * (1.0 - 1e-12));
}

TEST_CASE("window away from the boundary gives an empty family") {
  DiskCase d(81);
  const double h = d.s.space.h();
  const auto fam = well_placed_family(*d.dd, d.z0, 12.0 * h, 0.25, {d.z0, 3.0 * h},
                                      Tolerances::grid(h));
  CHECK(fam.balls.empty());
  const auto closure = chainable_closure(*d.dd, fam, {d.z0, 3.0 * h}, d.z0, 24.0 * h);
  CHECK(closure.balls.size() == 1);
  CHECK(closure.extra() == 0);
}

TEST_CASE("well-placed families on the disk: invariants, maximality, determinism") {
  DiskCase d(101);
  const auto& dd = *d.dd;
  const auto tol = Tolerances::grid(d.s.space.h());
  const VertexId w0 = dd.nearest_boundary(d.z0);
  const double r = dd.d_omega(d.z0);
  const Ball seed{d.z0, 0.25 * r};
  const auto fam = well_placed_family(dd, w0, r, 0.25, seed, tol);
  CHECK(fam.balls.size() >= 1);
  const auto chk = check_well_placed(dd, fam, w0, r, 0.25, seed, tol);
  CHECK(chk.inside);
  CHECK(chk.separated);
  CHECK(chk.contact);
  CHECK(chk.maximal);
  CHECK(chk.candidates >= fam.balls.size());
  const auto again = well_placed_family(dd, w0, r, 0.25, seed, tol);
  REQUIRE(again.balls.size() == fam.balls.size());
  for (std::size_t i = 0; i < fam.balls.size(); ++i) {
    CHECK(again.balls[i].center == fam.balls[i].center);
    CHECK(again.contacts[i] == fam.contacts[i]);
  }

  // Closure: connected, every family ball chained to the seed, and minimal.
  const auto cl = chainable_closure(dd, fam, seed, w0, 2.0 * r);
  CHECK(chain_connected(cl));
  CHECK(cl.chains.size() == fam.balls.size());
  for (const auto& ch : cl.chains) {
    CHECK(ch.back() == 0u);
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
      const auto& adj = cl.adjacency[ch[i]];
      CHECK(std::find(adj.begin(), adj.end(), ch[i + 1]) != adj.end());
    }
  }
  for (std::uint32_t i = static_cast<std::uint32_t>(1 + cl.family_count); i < cl.balls.size(); ++i)
    CHECK_FALSE(chain_connected(cl, i));
  // Chain adjacency means centre in the closed ball.
  for (std::uint32_t i = 0; i < cl.balls.size(); ++i)
    for (auto j : cl.adjacency[i])
      CHECK(dist(d.s.space, cl.balls[i].center, cl.balls[j].center) <= cl.radius * (1 + 1e-9));
}

TEST_CASE("corridor: chain length tracks distance over radius") {
  // Long horizontal corridor; seed at the left end, one ball at the right end.
  const testkit::Canvas cv{160, 1.0};
  auto s = testkit::scene(cv, [](double x, double y) { return std::abs(y) < 0.1 && std::abs(x) < 0.95; });
  const auto dd = decompose(s.space, s.interior);
  const auto left = testkit::nearest_vertex(s.space, -0.8, 0.0);
  const auto right = testkit::nearest_vertex(s.space, 0.8, 0.0);
  const double rad = 0.05;
  BallFamily fam;
  fam.radius = rad;
  fam.balls = {{right, rad}};
  fam.contacts = {dd.nearest_boundary(right)};
  const auto cl = chainable_closure(dd, fam, {left, rad}, left, 3.0);
  const double D = dist(s.space, left, right);
  const double hops = static_cast<double>(cl.chains[0].size() - 1);
  CHECK(hops >= D / rad - 1e-9);
  CHECK(hops <= D / rad + 3.0);
  CHECK(cl.extra() + 2 == cl.balls.size());
}

TEST_CASE("generation tree on the disk: separation, parents, mass, telescoping, chains") {
  DiskCase d(161);
  const auto& dd = *d.dd;
  const auto& g = d.s.space;
  const double h = g.h();
  const auto tol = Tolerances::grid(h);
  GenerationOptions opt;
  opt.eta = 1.0 / 6.0;
  opt.depth = 2;
  const auto t = build_generations(dd, d.z0, opt, tol);
  REQUIRE(t.depth() == 2);
  CHECK_FALSE(t.starved);
  CHECK(t.levels[1].points.size() >= 2);
  CHECK(t.levels[2].points.size() >= 1);

  for (std::size_t k = 1; k <= t.depth(); ++k) {
    const auto& lv = t.levels[k];
    CHECK(lv.min_separation >= 8.0 * lv.radius - 2.0 * h);
    for (std::size_t i = 0; i < lv.points.size(); ++i) {
      const auto& p = lv.points[i];
      CHECK(dd.is_boundary(p.w));
      const auto& par = t.levels[k - 1].points[p.parent];
      CHECK(dist(g, p.w, par.w) < 2.0 * t.levels[k - 1].radius + h);
      CHECK(std::find(par.children.begin(), par.children.end(), i) != par.children.end());
      CHECK(p.chain.front() == p.center);
      CHECK(p.chain.back() == par.center);
    }
    for (const auto& fam : lv.families) CHECK(chain_connected(fam));
  }

  const auto nu = frostman_weights(t);
  for (double m : nu.level_mass) CHECK(std::abs(m - 1.0) <= 1e-12);
  for (std::size_t k = 0; k < t.depth(); ++k) {
    for (std::size_t i = 0; i < t.levels[k].points.size(); ++i) {
      double s = 0.0;
      for (auto c : t.levels[k].points[i].children) s += nu.a[k + 1][c];
      CHECK(std::abs(s - nu.a[k][i]) <= 1e-15);
    }
  }
  for (std::size_t k1 = 0; k1 <= t.depth(); ++k1)
    for (std::size_t k2 = k1; k2 <= t.depth(); ++k2) {
      const auto rep = verify_telescoping(dd, t, nu, k1, k2);
      CAPTURE(k1);
      CAPTURE(k2);
      CHECK(rep.ok);
    }

  const auto cb = chain_bound(dd, t);
  CHECK(cb.ok);
  CHECK(cb.M >= 1);
  CHECK(cb.M_john >= 4);

  const auto fb = verify_frostman_bound(dd, t, nu, 1.5, 1.25, 16, 3);
  CHECK(fb.finite);
  CHECK(fb.eps == doctest::Approx(0.25));
  CHECK(fb.radii.front() == doctest::Approx(4.0 * h));
  CHECK(fb.radii.back() == doctest::Approx(t.r));

  // Bit-identical rebuild.
  const auto t2 = build_generations(dd, d.z0, opt, tol);
  const auto nu2 = frostman_weights(t2);
  REQUIRE(t2.levels.size() == t.levels.size());
  for (std::size_t k = 0; k < t.levels.size(); ++k) {
    REQUIRE(t2.levels[k].points.size() == t.levels[k].points.size());
    for (std::size_t i = 0; i < t.levels[k].points.size(); ++i) {
      CHECK(t2.levels[k].points[i].w == t.levels[k].points[i].w);
      CHECK(nu2.a[k][i] == nu.a[k][i]);
    }
  }
}

TEST_CASE("John curves from generation points") {
  DiskCase d(161);
  const auto& dd = *d.dd;
  const double h = d.s.space.h();
  const auto tol = Tolerances::grid(h);
  GenerationOptions opt;
  opt.eta = 1.0 / 6.0;
  const auto t = build_generations(dd, d.z0, opt, tol);
  const auto cb = chain_bound(dd, t);

  const auto c0 = john_curve_from_generation(dd, t, 0, 0, cb.M_john, tol);
  CHECK(c0.curve.front() == d.z0);
  CHECK(c0.curve.back() == t.w0);
  CHECK(verify_john_curve(dd, c0.curve, 1.0, tol).ok);

  const double c_cone = 8.0 * cb.M_john + 1.0;
  const auto vis = visible_boundary(dd, d.z0, c_cone, tol, true);
  for (std::size_t k = 0; k <= t.depth(); ++k) {
    for (std::size_t i = 0; i < t.levels[k].points.size(); ++i) {
      const auto gc = john_curve_from_generation(dd, t, k, i, cb.M_john, tol);
      CHECK(gc.check.ok);
      CHECK(gc.chain_ok);
      CHECK(gc.curve.front() == d.z0);
      CHECK(gc.curve.back() == t.levels[k].points[i].w);
      CHECK(vis.flag[t.levels[k].points[i].w]);
    }
  }
  const auto last = john_curve_from_generation(dd, t, t.depth(), 0, cb.M_john, tol);
  const auto cone = cone_domain(dd, last.curve, c_cone, tol);
  CHECK(cone.certified);
  CHECK(cone.min_quality >= 1.0 / c_cone);
}

}  // TEST_SUITE
