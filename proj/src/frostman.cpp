#include "visbound/frostman.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "visbound/error.hpp"

namespace visb {
namespace {

constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

// Closed ball radius: distances equal to r up to rounding count as inside.
double closed(double r) { return r * (1.0 + 1e-9); }

// Admissible chain centres and minimal hop counts from the seed.
struct ChainSpace {
  double radius = 0.0;
  std::vector<double> dw;             // distance to the window centre, +inf outside the window
  std::vector<std::uint8_t> admissible;
  std::vector<std::uint32_t> hop;
  std::vector<VertexId> parent;
};

ChainSpace chain_space(const DomainDecomp& dd, BallSearch& search, VertexId w,
                       double window_radius, const Ball& seed) {
  const SpaceGraph& g = dd.space();
  ChainSpace cs;
  cs.radius = seed.radius;
  cs.dw.assign(g.size(), kInf);
  cs.admissible.assign(g.size(), 0);
  cs.hop.assign(g.size(), kUnreached);
  cs.parent.assign(g.size(), kNoVertex);
  for (const auto& r : search.members({w, window_radius})) {
    cs.dw[r.vertex] = r.dist;
    if (dd.is_interior(r.vertex) && !inside_open_ball(dd.d_omega(r.vertex), seed.radius))
      cs.admissible[r.vertex] = 1;
  }
  if (seed.center >= g.size() || !cs.admissible[seed.center])
    throw Error("seed-outside", "seed ball is not an admissible chain ball");

  std::vector<VertexId> frontier{seed.center};
  cs.hop[seed.center] = 0;
  for (std::uint32_t level = 1; !frontier.empty(); ++level) {
    std::vector<VertexId> next;
    for (const auto& r : search.within(frontier, closed(seed.radius))) {
      const VertexId y = r.vertex;
      if (!cs.admissible[y] || cs.hop[y] != kUnreached) continue;
      cs.hop[y] = level;
      cs.parent[y] = search.source(y);
      next.push_back(y);
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  return cs;
}

void lower_field(BallSearch& search, std::vector<double>& field, VertexId x, double R) {
  for (const auto& r : search.members({x, R})) field[r.vertex] = std::min(field[r.vertex], r.dist);
}

struct Candidate {
  VertexId center;
  VertexId contact;
  double mass;
};

// Candidate centres in decreasing ball mass, then id. Masses are compared
// after quantisation so that summation noise cannot reorder equal balls.
std::vector<Candidate> candidates(const DomainDecomp& dd, BallSearch& search, const ChainSpace& cs,
                                  double rho, double radius, const Tolerances& tol) {
  std::vector<Candidate> out;
  for (VertexId x = 0; x < cs.dw.size(); ++x) {
    if (!cs.admissible[x] || cs.hop[x] == kUnreached) continue;
    if (!inside_open_ball(cs.dw[x], rho)) continue;
    if (dd.d_omega(x) > closed(radius + tol.contact)) continue;
    const VertexId c = dd.nearest_boundary(x);
    if (c == kNoVertex || std::isinf(cs.dw[c])) continue;
    out.push_back({x, c, search.mass({x, radius})});
  }
  double top = 0.0;
  for (const auto& c : out) top = std::max(top, c.mass);
  const double quantum = std::max(top, 1e-300) * 1e-12;
  std::sort(out.begin(), out.end(), [&](const Candidate& a, const Candidate& b) {
    const auto ka = std::llround(a.mass / quantum), kb = std::llround(b.mass / quantum);
    if (ka != kb) return ka > kb;
    return a.center < b.center;
  });
  return out;
}

// Distance fields of accepted centres and contacts, out to 8 * radius.
struct Blockers {
  double radius = 0.0;
  std::vector<double> near_center;
  std::vector<double> near_contact;

  Blockers(std::size_t n, double r) : radius(r), near_center(n, kInf), near_contact(n, kInf) {}

  void add(BallSearch& search, VertexId center, VertexId contact) {
    lower_field(search, near_center, center, 8.0 * radius);
    lower_field(search, near_contact, contact, 8.0 * radius);
  }

  bool blocked(BallSearch& search, VertexId center, VertexId contact) const {
    if (inside_open_ball(near_contact[contact], 8.0 * radius)) return true;
    if (!inside_open_ball(near_center[center], 8.0 * radius)) return false;
    // Exact test: some vertex lies in both 4-fold dilations.
    for (const auto& r : search.members({center, 4.0 * radius}))
      if (inside_open_ball(near_center[r.vertex], 4.0 * radius)) return true;
    return false;
  }
};

void check_eta(double eta, bool strict) {
  if (!(eta > 0.0 && eta < 1.0)) throw Error("invalid-eta", "eta must lie in (0, 1)");
  if (strict && !(eta < kStrictEtaCap))
    throw Error("invalid-eta", "strict mode requires eta < 1/168");
}

BallFamily select_family(const DomainDecomp& dd, BallSearch& search, const ChainSpace& cs,
                         double rho, double radius, const Tolerances& tol,
                         const BallFamily* taken) {
  BallFamily fam;
  fam.radius = radius;
  Blockers block(dd.space().size(), radius);
  if (taken != nullptr)
    for (std::size_t i = 0; i < taken->balls.size(); ++i)
      block.add(search, taken->balls[i].center, taken->contacts[i]);
  for (const auto& c : candidates(dd, search, cs, rho, radius, tol)) {
    if (block.blocked(search, c.center, c.contact)) continue;
    fam.balls.push_back({c.center, radius});
    fam.contacts.push_back(c.contact);
    block.add(search, c.center, c.contact);
  }
  return fam;
}

ChainedFamily close_family(const DomainDecomp& dd, BallSearch& search, const ChainSpace& cs,
                           const BallFamily& family, const Ball& seed) {
  const std::size_t n = dd.space().size();
  const double radius = seed.radius;
  std::vector<VertexId> order{seed.center};
  std::vector<std::uint32_t> index(n, kUnreached);
  index[seed.center] = 0;
  for (const auto& b : family.balls) {
    if (b.center >= n || cs.hop[b.center] == kUnreached)
      throw Error("chain-broken", "family ball cannot be chained to the seed");
    if (index[b.center] != kUnreached)
      throw Error("chain-broken", "family ball repeats a centre");
    index[b.center] = static_cast<std::uint32_t>(order.size());
    order.push_back(b.center);
  }
  std::vector<VertexId> extra;
  for (const auto& b : family.balls) {
    for (VertexId v = cs.parent[b.center]; v != kNoVertex && v != seed.center; v = cs.parent[v]) {
      if (index[v] != kUnreached) continue;
      index[v] = kUnreached - 1;  // provisional
      extra.push_back(v);
    }
  }
  std::sort(extra.begin(), extra.end());
  for (VertexId v : extra) {
    index[v] = static_cast<std::uint32_t>(order.size());
    order.push_back(v);
  }

  ChainedFamily f;
  f.radius = radius;
  f.family_count = family.balls.size();
  f.adjacency.resize(order.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    for (const auto& r : search.members({order[i], closed(radius)})) {
      const std::uint32_t j = index[r.vertex];
      if (j != i && j < order.size()) f.adjacency[i].push_back(j);
    }
    std::sort(f.adjacency[i].begin(), f.adjacency[i].end());
  }
  for (const auto& v : order) f.balls.push_back({v, radius});

  // Prune chain balls whose removal keeps the graph connected, largest id first.
  std::vector<std::uint8_t> alive(order.size(), 1);
  auto connected = [&](std::uint32_t skip) {
    std::vector<std::uint8_t> seen(order.size(), 0);
    std::deque<std::uint32_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1, total = 0;
    for (std::size_t i = 0; i < order.size(); ++i) total += (alive[i] && i != skip) ? 1 : 0;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto v : f.adjacency[u]) {
        if (seen[v] || !alive[v] || v == skip) continue;
        seen[v] = 1;
        ++count;
        queue.push_back(v);
      }
    }
    return count == total;
  };
  std::vector<std::uint32_t> removable;
  for (std::uint32_t i = static_cast<std::uint32_t>(1 + f.family_count); i < order.size(); ++i)
    removable.push_back(i);
  std::sort(removable.begin(), removable.end(),
            [&](std::uint32_t a, std::uint32_t b) { return order[a] > order[b]; });
  for (auto i : removable)
    if (connected(i)) alive[i] = 0;
  if (!connected(kNoParent)) throw Error("chain-broken", "chain graph is disconnected");

  // Compact.
  std::vector<std::uint32_t> remap(order.size(), kUnreached);
  ChainedFamily out;
  out.radius = radius;
  out.family_count = f.family_count;
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    if (!alive[i]) continue;
    remap[i] = static_cast<std::uint32_t>(out.balls.size());
    out.balls.push_back(f.balls[i]);
  }
  out.adjacency.resize(out.balls.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    if (!alive[i]) continue;
    for (auto j : f.adjacency[i])
      if (alive[j]) out.adjacency[remap[i]].push_back(remap[j]);
  }

  // Minimal-hop chains to the seed inside the pruned family.
  std::vector<std::uint32_t> par(out.balls.size(), kUnreached);
  std::deque<std::uint32_t> queue{0};
  par[0] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : out.adjacency[u]) {
      if (par[v] != kUnreached) continue;
      par[v] = u;
      queue.push_back(v);
    }
  }
  for (std::uint32_t i = 1; i <= out.family_count; ++i) {
    std::vector<std::uint32_t> chain{i};
    for (std::uint32_t v = i; v != 0; v = par[v]) chain.push_back(par[v]);
    out.chains.push_back(std::move(chain));
  }
  return out;
}

// Sum of per-vertex weights over an open ball.
double weight_in(BallSearch& search, const std::vector<double>& weight, const Ball& b) {
  double s = 0.0;
  for (const auto& r : search.members(b)) s += weight[r.vertex];
  return s;
}

std::vector<double> level_weights(std::size_t n, const GenerationTree& tree,
                                  const FrostmanMeasure& nu, std::size_t k) {
  std::vector<double> w(n, 0.0);
  const auto& pts = tree.levels.at(k).points;
  for (std::size_t i = 0; i < pts.size(); ++i) w[pts[i].w] += nu.a.at(k)[i];
  return w;
}

std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", x);
  return b;
}

}  // namespace

BallFamily well_placed_family(const DomainDecomp& dd, VertexId w, double rho, double eta,
                              const Ball& seed, const Tolerances& tol, const BallFamily* taken) {
  check_eta(eta, false);
  const double radius = eta * rho;
  const double h = dd.space().h();
  if (radius < 2.0 * h * (1.0 - 1e-12))
    throw Error("scale-unresolved", "ball radius below two cells");
  BallSearch search(dd.space());
  const auto cs = chain_space(dd, search, w, 2.0 * rho, {seed.center, radius});
  return select_family(dd, search, cs, rho, radius, tol, taken);
}

WellPlacedCheck check_well_placed(const DomainDecomp& dd, const BallFamily& family, VertexId w,
                                  double rho, double eta, const Ball& seed, const Tolerances& tol,
                                  const BallFamily* taken) {
  const double radius = eta * rho;
  BallSearch search(dd.space());
  WellPlacedCheck out;
  const auto cs = chain_space(dd, search, w, 2.0 * rho, {seed.center, radius});
  const std::size_t n = dd.space().size();

  for (std::size_t i = 0; i < family.balls.size(); ++i) {
    const Ball& b = family.balls[i];
    for (const auto& r : search.members(b))
      if (!dd.is_interior(r.vertex)) out.inside = false;
    const VertexId c = family.contacts[i];
    if (!dd.is_boundary(c) || std::isinf(cs.dw[c])) out.contact = false;
    const double d = search.distance(b.center, c);
    if (d > closed(b.radius + tol.contact)) out.contact = false;
  }
  // Pairwise 4-fold dilations, exact.
  std::vector<std::uint32_t> owner(n, kUnreached);
  for (std::uint32_t i = 0; i < family.balls.size(); ++i) {
    for (const auto& r : search.members(family.balls[i].dilate(4.0))) {
      if (owner[r.vertex] != kUnreached && owner[r.vertex] != i) out.separated = false;
      owner[r.vertex] = i;
    }
  }
  // Maximality: every candidate outside the family is blocked.
  Blockers block(n, radius);
  if (taken != nullptr)
    for (std::size_t i = 0; i < taken->balls.size(); ++i)
      block.add(search, taken->balls[i].center, taken->contacts[i]);
  std::vector<std::uint8_t> chosen(n, 0);
  for (std::size_t i = 0; i < family.balls.size(); ++i) {
    chosen[family.balls[i].center] = 1;
    block.add(search, family.balls[i].center, family.contacts[i]);
  }
  const auto cand = candidates(dd, search, cs, rho, radius, tol);
  out.candidates = cand.size();
  for (const auto& c : cand) {
    if (chosen[c.center]) continue;
    if (!block.blocked(search, c.center, c.contact)) out.maximal = false;
  }
  return out;
}

ChainedFamily chainable_closure(const DomainDecomp& dd, const BallFamily& family,
                                const Ball& seed, VertexId w, double window_radius) {
  BallSearch search(dd.space());
  const auto cs = chain_space(dd, search, w, window_radius, seed);
  return close_family(dd, search, cs, family, seed);
}

bool chain_connected(const ChainedFamily& f, std::uint32_t removed) {
  if (f.balls.empty()) return true;
  std::vector<std::uint8_t> seen(f.balls.size(), 0);
  std::uint32_t start = removed == 0 ? 1 : 0;
  if (start >= f.balls.size()) return true;
  std::deque<std::uint32_t> queue{start};
  seen[start] = 1;
  std::size_t count = 1;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : f.adjacency[u]) {
      if (seen[v] || v == removed) continue;
      seen[v] = 1;
      ++count;
      queue.push_back(v);
    }
  }
  const std::size_t expected = f.balls.size() - (removed < f.balls.size() ? 1 : 0);
  return count == expected;
}

GenerationTree build_generations(const DomainDecomp& dd, VertexId z0,
                                 const GenerationOptions& opt, const Tolerances& tol) {
  const SpaceGraph& g = dd.space();
  if (z0 >= g.size() || !dd.is_interior(z0)) throw Error("center-outside", "z0 is not interior");
  check_eta(opt.eta, opt.strict);

  GenerationTree tree;
  tree.z0 = z0;
  tree.r = dd.d_omega(z0);
  tree.eta = opt.eta;
  tree.requested_depth = opt.depth;
  tree.w0 = dd.nearest_boundary(z0);
  BallSearch search(g);

  Generation root;
  root.radius = tree.r;
  GenPoint p0;
  p0.w = tree.w0;
  p0.center = z0;
  p0.ball_mass = search.mass({tree.w0, tree.r});
  root.points.push_back(p0);
  tree.levels.push_back(std::move(root));

  for (std::size_t k = 1; k <= opt.depth; ++k) {
    const double rho = tree.levels.back().radius;
    const double radius = opt.eta * rho;
    if (radius < opt.resolution * g.h() * (1.0 - 1e-12)) {
      tree.resolution_truncated = true;
      break;
    }
    Generation level;
    level.radius = radius;
    BallFamily taken;
    taken.radius = radius;
    const auto& parents = tree.levels.back().points;
    bool starved = false;
    for (std::uint32_t pi = 0; pi < parents.size(); ++pi) {
      const Ball seed{parents[pi].center, radius};
      const auto cs = chain_space(dd, search, parents[pi].w, 2.0 * rho, seed);
      const auto fam = select_family(dd, search, cs, rho, radius, tol, &taken);
      if (fam.balls.empty()) {
        starved = true;
        break;
      }
      auto closure = close_family(dd, search, cs, fam, seed);
      for (std::size_t j = 0; j < fam.balls.size(); ++j) {
        GenPoint p;
        p.w = fam.contacts[j];
        p.center = fam.balls[j].center;
        p.parent = pi;
        p.ball_mass = search.mass({p.w, radius});
        for (auto b : closure.chains[j]) p.chain.push_back(closure.balls[b].center);
        level.max_chain = std::max(level.max_chain, closure.chains[j].size() - 1);
        level.points.push_back(std::move(p));
        taken.balls.push_back(fam.balls[j]);
        taken.contacts.push_back(fam.contacts[j]);
      }
      level.families.push_back(std::move(closure));
    }
    if (starved) {
      tree.starved = true;
      break;
    }
    // D_{k-1}(w) = P_k ∩ B(w, 2 eta^{k-1} r).
    std::vector<std::int64_t> at(g.size(), -1);
    for (std::size_t i = 0; i < level.points.size(); ++i) at[level.points[i].w] = std::int64_t(i);
    for (auto& parent : tree.levels.back().points) {
      for (const auto& r : search.members({parent.w, 2.0 * rho}))
        if (at[r.vertex] >= 0) parent.children.push_back(static_cast<std::uint32_t>(at[r.vertex]));
      std::sort(parent.children.begin(), parent.children.end());
    }
    // Separation, searched out to 16 eta^k r.
    for (std::size_t i = 0; i < level.points.size(); ++i) {
      for (const auto& r : search.members({level.points[i].w, 16.0 * radius})) {
        if (at[r.vertex] >= 0 && std::size_t(at[r.vertex]) != i)
          level.min_separation = std::min(level.min_separation, r.dist);
      }
    }
    if (level.points.size() > 1) level.min_separation = std::min(level.min_separation, 16.0 * radius);
    tree.levels.push_back(std::move(level));
  }
  return tree;
}

ChainBound chain_bound(const DomainDecomp& dd, const GenerationTree& tree) {
  ChainBound out;
  std::vector<DoublingSample> samples;
  for (std::size_t k = 1; k < tree.levels.size(); ++k) {
    const auto& lv = tree.levels[k];
    out.M = std::max(out.M, lv.max_chain);
    for (const auto& fam : lv.families)
      for (const auto& b : fam.balls) {
        samples.push_back({b.center, 0.5 * b.radius});
        samples.push_back({b.center, b.radius});
      }
    for (const auto& p : tree.levels[k - 1].points) samples.push_back({p.w, tree.levels[k - 1].radius});
  }
  out.M_john = std::max<std::size_t>(out.M, 4);
  if (!samples.empty()) out.doubling = doubling_constant(dd.space(), samples).constant;
  out.packing = packing_bound(out.doubling, 2.0 * tree.r, tree.eta * tree.r);
  out.ok = static_cast<double>(out.M) <= 2.0 * out.packing;
  return out;
}

FrostmanMeasure frostman_weights(const GenerationTree& tree) {
  return frostman_weights(tree, tree.depth());
}

FrostmanMeasure frostman_weights(const GenerationTree& tree, std::size_t depth) {
  if (tree.levels.empty()) throw Error("orphaned-mass", "empty generation tree");
  if (depth > tree.depth()) throw Error("invalid-level", "depth beyond the tree");
  FrostmanMeasure nu;
  nu.depth = depth;
  nu.a.push_back({1.0});
  nu.level_mass.push_back(1.0);
  for (std::size_t k = 0; k < depth; ++k) {
    const auto& cur = tree.levels[k].points;
    const auto& next = tree.levels[k + 1].points;
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (nu.a[k][i] > 0.0 && cur[i].children.empty())
        throw Error("orphaned-mass", "a weighted point has no children at level " + std::to_string(k));
    std::vector<double> a(next.size(), 0.0);
    for (std::size_t j = 0; j < next.size(); ++j) {
      const auto parent = next[j].parent;
      if (parent >= cur.size()) throw Error("orphaned-mass", "point without a parent");
      double denom = 0.0;
      for (auto c : cur[parent].children) denom += next[c].ball_mass;
      a[j] = nu.a[k][parent] * next[j].ball_mass / denom;
    }
    nu.level_mass.push_back(std::accumulate(a.begin(), a.end(), 0.0));
    nu.a.push_back(std::move(a));
  }
  return nu;
}

double level_measure(const DomainDecomp& dd, const GenerationTree& tree, const FrostmanMeasure& nu,
                     std::size_t k, const Ball& b) {
  BallSearch search(dd.space());
  return weight_in(search, level_weights(dd.space().size(), tree, nu, k), b);
}

FrostmanBoundReport verify_frostman_bound(const DomainDecomp& dd, const GenerationTree& tree,
                                          const FrostmanMeasure& nu, double p, double q,
                                          std::size_t random_boundary, std::uint64_t seed) {
  const SpaceGraph& g = dd.space();
  FrostmanBoundReport out;
  out.p = p;
  out.q = q;
  out.eps = p - q;
  BallSearch search(g);
  const auto weight = level_weights(g.size(), tree, nu, nu.depth);

  auto omega_mass = [&](const Ball& b) {
    double s = 0.0;
    for (const auto& r : search.members(b))
      if (dd.is_interior(r.vertex)) s += g.mass(r.vertex);
    return s;
  };
  const double base = omega_mass({tree.w0, tree.r});

  for (double rho = 4.0 * g.h(); rho < tree.r; rho *= 2.0) out.radii.push_back(rho);
  out.radii.push_back(tree.r);
  for (const auto& pt : tree.levels[nu.depth].points) out.centers.push_back(pt.w);
  std::mt19937_64 rng(seed);
  if (!dd.boundary().empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, dd.boundary().size() - 1);
    for (std::size_t i = 0; i < random_boundary; ++i) out.centers.push_back(dd.boundary()[pick(rng)]);
  }
  for (VertexId xi : out.centers) {
    for (double rho : out.radii) {
      double nu_b = 0.0, mu_b = 0.0;
      for (const auto& r : search.members({xi, rho})) {
        nu_b += weight[r.vertex];
        if (dd.is_interior(r.vertex)) mu_b += g.mass(r.vertex);
      }
      if (mu_b <= 0.0) continue;
      const double ratio = nu_b * std::pow(rho / tree.r, p) * base / mu_b;
      if (ratio > out.max_ratio) {
        out.max_ratio = ratio;
        out.worst_center = xi;
        out.worst_radius = rho;
      }
    }
  }
  out.finite = std::isfinite(out.max_ratio) && out.max_ratio > 0.0;
  return out;
}

TelescopingReport verify_telescoping(const DomainDecomp& dd, const GenerationTree& tree,
                                     const FrostmanMeasure& nu, std::size_t k1, std::size_t k2) {
  if (k1 > k2 || k2 > nu.depth) throw Error("invalid-level", "need k1 <= k2 <= depth");
  const std::size_t n = dd.space().size();
  TelescopingReport out;
  out.k1 = k1;
  out.k2 = k2;
  BallSearch search(dd.space());
  const auto w1 = level_weights(n, tree, nu, k1);
  const auto w2 = level_weights(n, tree, nu, k2);
  const double rad = tree.levels[k1].radius;
  const auto& pts = tree.levels[k1].points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double a = nu.a[k1][i];
    const double far = weight_in(search, w2, {pts[i].w, 3.0 * rad});
    const double own = weight_in(search, w1, {pts[i].w, rad});
    out.max_error = std::max({out.max_error, std::abs(far - a), std::abs(own - a)});
    ++out.checked;
  }
  out.ok = out.max_error <= 1e-12;
  return out;
}

GenerationCurve john_curve_from_generation(const DomainDecomp& dd, const GenerationTree& tree,
                                           std::size_t k, std::size_t index, std::size_t M_john,
                                           const Tolerances& tol) {
  const SpaceGraph& g = dd.space();
  if (k >= tree.levels.size() || index >= tree.levels[k].points.size())
    throw Error("invalid-level", "no such generation point");
  std::vector<std::size_t> lineage(k + 1);
  lineage[k] = index;
  for (std::size_t j = k; j > 0; --j) lineage[j - 1] = tree.levels[j].points[lineage[j]].parent;

  GenerationCurve out;
  out.c = 4.0 * static_cast<double>(M_john);
  const auto* inside = &dd.interior_mask();
  Curve curve = make_curve(g, {tree.z0});
  for (std::size_t j = 1; j <= k; ++j) {
    const auto& pt = tree.levels[j].points[lineage[j]];
    const double floor = 0.5 * tree.levels[j].radius - g.h();
    // Stored chain runs z_w -> parent's centre; walk it backwards.
    for (std::size_t i = pt.chain.size(); i-- > 1;) {
      const Curve seg = geodesic_curve(g, pt.chain[i], pt.chain[i - 1], inside);
      for (VertexId z : seg.path) out.chain_margin = std::min(out.chain_margin, dd.d_omega(z) - floor);
      curve = concat(g, curve, seg);
    }
  }
  const auto& last = tree.levels[k].points[index];
  curve = concat(g, curve, geodesic_curve(g, last.center, last.w, inside));
  out.chain_ok = out.chain_margin >= 0.0;
  out.check = verify_john_curve(dd, curve, out.c, tol);
  out.curve = std::move(curve);
  if (!out.check.ok)
    throw Error("john-certificate", "worst ratio " + fmt(out.check.worst_ratio) + " at vertex " +
                                        std::to_string(out.check.witness) + " exceeds c = " +
                                        fmt(out.c));
  return out;
}

}  // namespace visb
