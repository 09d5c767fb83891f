#include "visbound/energy.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "visbound/error.hpp"

namespace visb {

std::vector<double> discrete_lip(const SpaceGraph& g, std::span<const double> u,
                                 const std::vector<std::uint8_t>* allowed) {
  std::vector<double> lip(g.size(), 0.0);
  for (VertexId x = 0; x < g.size(); ++x) {
    if (allowed && !(*allowed)[x]) continue;
    double best = 0.0;
    for (const auto& e : g.neighbors(x)) {
      if (allowed && !(*allowed)[e.to]) continue;
      best = std::max(best, std::abs(u[x] - u[e.to]) / e.length);
    }
    lip[x] = best;
  }
  return lip;
}

double edge_energy(const SpaceGraph& g, std::span<const double> u, double q,
                   const std::vector<std::uint8_t>* region) {
  double sum = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (region && !(*region)[x]) continue;
    for (const auto& e : g.neighbors(x)) {
      if (e.to <= x || (region && !(*region)[e.to])) continue;
      sum += (g.mass(x) + g.mass(e.to)) * std::pow(std::abs(u[x] - u[e.to]) / e.length, q);
    }
  }
  return sum;
}

double maxform_energy(const SpaceGraph& g, std::span<const double> u, double q,
                      const std::vector<std::uint8_t>* region) {
  const auto lip = discrete_lip(g, u, region);
  double sum = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (region && !(*region)[x]) continue;
    sum += std::pow(lip[x], q) * g.mass(x);
  }
  return sum;
}

namespace {

constexpr double kFree = -1.0;

struct Link {
  VertexId a, b;
  double W;  // (mu_a + mu_b) / d^q
};

struct Setup {
  const SpaceGraph* g;
  double q;
  std::vector<std::uint8_t> region;
  std::vector<double> fixed;          // kFree or the imposed value
  std::vector<int> index;             // free vertex -> unknown, else -1
  std::vector<VertexId> unknowns;
  std::vector<Link> links;
};

Setup prepare(const CondenserProblem& p) {
  if (p.g == nullptr) throw Error("invalid-problem", "no graph");
  const SpaceGraph& g = *p.g;
  if (!(p.q > 1.0)) throw Error("invalid-exponent", "q must exceed 1");
  if (p.E.empty() || p.F.empty()) throw Error("empty-plate", "both plates must be nonempty");
  Setup s{&g, p.q, p.region, {}, {}, {}, {}};
  if (s.region.empty()) s.region.assign(g.size(), 1);
  if (s.region.size() != g.size()) throw Error("invalid-problem", "region size mismatch");
  s.fixed.assign(g.size(), kFree);
  for (VertexId v : p.E) {
    if (v >= g.size() || !s.region[v]) throw Error("plate-outside", "E leaves the region");
    s.fixed[v] = 1.0;
  }
  for (VertexId v : p.F) {
    if (v >= g.size() || !s.region[v]) throw Error("plate-outside", "F leaves the region");
    if (s.fixed[v] == 1.0) throw Error("plates-overlap", "E and F intersect");
    s.fixed[v] = 0.0;
  }
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!s.region[x]) continue;
    for (const auto& e : g.neighbors(x)) {
      if (e.to > x && s.region[e.to])
        s.links.push_back({x, e.to, (g.mass(x) + g.mass(e.to)) / std::pow(e.length, p.q)});
    }
  }
  // Free islands with no plate in reach are frozen at 1/2.
  std::vector<int> comp(g.size(), -1);
  std::vector<VertexId> stack;
  for (VertexId s0 = 0; s0 < g.size(); ++s0) {
    if (!s.region[s0] || s.fixed[s0] != kFree || comp[s0] >= 0) continue;
    std::vector<VertexId> members;
    bool anchored = false;
    comp[s0] = static_cast<int>(s0);
    stack.push_back(s0);
    while (!stack.empty()) {
      const VertexId u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (const auto& e : g.neighbors(u)) {
        if (!s.region[e.to]) continue;
        if (s.fixed[e.to] != kFree) {
          anchored = true;
        } else if (comp[e.to] < 0) {
          comp[e.to] = static_cast<int>(s0);
          stack.push_back(e.to);
        }
      }
    }
    if (!anchored) {
      for (VertexId v : members) s.fixed[v] = 0.5;
    }
  }
  s.index.assign(g.size(), -1);
  for (VertexId x = 0; x < g.size(); ++x) {
    if (s.region[x] && s.fixed[x] == kFree) {
      s.index[x] = static_cast<int>(s.unknowns.size());
      s.unknowns.push_back(x);
    }
  }
  return s;
}

double energy_of(const Setup& s, const std::vector<double>& u) {
  double sum = 0.0;
  for (const auto& l : s.links) sum += l.W * std::pow(std::abs(u[l.a] - u[l.b]), s.q);
  return sum;
}

// Solves the weighted Laplacian with per-link weights and the fixed values.
std::vector<double> weighted_solve(const Setup& s, const std::vector<double>& w,
                                   const std::vector<double>& base) {
  const int n = static_cast<int>(s.unknowns.size());
  std::vector<double> u = base;
  if (n == 0) return u;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < s.links.size(); ++k) {
    const auto& l = s.links[k];
    const int ia = s.index[l.a], ib = s.index[l.b];
    if (ia >= 0) diag[ia] += w[k];
    if (ib >= 0) diag[ib] += w[k];
    if (ia >= 0 && ib >= 0) {
      trip.emplace_back(ia, ib, -w[k]);
      trip.emplace_back(ib, ia, -w[k]);
    } else if (ia >= 0) {
      rhs[ia] += w[k] * s.fixed[l.b];
    } else if (ib >= 0) {
      rhs[ib] += w[k] * s.fixed[l.a];
    }
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
  if (solver.info() != Eigen::Success) throw Error("no-convergence", "singular energy system");
  const Eigen::VectorXd x = solver.solve(rhs);
  for (int i = 0; i < n; ++i) u[s.unknowns[i]] = x[i];
  return u;
}

std::vector<double> initial(const Setup& s) {
  std::vector<double> u(s.g->size(), 0.0);
  for (VertexId x = 0; x < s.g->size(); ++x) {
    if (s.region[x] && s.fixed[x] != kFree) u[x] = s.fixed[x];
  }
  return u;
}

EnergyGradient gradient(const Setup& s, const std::vector<double>& u) {
  EnergyGradient out;
  out.grad.assign(s.g->size(), 0.0);
  std::vector<double> force(s.g->size(), 0.0);
  for (const auto& l : s.links) {
    const double d = u[l.a] - u[l.b];
    const double f = l.W * s.q * std::pow(std::abs(d), s.q - 1.0);
    const double signed_f = d >= 0.0 ? f : -f;
    out.grad[l.a] += signed_f;
    out.grad[l.b] -= signed_f;
    force[l.a] += f;
    force[l.b] += f;
  }
  double gmax = 0.0;
  for (VertexId x : s.unknowns) {
    gmax = std::max(gmax, std::abs(out.grad[x]));
    out.force_scale = std::max(out.force_scale, force[x]);
  }
  for (VertexId x = 0; x < s.g->size(); ++x) {
    if (s.index[x] < 0) out.grad[x] = 0.0;
  }
  out.residual = out.force_scale > 0.0 ? gmax / out.force_scale : 0.0;
  return out;
}

}  // namespace

EnergyGradient energy_gradient(const CondenserProblem& p, std::span<const double> u) {
  const auto s = prepare(p);
  return gradient(s, std::vector<double>(u.begin(), u.end()));
}

EnergySolution minimize_energy(const CondenserProblem& p, const EnergyOptions& opt) {
  const Setup s = prepare(p);
  EnergySolution sol;
  const std::vector<double> base = initial(s);
  std::vector<double> w(s.links.size());
  for (std::size_t k = 0; k < s.links.size(); ++k) w[k] = s.links[k].W;
  std::vector<double> u = weighted_solve(s, w, base);
  sol.iterations = 1;

  if (s.q != 2.0) {
    // Damped reweighting.
    double prev = energy_of(s, u);
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
      for (std::size_t k = 0; k < s.links.size(); ++k) {
        const double d = u[s.links[k].a] - u[s.links[k].b];
        w[k] = s.links[k].W * std::pow(d * d + opt.eps, 0.5 * (s.q - 2.0));
      }
      const auto next = weighted_solve(s, w, base);
      for (VertexId x : s.unknowns) u[x] = (1.0 - opt.damping) * u[x] + opt.damping * next[x];
      ++sol.iterations;
      const double e = energy_of(s, u);
      const bool settled = std::abs(prev - e) <= opt.energy_tol * std::max(e, 1e-300);
      prev = e;
      if (settled) break;
    }
    // Newton polishing on the exact energy.
    const double reg = 1e-30;
    for (std::size_t it = 0; it < opt.newton_iterations; ++it) {
      const auto gr = gradient(s, u);
      if (gr.residual <= opt.residual_tol) break;
      const int n = static_cast<int>(s.unknowns.size());
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 0.0);
      for (const auto& l : s.links) {
        const double d = u[l.a] - u[l.b];
        const double h = l.W * s.q * (s.q - 1.0) * std::pow(d * d + reg, 0.5 * (s.q - 2.0));
        const int ia = s.index[l.a], ib = s.index[l.b];
        if (ia >= 0) diag[ia] += h;
        if (ib >= 0) diag[ib] += h;
        if (ia >= 0 && ib >= 0) {
          trip.emplace_back(ia, ib, -h);
          trip.emplace_back(ib, ia, -h);
        }
      }
      double dmax = diag.cwiseAbs().maxCoeff();
      for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i] + 1e-14 * dmax);
      Eigen::SparseMatrix<double> H(n, n);
      H.setFromTriplets(trip.begin(), trip.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
      if (solver.info() != Eigen::Success) break;
      Eigen::VectorXd g(n);
      for (int i = 0; i < n; ++i) g[i] = gr.grad[s.unknowns[i]];
      const Eigen::VectorXd step = solver.solve(-g);
      const double e0 = energy_of(s, u);
      // Near the optimum the predicted decrease drops below rounding in the
      // energy; then a step that keeps the energy flat and shrinks the
      // gradient is taken instead.
      const double flat = 64.0 * std::numeric_limits<double>::epsilon() * std::max(e0, 1e-300);
      double t = 1.0;
      bool moved = false;
      std::vector<double> trial = u;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        for (int i = 0; i < n; ++i) trial[s.unknowns[i]] = u[s.unknowns[i]] + t * step[i];
        const double e1 = energy_of(s, trial);
        if (e1 < e0 - flat) {
          moved = true;
          break;
        }
        if (e1 <= e0 + flat && gradient(s, trial).residual < gr.residual) {
          moved = true;
          break;
        }
      }
      if (!moved) break;
      u = trial;
      ++sol.newton_steps;
    }
  }

  // Maximum principle: clip rounding excursions.
  for (VertexId x : s.unknowns) u[x] = std::clamp(u[x], 0.0, 1.0);
  sol.u = u;
  sol.residual = gradient(s, u).residual;
  sol.edge_energy = energy_of(s, u);
  sol.energy = maxform_energy(*s.g, u, s.q, &s.region);
  sol.converged = s.q == 2.0 || sol.residual <= 1e-8;
  if (!sol.converged && opt.throw_on_failure)
    throw Error("no-convergence", "residual " + [&]{ char b[32]; std::snprintf(b, sizeof b, "%.3e", sol.residual); return std::string(b); }() + " after " +
                                      std::to_string(sol.iterations) + " sweeps");
  return sol;
}

LoewnerReport verify_loewner(const CondenserProblem& p, const EnergySolution& s, double lambda,
                             double ball_mass, double r) {
  LoewnerReport rep;
  rep.lambda = lambda;
  rep.ball_mass = ball_mass;
  rep.r = r;
  rep.q = p.q;
  rep.energy = s.energy;
  rep.edge_energy = s.edge_energy;
  const SpaceGraph& g = *p.g;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!p.region.empty() && !p.region[x]) continue;
    std::size_t deg = 0;
    for (const auto& e : g.neighbors(x)) deg += (p.region.empty() || p.region[e.to]) ? 1 : 0;
    rep.max_degree = std::max(rep.max_degree, deg);
  }
  const double num = lambda * ball_mass / std::pow(r, p.q);
  rep.empirical_C = s.energy > 0.0 ? num / s.energy : kInf;
  const double floor_energy = rep.max_degree > 0 ? s.edge_energy / double(rep.max_degree) : 0.0;
  rep.certified_C = floor_energy > 0.0 ? num / floor_energy : kInf;
  rep.ok = std::isfinite(rep.empirical_C) && std::isfinite(rep.certified_C) && rep.empirical_C > 0.0;
  return rep;
}

BallCountingReport verify_ball_counting(double eta, double q, double big_ball_mass,
                                        std::span<const double> family_masses, double strict_cap) {
  if (family_masses.empty())
    throw Error("no-well-placed-balls", "well-placed family is empty");
  BallCountingReport rep;
  rep.eta = eta;
  rep.q = q;
  rep.family_size = family_masses.size();
  rep.lhs = std::pow(eta, q) * big_ball_mass;
  rep.family_mass = std::accumulate(family_masses.begin(), family_masses.end(), 0.0);
  rep.K0 = rep.lhs / rep.family_mass;
  rep.strict_violation = !(eta < strict_cap);
  return rep;
}

}  // namespace visb
