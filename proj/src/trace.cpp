#include "visbound/trace.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "visbound/error.hpp"

namespace visb {
namespace {

double ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 0.0;
  return num / den;
}

}  // namespace

std::vector<double> minimal_upper_gradient(const DomainDecomp& dd, std::span<const double> u) {
  const SpaceGraph& g = dd.space();
  std::vector<double> out(g.size(), 0.0);
  for (VertexId x : dd.interior()) {
    double best = 0.0;
    for (const auto& e : g.neighbors(x)) {
      if (!dd.is_interior(e.to)) continue;
      best = std::max(best, std::abs(u[x] - u[e.to]) / e.length);
    }
    out[x] = best;
  }
  return out;
}

bool is_upper_gradient(const DomainDecomp& dd, std::span<const double> u,
                       std::span<const double> g, double rel_slack) {
  const SpaceGraph& sp = dd.space();
  for (VertexId x : dd.interior()) {
    for (const auto& e : sp.neighbors(x)) {
      if (!dd.is_interior(e.to)) continue;
      const double lhs = std::abs(u[x] - u[e.to]);
      const double rhs = 0.5 * (g[x] + g[e.to]) * e.length;
      if (lhs > rhs * (1.0 + rel_slack) + 1e-300) return false;
    }
  }
  return true;
}

std::vector<double> halving_radii(double r_max, double r_min) {
  std::vector<double> out;
  for (double r = r_max; r >= r_min * (1.0 - 1e-12); r *= 0.5) out.push_back(r);
  return out;
}

TraceValues trace_values(const DomainDecomp& dd, std::span<const double> u,
                         std::span<const VertexId> support, std::vector<double> radii) {
  if (radii.empty()) throw Error("invalid-radii", "no trace radii");
  for (double r : radii)
    if (!(r > 0.0)) throw Error("invalid-radii", "trace radii must be positive");
  std::sort(radii.begin(), radii.end(), std::greater<>());
  const SpaceGraph& g = dd.space();
  TraceValues out;
  out.support.assign(support.begin(), support.end());
  out.radii = radii;
  BallSearch search(g);
  for (VertexId z : support) {
    // One search at the largest radius; smaller balls are prefixes by distance.
    const auto& reached = search.members({z, radii.front()});
    std::vector<double> avg(radii.size(), 0.0);
    std::vector<double> um(radii.size(), 0.0), mm(radii.size(), 0.0);
    for (const auto& r : reached) {
      if (!dd.is_interior(r.vertex)) continue;
      const double m = g.mass(r.vertex);
      for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!inside_open_ball(r.dist, radii[i])) break;
        um[i] += u[r.vertex] * m;
        mm[i] += m;
      }
    }
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (mm[i] <= 0.0) throw Error("isolated-boundary-point", "ball misses the domain");
      avg[i] = um[i] / mm[i];
    }
    double gap = 0.0;
    for (std::size_t i = 0; i + 1 < avg.size(); ++i) gap = std::max(gap, std::abs(avg[i] - avg[i + 1]));
    out.gap.push_back(gap);
    out.fine_gap.push_back(avg.size() > 1 ? std::abs(avg[avg.size() - 1] - avg[avg.size() - 2]) : 0.0);
    out.value.push_back(avg.back());
    out.averages.push_back(std::move(avg));
  }
  return out;
}

double besov_seminorm(std::span<const double> dist, std::span<const double> weight,
                      std::span<const double> f, const BesovParams& params) {
  const std::size_t n = weight.size();
  if (dist.size() != n * n || f.size() != n)
    throw Error("atoms-mismatch", "distance matrix, weights and values disagree");
  double total = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    if (weight[z] <= 0.0) continue;
    double row = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == z || weight[y] <= 0.0) continue;
      const double diff = std::abs(f[y] - f[z]);
      if (diff == 0.0) continue;
      const double d = dist[y * n + z];
      const double R = params.S * d * (1.0 + 1e-12);
      double nb = 0.0;
      for (std::size_t x = 0; x < n; ++x)
        if (dist[z * n + x] <= R) nb += weight[x];
      row += weight[y] * std::pow(diff, params.q) / (std::pow(d, params.theta * params.q) * nb);
    }
    total += weight[z] * row;
  }
  return total;
}

std::vector<double> atom_distances(const SpaceGraph& g, std::span<const VertexId> atoms) {
  const std::size_t n = atoms.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    SearchOptions opt;
    opt.stop_after = atoms;
    const VertexId src[1] = {atoms[i]};
    const auto field = geodesic_distance(g, src, opt);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = field.dist[atoms[j]];
  }
  // Symmetrise against tie-order rounding.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out[i * n + j] = out[j * n + i] = std::min(out[i * n + j], out[j * n + i]);
  return out;
}

double besov_seminorm(const SpaceGraph& g, std::span<const VertexId> atoms,
                      std::span<const double> weight, std::span<const double> f,
                      const BesovParams& params) {
  const auto d = atom_distances(g, atoms);
  return besov_seminorm(d, weight, f, params);
}

std::vector<double> restricted_maximal(const DomainDecomp& dd, std::span<const double> f,
                                       std::span<const std::uint8_t> window,
                                       std::span<const double> radii) {
  const SpaceGraph& g = dd.space();
  std::vector<double> out(g.size(), 0.0);
  BallSearch search(g);
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!dd.is_interior(x) && !dd.is_boundary(x)) continue;
    for (double r : radii) {
      const auto& reached = search.members({x, r});
      double num = 0.0, den = 0.0;
      for (const auto& y : reached) {
        if (!dd.is_interior(y.vertex)) continue;
        const double m = g.mass(y.vertex);
        den += m;
        if (window[y.vertex]) num += f[y.vertex] * m;
      }
      if (den <= 0.0) continue;
      const double avg = num / den;
      for (const auto& y : reached)
        if (dd.is_interior(y.vertex)) out[y.vertex] = std::max(out[y.vertex], avg);
    }
  }
  return out;
}

void validate_trace_params(const TraceParams& tp) {
  if (!(tp.p > 1.0 && tp.p < tp.q_hat && tp.q_hat < tp.q))
    throw Error("invalid-exponents", "need 1 < p < q_hat < q");
  if (!(tp.c > 1.0)) throw Error("invalid-john-constant", "need c > 1");
  if (!(tp.S >= 1.0)) throw Error("invalid-exponents", "need S >= 1");
}

namespace {

TraceReport energy_part(const DomainDecomp& dd, VertexId z0, std::span<const double> u,
                        std::span<const VertexId> atoms, std::span<const double> weights,
                        const TraceParams& tp) {
  validate_trace_params(tp);
  const SpaceGraph& g = dd.space();
  if (z0 >= g.size() || !dd.is_interior(z0)) throw Error("center-outside", "z0 is not interior");
  if (atoms.size() != weights.size() || u.size() != g.size())
    throw Error("atoms-mismatch", "atoms, weights and values disagree");

  TraceReport rep;
  rep.atoms.assign(atoms.begin(), atoms.end());
  rep.weights.assign(weights.begin(), weights.end());
  rep.d0 = dd.d_omega(z0);
  rep.window_radius = 10.0 * tp.c * rep.d0;
  rep.core_radius = 0.5 * rep.d0;
  rep.theta = 1.0 - tp.p / tp.q;
  rep.eps = 0.5 * (tp.q - tp.p);
  rep.beta0 = 0.5 * (1.0 - tp.p / tp.q);
  rep.tau = 2.0 * tp.c + 1.0;
  rep.alpha = 2.0 - 1.0 / (2.0 * tp.c);

  auto radii = tp.radii.empty() ? halving_radii(rep.d0, 2.0 * g.h()) : tp.radii;
  rep.trace = trace_values(dd, u, atoms, radii);
  rep.besov = besov_seminorm(g, atoms, weights, rep.trace.value, {rep.theta, tp.q, tp.S});

  const auto grad = minimal_upper_gradient(dd, u);
  std::vector<std::uint8_t> window(g.size(), 0);
  BallSearch search(g);
  for (const auto& r : search.members({z0, rep.window_radius})) {
    if (!dd.is_interior(r.vertex)) continue;
    window[r.vertex] = 1;
    ++rep.window_size;
    rep.energy += std::pow(grad[r.vertex], tp.q) * g.mass(r.vertex);
  }
  if (rep.energy == 0.0 && rep.besov > 0.0)
    throw Error("zero-energy", "nonzero Besov energy with zero Sobolev energy");
  rep.ratio_energy = ratio(rep.besov, rep.energy);

  if (tp.proof_mode) {
    std::vector<double> f(g.size());
    for (VertexId v = 0; v < g.size(); ++v) f[v] = std::pow(grad[v], tp.q_hat);
    std::vector<double> mr{0.5 * g.min_edge_length()};
    for (double r = g.h(); r <= 2.0 * rep.window_radius; r *= 2.0) mr.push_back(r);
    const auto M = restricted_maximal(dd, f, window, mr);
    rep.proof_energy = 0.0;
    for (VertexId v = 0; v < g.size(); ++v)
      if (window[v])
        rep.proof_energy += std::pow(f[v] + M[v], tp.q / tp.q_hat) * g.mass(v);
  }
  return rep;
}

}  // namespace

TraceReport verify_trace_energy(const DomainDecomp& dd, VertexId z0, std::span<const double> u,
                                std::span<const VertexId> atoms, std::span<const double> weights,
                                const TraceParams& tp) {
  return energy_part(dd, z0, u, atoms, weights, tp);
}

TraceReport verify_Lq_estimate(const DomainDecomp& dd, VertexId z0, std::span<const double> u,
                               std::span<const VertexId> atoms, std::span<const double> weights,
                               const TraceParams& tp, const Tolerances& tol) {
  TraceReport rep = energy_part(dd, z0, u, atoms, weights, tp);
  const SpaceGraph& g = dd.space();
  for (std::size_t i = 0; i < atoms.size(); ++i)
    rep.lq_trace += weights[i] * std::pow(std::abs(rep.trace.value[i]), tp.q);
  // Membership only: the requested constant is the whole ladder.
  const double rung[1] = {tp.c};
  const auto sub = john_subdomain(dd, z0, tp.c, tol, rung);
  rep.john_size = sub.vertices.size();
  for (VertexId v : sub.vertices) rep.lq_u += std::pow(std::abs(u[v]), tp.q) * g.mass(v);
  rep.lq_rhs = std::pow(rep.d0, -tp.p) * rep.lq_u + std::pow(rep.d0, tp.q - tp.p) * rep.energy;
  rep.ratio_lq = ratio(rep.lq_trace, rep.lq_rhs);
  return rep;
}

}  // namespace visb
