#include "visbound/content.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "visbound/error.hpp"
#include "visbound/lp.hpp"

namespace visb {

std::vector<double> dyadic_radii(double h, double R, double floor) {
  std::vector<double> out;
  const double lo = std::max(h, floor);
  for (double r = h; r <= R * (1.0 + 1e-12); r *= 2.0) {
    if (r >= lo * (1.0 - 1e-12)) out.push_back(std::min(r, R));
  }
  if (out.empty()) out.push_back(R);
  return out;
}

std::string to_string(EstimateKind k) {
  switch (k) {
    case EstimateKind::upper: return "upper";
    case EstimateKind::lower: return "lower";
    case EstimateKind::exact: return "exact";
  }
  return "?";
}

CandidateFamily build_candidates(const SpaceGraph& g, const ContentQuery& q) {
  if (!(q.R > 0.0)) throw Error("invalid-radius", "radius cap must be positive");
  CandidateFamily f;
  f.t = q.t;
  f.target = q.target;
  std::sort(f.target.begin(), f.target.end());
  f.target.erase(std::unique(f.target.begin(), f.target.end()), f.target.end());
  if (f.target.empty()) return f;

  std::vector<VertexId> centers = q.centers.empty() ? f.target : q.centers;
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  std::vector<double> radii = q.radii.empty() ? dyadic_radii(g.h(), q.R, q.min_radius) : q.radii;
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  for (double r : radii) {
    if (!(r > 0.0) || r > q.R * (1.0 + 1e-12)) throw Error("invalid-radius", "radius outside (0, R]");
  }

  std::vector<std::int64_t> index(g.size(), -1);
  for (std::size_t i = 0; i < f.target.size(); ++i) index[f.target[i]] = static_cast<std::int64_t>(i);

  BallSearch search(g);
  const double rmax = radii.back();
  for (VertexId c : centers) {
    const auto& members = search.members({c, rmax});  // nondecreasing distance
    for (double r : radii) {
      CandidateBall cb{{c, r}, 0.0, 0.0, {}};
      for (const auto& m : members) {
        if (!inside_open_ball(m.dist, r)) break;
        cb.mass += g.mass(m.vertex);
        if (index[m.vertex] >= 0) cb.covers.push_back(static_cast<std::uint32_t>(index[m.vertex]));
      }
      if (cb.covers.empty()) continue;
      std::sort(cb.covers.begin(), cb.covers.end());
      cb.cost = cb.mass / std::pow(r, q.t);
      f.balls.push_back(std::move(cb));
    }
  }
  return f;
}

namespace {

void require_coverable(const CandidateFamily& f) {
  std::vector<std::uint8_t> hit(f.target.size(), 0);
  for (const auto& b : f.balls)
    for (auto i : b.covers) hit[i] = 1;
  for (auto x : hit) {
    if (!x) throw Error("insufficient-candidates", "target vertex not covered by any candidate");
  }
}

// Greedy preference: smaller ratio, then larger radius, then smaller centre.
bool greedy_better(double ratio, const CandidateBall& a, double best_ratio, const CandidateBall& b) {
  const double tol = 1e-12 * std::max(std::abs(ratio), std::abs(best_ratio));
  if (ratio < best_ratio - tol) return true;
  if (ratio > best_ratio + tol) return false;
  if (a.ball.radius != b.ball.radius) return a.ball.radius > b.ball.radius;
  return a.ball.center < b.ball.center;
}

}  // namespace

ContentEstimate content_upper(const CandidateFamily& f) {
  ContentEstimate est;
  est.kind = EstimateKind::upper;
  if (f.target.empty()) return est;
  require_coverable(f);
  std::vector<std::uint8_t> covered(f.target.size(), 0);
  std::size_t remaining = f.target.size();
  std::vector<std::uint8_t> used(f.balls.size(), 0);
  while (remaining > 0) {
    std::size_t best = f.balls.size();
    double best_ratio = kInf;
    for (std::size_t j = 0; j < f.balls.size(); ++j) {
      if (used[j]) continue;
      std::size_t gain = 0;
      for (auto i : f.balls[j].covers) gain += covered[i] ? 0 : 1;
      if (gain == 0) continue;
      const double ratio = f.balls[j].cost / static_cast<double>(gain);
      if (best == f.balls.size() || greedy_better(ratio, f.balls[j], best_ratio, f.balls[best])) {
        best = j;
        best_ratio = ratio;
      }
    }
    used[best] = 1;
    est.value += f.balls[best].cost;
    est.cover.push_back(f.balls[best].ball);
    for (auto i : f.balls[best].covers) {
      if (!covered[i]) {
        covered[i] = 1;
        --remaining;
      }
    }
  }
  return est;
}

ContentEstimate content_upper(const SpaceGraph& g, const ContentQuery& q) {
  return content_upper(build_candidates(g, q));
}

ContentEstimate content_exact_small(const CandidateFamily& f, const ExactCaps& caps) {
  ContentEstimate est;
  est.kind = EstimateKind::exact;
  if (f.target.empty()) return est;
  if (f.balls.size() > caps.max_candidates && f.target.size() > caps.max_targets)
    throw Error("instance-too-large", "exact content caps exceeded");
  require_coverable(f);

  // Drop candidates dominated by a no-more-expensive superset.
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < f.balls.size(); ++j) {
    bool dominated = false;
    for (std::size_t k = 0; k < f.balls.size() && !dominated; ++k) {
      if (k == j) continue;
      const auto& a = f.balls[j];
      const auto& b = f.balls[k];
      if (b.cost > a.cost) continue;
      if (b.cost == a.cost && b.covers == a.covers && k > j) continue;
      dominated = std::includes(b.covers.begin(), b.covers.end(), a.covers.begin(), a.covers.end());
    }
    if (!dominated) keep.push_back(j);
  }
  // Cheapest first so that good covers are found early.
  std::stable_sort(keep.begin(), keep.end(),
                   [&](std::size_t a, std::size_t b) { return f.balls[a].cost < f.balls[b].cost; });

  const std::size_t m = f.target.size();
  std::vector<std::vector<std::size_t>> by_elem(m);
  for (std::size_t j : keep)
    for (auto i : f.balls[j].covers) by_elem[i].push_back(j);

  std::vector<int> count(m, 0);
  std::vector<std::uint8_t> banned(f.balls.size(), 0);
  std::vector<std::size_t> chosen, best_set;
  double best = kInf;
  // Seed the bound with the greedy cover.
  {
    const auto greedy = content_upper(f);
    best = greedy.value * (1.0 + 1e-12);
    for (const auto& b : greedy.cover) {
      for (std::size_t j = 0; j < f.balls.size(); ++j) {
        if (f.balls[j].ball.center == b.center && f.balls[j].ball.radius == b.radius) {
          best_set.push_back(j);
          break;
        }
      }
    }
  }

  std::function<void(double)> search = [&](double cost) {
    // Uncovered element with the fewest remaining options; bound by the
    // largest cheapest-option cost among uncovered elements.
    std::size_t pick = m;
    std::size_t fewest = 0;
    double bound = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (count[i] > 0) continue;
      std::size_t options = 0;
      double cheapest = kInf;
      for (std::size_t j : by_elem[i]) {
        if (banned[j]) continue;
        ++options;
        cheapest = std::min(cheapest, f.balls[j].cost);
      }
      if (options == 0) return;
      bound = std::max(bound, cheapest);
      if (pick == m || options < fewest) {
        pick = i;
        fewest = options;
      }
    }
    if (pick == m) {
      if (cost < best) {
        best = cost;
        best_set = chosen;
      }
      return;
    }
    if (cost + bound >= best) return;
    std::vector<std::size_t> tried;
    for (std::size_t j : by_elem[pick]) {
      if (banned[j]) continue;
      chosen.push_back(j);
      for (auto i : f.balls[j].covers) ++count[i];
      search(cost + f.balls[j].cost);
      for (auto i : f.balls[j].covers) --count[i];
      chosen.pop_back();
      banned[j] = 1;  // later branches exclude j
      tried.push_back(j);
    }
    for (std::size_t j : tried) banned[j] = 0;
  };
  search(0.0);

  std::sort(best_set.begin(), best_set.end());
  est.value = 0.0;
  for (std::size_t j : best_set) {
    est.value += f.balls[j].cost;
    est.cover.push_back(f.balls[j].ball);
  }
  return est;
}

ContentEstimate content_exact_small(const SpaceGraph& g, const ContentQuery& q,
                                    const ExactCaps& caps) {
  return content_exact_small(build_candidates(g, q), caps);
}

ContentEstimate content_lower_frostman(const CandidateFamily& f, const SpaceGraph& g,
                                       const LowerOptions& opt) {
  ContentEstimate est;
  est.kind = EstimateKind::lower;
  const std::size_t m = f.target.size();
  if (m == 0) return est;
  std::vector<double> nu(m, 0.0);
  if (f.balls.size() * m <= opt.lp_cell_limit) {
    std::vector<std::vector<double>> A(f.balls.size(), std::vector<double>(m, 0.0));
    std::vector<double> b(f.balls.size());
    for (std::size_t j = 0; j < f.balls.size(); ++j) {
      for (auto i : f.balls[j].covers) A[j][i] = 1.0;
      b[j] = f.balls[j].cost;
    }
    const auto lp = maximize_packing(A, b, std::vector<double>(m, 1.0));
    if (lp.optimal) {
      nu = lp.x;
      est.lp_solved = true;
    }
  }
  if (!est.lp_solved) {
    if (!opt.seed.empty()) {
      if (opt.seed.size() != m) throw Error("invalid-seed", "seed size differs from target size");
      nu = opt.seed;
    } else {
      for (std::size_t i = 0; i < m; ++i) nu[i] = g.mass(f.target[i]);
    }
  }
  // Scale into exact feasibility. LP optima only need rounding repair; seed
  // measures carry arbitrary normalisation and are scaled to the tightest ball.
  double factor = est.lp_solved ? 1.0 : kInf;
  for (const auto& b : f.balls) {
    double load = 0.0;
    for (auto i : b.covers) load += std::max(0.0, nu[i]);
    if (load > 0.0) factor = std::min(factor, b.cost / load);
  }
  if (std::isinf(factor)) factor = 0.0;
  est.dual.resize(m);
  est.value = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    est.dual[i] = std::max(0.0, nu[i]) * factor;
    est.value += est.dual[i];
  }
  // Rounding in the scaled sum can overshoot a constraint by one ulp; shave it.
  for (const auto& b : f.balls) {
    double load = 0.0;
    for (auto i : b.covers) load += est.dual[i];
    if (load > b.cost) {
      const double s = b.cost / load * (1.0 - 1e-15);
      for (auto& x : est.dual) x *= s;
      est.value *= s;
    }
  }
  return est;
}

ContentEstimate content_lower_frostman(const SpaceGraph& g, const ContentQuery& q,
                                       const LowerOptions& opt) {
  return content_lower_frostman(build_candidates(g, q), g, opt);
}

ScalingReport verify_content_scaling(const SpaceGraph& g, std::span<const VertexId> A, double t,
                                     double tau, double rho, bool exact, const ExactCaps& caps) {
  if (tau < t) throw Error("invalid-exponent", "tau must be at least t");
  ContentQuery qt;
  qt.target.assign(A.begin(), A.end());
  qt.t = t;
  qt.R = rho;
  ContentQuery qtau = qt;
  qtau.t = tau;
  const auto ft = build_candidates(g, qt);
  const auto ftau = build_candidates(g, qtau);
  ScalingReport rep;
  rep.exact = exact;
  const double scale = std::pow(rho, tau - t);
  if (exact) {
    rep.lhs = scale * content_exact_small(ftau, caps).value;
    rep.rhs = content_exact_small(ft, caps).value;
  } else {
    rep.lhs = scale * content_upper(ftau).value;
    rep.rhs = content_lower_frostman(ft, g).value;
  }
  rep.margin = rep.lhs - rep.rhs;
  rep.ok = rep.margin >= -1e-12 * std::max(1.0, std::abs(rep.rhs));
  return rep;
}

ScaleChangeReport verify_scale_change(const SpaceGraph& g, std::span<const VertexId> K, double t,
                                      double alpha, double rho, std::span<const Ball> cover) {
  if (!(alpha >= rho) || !(rho > 0.0)) throw Error("invalid-radius", "need alpha >= rho > 0");
  ScaleChangeReport rep;
  rep.alpha = alpha;
  rep.rho = rho;
  std::vector<VertexId> targets(K.begin(), K.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  std::vector<std::uint8_t> in_k(g.size(), 0), covered(g.size(), 0);
  for (VertexId v : targets) in_k[v] = 1;

  BallSearch search(g);
  BallSearch probe(g);
  for (const Ball& b : cover) {
    if (b.radius > alpha * (1.0 + 1e-12)) throw Error("invalid-radius", "cover ball exceeds alpha");
    const double mass = search.mass(b);
    rep.cover_sum += mass / std::pow(b.radius, t);
    std::vector<VertexId> inside;
    for (const auto& r : search.members(b)) {
      if (in_k[r.vertex]) inside.push_back(r.vertex);
    }
    if (b.radius <= rho * (1.0 + 1e-12)) {
      rep.refined_sum += mass / std::pow(b.radius, t);
      ++rep.refined_balls;
      for (VertexId v : inside) covered[v] = 1;
      continue;
    }
    std::sort(inside.begin(), inside.end());
    // Greedy maximal rho/2-separated centres among K inside the ball: every
    // rejected point lies within rho/2 of an accepted one.
    std::vector<std::uint8_t> near(g.size(), 0);
    for (VertexId v : inside) {
      if (near[v]) continue;
      for (const auto& r : probe.members({v, 0.5 * rho})) near[r.vertex] = 1;
      rep.refined_sum += probe.mass({v, rho}) / std::pow(rho, t);
      ++rep.refined_balls;
      for (const auto& r : probe.members({v, rho})) covered[r.vertex] = 1;
    }
  }
  rep.covers = true;
  for (VertexId v : targets) rep.covers = rep.covers && covered[v];
  rep.empirical_C = rep.cover_sum > 0.0
                        ? rep.refined_sum / (std::pow(alpha / rho, t) * rep.cover_sum)
                        : 0.0;
  return rep;
}

}  // namespace visb
