#include "visbound/domain.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "visbound/error.hpp"

namespace visb {

namespace {

// Slack comparisons are made up to this relative rounding allowance.
constexpr double kRel = 1e-12;

bool admissible(double slack, double scale) { return slack >= -kRel * std::max(1.0, scale); }

}  // namespace

VertexId DomainDecomp::deepest() const {
  VertexId best = kNoVertex;
  for (VertexId v : interior_) {
    if (best == kNoVertex || d_omega_[v] > d_omega_[best]) best = v;
  }
  return best;
}

DomainDecomp decompose(const SpaceGraph& g, std::span<const std::uint8_t> interior_mask) {
  const std::size_t n = g.size();
  if (interior_mask.size() != n) throw Error("empty-domain", "interior mask size mismatch");

  // Largest connected piece of the requested interior.
  std::vector<int> label(n, -1);
  std::vector<VertexId> stack;
  std::vector<VertexId> best;
  std::size_t requested = 0;
  for (VertexId s = 0; s < n; ++s) {
    if (!interior_mask[s]) continue;
    ++requested;
    if (label[s] >= 0) continue;
    std::vector<VertexId> piece;
    label[s] = static_cast<int>(s);
    stack.push_back(s);
    while (!stack.empty()) {
      const VertexId u = stack.back();
      stack.pop_back();
      piece.push_back(u);
      for (const auto& e : g.neighbors(u)) {
        if (interior_mask[e.to] && label[e.to] < 0) {
          label[e.to] = static_cast<int>(s);
          stack.push_back(e.to);
        }
      }
    }
    if (piece.size() > best.size()) best = std::move(piece);
  }
  if (best.empty()) throw Error("empty-domain", "interior is empty");

  DomainDecomp dd;
  dd.space_ = &g;
  dd.discarded_ = requested - best.size();
  dd.role_.assign(n, static_cast<std::uint8_t>(Role::exterior));
  dd.interior_mask_.assign(n, 0);
  dd.closure_mask_.assign(n, 0);
  std::sort(best.begin(), best.end());
  for (VertexId v : best) {
    dd.role_[v] = static_cast<std::uint8_t>(Role::interior);
    dd.interior_mask_[v] = 1;
    dd.closure_mask_[v] = 1;
  }
  dd.interior_ = std::move(best);
  for (VertexId v : dd.interior_) {
    for (const auto& e : g.neighbors(v)) {
      if (dd.role_[e.to] == static_cast<std::uint8_t>(Role::exterior)) {
        dd.role_[e.to] = static_cast<std::uint8_t>(Role::boundary);
        dd.closure_mask_[e.to] = 1;
        dd.boundary_.push_back(e.to);
      }
    }
  }
  if (dd.boundary_.empty()) throw Error("boundaryless-domain", "domain has no boundary vertices");
  std::sort(dd.boundary_.begin(), dd.boundary_.end());

  auto field = geodesic_distance(g, dd.boundary_);
  dd.d_omega_ = std::move(field.dist);
  dd.nearest_boundary_ = std::move(field.source);
  return dd;
}

Curve make_curve(const SpaceGraph& g, std::vector<VertexId> path) {
  if (path.empty()) throw Error("empty-curve", "curve has no vertices");
  Curve c;
  c.prefix.reserve(path.size());
  c.prefix.push_back(0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto len = g.edge_length(path[i - 1], path[i]);
    if (!len) throw Error("curve-not-connected", "consecutive curve vertices are not adjacent");
    c.prefix.push_back(c.prefix.back() + *len);
  }
  c.path = std::move(path);
  return c;
}

Curve concat(const SpaceGraph& g, const Curve& a, const Curve& b) {
  if (a.path.empty()) return b;
  if (b.path.empty()) return a;
  if (a.back() != b.front()) throw Error("curve-not-connected", "curves do not share an endpoint");
  std::vector<VertexId> path = a.path;
  path.insert(path.end(), b.path.begin() + 1, b.path.end());
  return make_curve(g, std::move(path));
}

Curve reversed(const SpaceGraph& g, const Curve& c) {
  std::vector<VertexId> path(c.path.rbegin(), c.path.rend());
  return make_curve(g, std::move(path));
}

Curve geodesic_curve(const SpaceGraph& g, VertexId a, VertexId b,
                     const std::vector<std::uint8_t>* allowed) {
  if (a == b) return make_curve(g, {a});
  std::vector<std::uint8_t> mask;
  SearchOptions opt;
  if (allowed != nullptr) {
    mask = *allowed;
    mask[a] = 1;
    mask[b] = 1;
    opt.allowed = &mask;
  }
  const VertexId target[1] = {b};
  opt.stop_after = target;
  const VertexId src[1] = {a};
  auto field = geodesic_distance(g, src, opt);
  if (std::isinf(field.dist[b])) throw Error("no-path", "target unreachable from source");
  return make_curve(g, field.path_to(b));
}

JohnCheck verify_john_curve(const DomainDecomp& dd, const Curve& curve, double c,
                            const Tolerances& tol) {
  const std::size_t n = curve.path.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!dd.is_interior(curve.path[i])) {
      throw Error("curve-escapes-domain", "curve leaves the domain before its endpoint");
    }
  }
  const VertexId last = curve.back();
  if (!dd.is_interior(last) && !dd.is_boundary(last)) {
    throw Error("curve-escapes-domain", "curve ends outside the closure");
  }
  JohnCheck out;
  const std::size_t stop = dd.is_boundary(last) ? n - 1 : n;
  for (std::size_t i = 0; i < stop; ++i) {
    const VertexId z = curve.path[i];
    const double tail = curve.tail_length(i);
    const double d = dd.d_omega(z);
    const double ratio = tail / d;
    if (ratio > out.worst_ratio || out.witness == kNoVertex) {
      out.worst_ratio = std::max(out.worst_ratio, ratio);
      out.witness = z;
    }
    const double cap = c * tol.distortion * d + tol.length_slack;
    if (!admissible(cap - tail, cap)) out.ok = false;
  }
  return out;
}

std::vector<double> default_john_ladder() {
  std::vector<double> ladder;
  for (double c = 1.0; c <= 4096.0; c *= 2.0) ladder.push_back(c);
  return ladder;
}

JohnReach john_reach(const DomainDecomp& dd, VertexId z0, double c, const Tolerances& tol) {
  const SpaceGraph& g = dd.space();
  if (z0 >= g.size() || !dd.is_interior(z0)) {
    throw Error("center-outside", "John centre must be an interior vertex");
  }
  const std::size_t n = g.size();
  JohnReach r;
  r.center = z0;
  r.c = c;
  r.slack.assign(n, -kInf);
  r.pred.assign(n, kNoVertex);
  const auto cap = [&](VertexId v) { return c * tol.distortion * dd.d_omega(v) + tol.length_slack; };

  // Slack only decreases along a path, so a max-first sweep settles each
  // vertex with its best achievable slack.
  using Item = std::pair<double, VertexId>;
  const auto cmp = [](const Item& a, const Item& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> queue(cmp);
  std::vector<std::uint8_t> settled(n, 0);
  r.slack[z0] = cap(z0);
  queue.emplace(r.slack[z0], z0);
  while (!queue.empty()) {
    const auto [s, u] = queue.top();
    queue.pop();
    if (settled[u] || s < r.slack[u]) continue;
    settled[u] = 1;
    for (const auto& e : g.neighbors(u)) {
      const VertexId v = e.to;
      if (settled[v]) continue;
      double ns;
      if (dd.is_interior(v)) {
        ns = std::min(s - e.length, cap(v));
      } else if (dd.is_boundary(v)) {
        ns = s - e.length;  // endpoint: no cone test
      } else {
        continue;
      }
      if (!admissible(ns, cap(v))) continue;
      const double tie = kRel * std::max(1.0, std::abs(ns));
      if (ns > r.slack[v] + tie) {
        r.slack[v] = ns;
        r.pred[v] = u;
        if (dd.is_interior(v)) queue.emplace(ns, v);
      } else if (ns >= r.slack[v] - tie && u < r.pred[v]) {
        r.pred[v] = u;
      }
    }
  }
  return r;
}

Curve john_curve(const DomainDecomp& dd, const JohnReach& reach, VertexId target) {
  if (target >= reach.slack.size() || std::isinf(reach.slack[target])) {
    throw Error("not-visible", "target is not reachable by an admissible curve");
  }
  std::vector<VertexId> path;
  for (VertexId v = target; v != kNoVertex; v = reach.pred[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return make_curve(dd.space(), std::move(path));
}

JohnSubdomain john_subdomain(const DomainDecomp& dd, VertexId z0, double c, const Tolerances& tol,
                             std::span<const double> ladder) {
  if (!(c >= 1.0)) throw Error("invalid-constant", "John constant must be at least 1");
  std::vector<double> cs = ladder.empty() ? default_john_ladder()
                                          : std::vector<double>(ladder.begin(), ladder.end());
  cs.push_back(c);
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());

  const std::size_t n = dd.space().size();
  JohnSubdomain out;
  out.center = z0;
  out.c = c;
  out.quality.assign(n, 0.0);
  out.member.assign(n, 0);
  std::size_t unresolved = dd.interior().size();
  for (double cj : cs) {
    if (unresolved == 0 && cj > c) break;
    JohnReach reach = john_reach(dd, z0, cj, tol);
    for (VertexId v : dd.interior()) {
      if (out.quality[v] == 0.0 && !std::isinf(reach.slack[v])) {
        out.quality[v] = 1.0 / cj;
        --unresolved;
      }
    }
    if (cj == c) out.reach = std::move(reach);
  }
  out.quality[z0] = kInf;
  for (VertexId v : dd.interior()) {
    if (!std::isinf(out.reach.slack[v])) {
      out.member[v] = 1;
      out.vertices.push_back(v);
    }
  }
  return out;
}

VisibleBoundary visible_boundary(const DomainDecomp& dd, const JohnReach& reach,
                                 const Tolerances& tol, bool localize) {
  const SpaceGraph& g = dd.space();
  VisibleBoundary out;
  out.flag.assign(g.size(), 0);
  out.localized = localize;
  std::vector<double> dist;
  if (localize) {
    out.localization_radius = 3.0 * dd.d_omega(reach.center) + tol.length_slack;
    SearchOptions opt;
    opt.radius = out.localization_radius;
    const VertexId src[1] = {reach.center};
    dist = geodesic_distance(g, src, opt).dist;
  }
  for (VertexId w : dd.boundary()) {
    if (std::isinf(reach.slack[w])) continue;
    if (localize && std::isinf(dist[w])) continue;
    out.flag[w] = 1;
    out.vertices.push_back(w);
  }
  return out;
}

VisibleBoundary visible_boundary(const DomainDecomp& dd, VertexId z0, double c,
                                 const Tolerances& tol, bool localize) {
  if (!(c >= 1.0)) throw Error("invalid-constant", "John constant must be at least 1");
  return visible_boundary(dd, john_reach(dd, z0, c, tol), tol, localize);
}

ConeDomain cone_domain(const DomainDecomp& dd, const Curve& curve, double certificate_c,
                       const Tolerances& tol) {
  const SpaceGraph& g = dd.space();
  ConeDomain out;
  out.certificate_c = certificate_c;
  out.mask.assign(g.size(), 0);
  BallSearch search(g);
  for (VertexId z : curve.path) {
    if (!dd.is_interior(z)) continue;
    for (const auto& r : search.members({z, dd.d_omega(z)})) out.mask[r.vertex] = 1;
  }
  for (VertexId v = 0; v < g.size(); ++v) {
    if (out.mask[v]) out.vertices.push_back(v);
  }
  if (out.vertices.empty()) return out;

  const DomainDecomp cone = decompose(g, out.mask);
  std::vector<double> ladder;
  for (double c = 1.0; c < certificate_c; c *= 2.0) ladder.push_back(c);
  const auto sub = john_subdomain(cone, curve.front(), std::max(1.0, certificate_c), tol, ladder);
  out.min_quality = kInf;
  for (VertexId v : out.vertices) {
    if (!sub.member[v]) ++out.failing;
    out.min_quality = std::min(out.min_quality, sub.quality[v]);
  }
  out.certified = out.failing == 0;
  return out;
}

}  // namespace visb
