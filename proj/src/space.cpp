#include "visbound/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "visbound/error.hpp"

namespace visb {

namespace {

using QueueItem = std::pair<double, VertexId>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

// Relative tolerance used to recognise equal-length alternatives when
// breaking shortest-path ties.
constexpr double kTieRel = 1e-12;

bool same_length(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= kTieRel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

bool beyond(double d, double radius) { return !inside_open_ball(d, radius); }

std::vector<std::vector<VertexId>> components(std::size_t n,
                                              const std::vector<std::size_t>& offsets,
                                              const std::vector<Edge>& edges) {
  std::vector<int> label(n, -1);
  std::vector<std::vector<VertexId>> out;
  std::vector<VertexId> stack;
  for (VertexId s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    out.emplace_back();
    const int id = static_cast<int>(out.size()) - 1;
    label[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const VertexId u = stack.back();
      stack.pop_back();
      out.back().push_back(u);
      for (std::size_t e = offsets[u]; e < offsets[u + 1]; ++e) {
        const VertexId v = edges[e].to;
        if (label[v] < 0) {
          label[v] = id;
          stack.push_back(v);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

}  // namespace

std::size_t BoolRaster::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

SpaceGraph SpaceGraph::from_edges(std::size_t vertex_count,
                                  std::span<const std::array<double, 3>> edges,
                                  std::vector<double> masses, double h,
                                  std::vector<std::array<double, 2>> positions) {
  if (vertex_count == 0) throw Error("empty-space", "graph has no vertices");
  if (masses.size() != vertex_count) throw Error("degenerate-space", "mass count mismatch");
  if (!(h > 0.0)) throw Error("degenerate-space", "cell size must be positive");
  for (double m : masses) {
    if (!(m > 0.0)) throw Error("degenerate-space", "vertex masses must be positive");
  }
  std::vector<std::vector<Edge>> adj(vertex_count);
  for (const auto& e : edges) {
    const auto u = static_cast<VertexId>(e[0]);
    const auto v = static_cast<VertexId>(e[1]);
    if (u >= vertex_count || v >= vertex_count || u == v) {
      throw Error("degenerate-space", "invalid edge endpoint");
    }
    if (!(e[2] > 0.0)) throw Error("degenerate-space", "edge lengths must be positive");
    adj[u].push_back({v, e[2]});
    adj[v].push_back({u, e[2]});
  }
  SpaceGraph g;
  g.h_ = h;
  g.offsets_.assign(vertex_count + 1, 0);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    auto& list = adj[v];
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    g.offsets_[v + 1] = g.offsets_[v] + list.size();
    for (const auto& e : list) {
      g.edges_.push_back(e);
      g.min_edge_ = std::min(g.min_edge_, e.length);
      g.max_edge_ = std::max(g.max_edge_, e.length);
    }
  }
  if (vertex_count > 1 && components(vertex_count, g.offsets_, g.edges_).size() != 1) {
    throw Error("degenerate-space", "graph is not connected");
  }
  g.masses_ = std::move(masses);
  g.total_mass_ = std::accumulate(g.masses_.begin(), g.masses_.end(), 0.0);
  if (positions.empty()) {
    positions.resize(vertex_count);
    for (std::size_t v = 0; v < vertex_count; ++v) positions[v] = {static_cast<double>(v) * h, 0.0};
  }
  g.positions_ = std::move(positions);
  g.cells_.assign(vertex_count, {-1, -1});
  return g;
}

std::optional<double> SpaceGraph::edge_length(VertexId u, VertexId v) const {
  for (const auto& e : neighbors(u)) {
    if (e.to == v) return e.length;
  }
  return std::nullopt;
}

std::optional<VertexId> SpaceGraph::vertex_at(int row, int col) const {
  if (row < 0 || col < 0 || row >= rows_ || col >= cols_) return std::nullopt;
  const VertexId v = cell_to_vertex_[static_cast<std::size_t>(row) * cols_ + col];
  if (v == kNoVertex) return std::nullopt;
  return v;
}

SpaceGraph build_grid_space(const BoolRaster& mask, const GridFrame& frame,
                            const WeightFunction& weight) {
  if (mask.rows <= 0 || mask.cols <= 0 || mask.count() == 0) {
    throw Error("empty-space", "mask has no true cells");
  }
  if (!(frame.h > 0.0)) throw Error("degenerate-space", "cell size must be positive");

  const int rows = mask.rows;
  const int cols = mask.cols;
  const double h = frame.h;
  const double diag = std::sqrt(2.0) * h;
  constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

  // Provisional ids over all true cells, then keep the largest component.
  std::vector<VertexId> provisional(mask.cells.size(), kNoVertex);
  std::vector<std::array<int, 2>> cells;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (mask.at(r, c)) {
        provisional[static_cast<std::size_t>(r) * cols + c] = static_cast<VertexId>(cells.size());
        cells.push_back({r, c});
      }
    }
  }
  std::vector<std::size_t> offsets(cells.size() + 1, 0);
  std::vector<Edge> edges;
  for (std::size_t v = 0; v < cells.size(); ++v) {
    const auto [r, c] = cells[v];
    for (int k = 0; k < 8; ++k) {
      const int rr = r + kDr[k];
      const int cc = c + kDc[k];
      if (rr < 0 || cc < 0 || rr >= rows || cc >= cols || !mask.at(rr, cc)) continue;
      const VertexId u = provisional[static_cast<std::size_t>(rr) * cols + cc];
      edges.push_back({u, (kDr[k] != 0 && kDc[k] != 0) ? diag : h});
    }
    offsets[v + 1] = edges.size();
  }
  auto comps = components(cells.size(), offsets, edges);
  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].size() > comps[best].size()) best = i;
  }
  const auto& keep = comps[best];
  if (keep.size() < 2) {
    throw Error("degenerate-space", "no connected component with more than one cell");
  }

  std::vector<VertexId> remap(cells.size(), kNoVertex);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<VertexId>(i);

  SpaceGraph g;
  g.h_ = h;
  g.rows_ = rows;
  g.cols_ = cols;
  g.frame_ = frame;
  g.discarded_ = cells.size() - keep.size();
  g.cell_to_vertex_.assign(mask.cells.size(), kNoVertex);
  g.offsets_.assign(keep.size() + 1, 0);
  g.masses_.reserve(keep.size());
  g.positions_.reserve(keep.size());
  g.cells_.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const VertexId old = keep[i];
    const auto [r, c] = cells[old];
    g.cell_to_vertex_[static_cast<std::size_t>(r) * cols + c] = static_cast<VertexId>(i);
    const auto pos = frame.position(r, c);
    const double w = weight ? weight(pos[0], pos[1]) : 1.0;
    if (!(w > 0.0)) throw Error("degenerate-space", "weight must be positive on every cell");
    g.masses_.push_back(w * h * h);
    g.positions_.push_back(pos);
    g.cells_.push_back({r, c});
    for (std::size_t e = offsets[old]; e < offsets[old + 1]; ++e) {
      g.edges_.push_back({remap[edges[e].to], edges[e].length});
      g.min_edge_ = std::min(g.min_edge_, edges[e].length);
      g.max_edge_ = std::max(g.max_edge_, edges[e].length);
    }
    g.offsets_[i + 1] = g.edges_.size();
  }
  g.total_mass_ = std::accumulate(g.masses_.begin(), g.masses_.end(), 0.0);
  return g;
}

SpaceGraph build_grid_space(const BoolRaster& mask, double h) {
  return build_grid_space(mask, GridFrame{0.0, 0.0, h}, WeightFunction{});
}

std::vector<VertexId> DistanceField::path_to(VertexId v) const {
  std::vector<VertexId> path;
  if (v >= dist.size() || std::isinf(dist[v])) return path;
  for (VertexId cur = v; cur != kNoVertex; cur = pred[cur]) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

DistanceField geodesic_distance(const SpaceGraph& g, std::span<const VertexId> sources,
                                const SearchOptions& options) {
  if (sources.empty()) throw Error("empty-sources", "source set must be nonempty");
  const std::size_t n = g.size();
  DistanceField f;
  f.dist.assign(n, kInf);
  f.pred.assign(n, kNoVertex);
  f.source.assign(n, kNoVertex);
  std::vector<std::uint8_t> settled(n, 0);
  std::vector<std::uint8_t> wanted;
  std::size_t remaining = options.stop_after.size();
  if (remaining > 0) {
    wanted.assign(n, 0);
    remaining = 0;
    for (VertexId t : options.stop_after) {
      if (!wanted[t]) ++remaining;
      wanted[t] = 1;
    }
  }
  const auto usable = [&](VertexId v) {
    return options.allowed == nullptr || (*options.allowed)[v] != 0;
  };
  MinQueue queue;
  for (VertexId s : sources) {
    if (s >= n) throw Error("invalid-vertex", "source out of range");
    if (!usable(s)) continue;
    if (f.dist[s] > 0.0 || s < f.source[s]) {
      f.dist[s] = 0.0;
      f.source[s] = s;
      queue.emplace(0.0, s);
    }
  }
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled[u] || d > f.dist[u]) continue;
    if (beyond(d, options.radius)) break;
    settled[u] = 1;
    if (!wanted.empty() && wanted[u] && --remaining == 0) break;
    for (const auto& e : g.neighbors(u)) {
      const VertexId v = e.to;
      if (settled[v] || !usable(v)) continue;
      const double nd = d + e.length;
      if (nd < f.dist[v] && !same_length(nd, f.dist[v])) {
        f.dist[v] = nd;
        f.pred[v] = u;
        f.source[v] = f.source[u];
        queue.emplace(nd, v);
      } else if (same_length(nd, f.dist[v]) && u < f.pred[v]) {
        f.pred[v] = u;
        f.source[v] = f.source[u];
      }
    }
  }
  // Vertices left tentative by an early stop are reported as unreached.
  if (!std::isinf(options.radius) || !wanted.empty()) {
    for (std::size_t v = 0; v < n; ++v) {
      if (!settled[v]) {
        f.dist[v] = kInf;
        f.pred[v] = kNoVertex;
        f.source[v] = kNoVertex;
      }
    }
  }
  return f;
}

bool inside_open_ball(double d, double r) { return d < r && !same_length(d, r); }

BallSearch::BallSearch(const SpaceGraph& g)
    : g_(&g),
      dist_(g.size(), kInf),
      pred_(g.size(), kNoVertex),
      source_(g.size(), kNoVertex),
      settled_(g.size(), 0) {}

void BallSearch::reset() {
  for (VertexId v : touched_) {
    dist_[v] = kInf;
    pred_[v] = kNoVertex;
    source_[v] = kNoVertex;
    settled_[v] = 0;
  }
  touched_.clear();
  out_.clear();
}

const std::vector<Reached>& BallSearch::members(const Ball& b,
                                                const std::vector<std::uint8_t>* allowed) {
  const VertexId c = b.center;
  return within(std::span<const VertexId>(&c, 1), b.radius, allowed);
}

const std::vector<Reached>& BallSearch::within(std::span<const VertexId> sources, double radius,
                                               const std::vector<std::uint8_t>* allowed) {
  reset();
  const auto usable = [&](VertexId v) { return allowed == nullptr || (*allowed)[v] != 0; };
  MinQueue queue;
  for (VertexId s : sources) {
    if (!usable(s) || !(radius > 0.0)) continue;
    if (std::isinf(dist_[s])) touched_.push_back(s);
    if (dist_[s] > 0.0 || s < source_[s]) {
      dist_[s] = 0.0;
      source_[s] = s;
      queue.emplace(0.0, s);
    }
  }
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled_[u] || d > dist_[u]) continue;
    if (beyond(d, radius)) break;
    settled_[u] = 1;
    out_.push_back({u, d});
    for (const auto& e : g_->neighbors(u)) {
      const VertexId v = e.to;
      if (settled_[v] || !usable(v)) continue;
      const double nd = d + e.length;
      if (beyond(nd, radius)) continue;
      if (std::isinf(dist_[v])) touched_.push_back(v);
      if (nd < dist_[v] && !same_length(nd, dist_[v])) {
        dist_[v] = nd;
        pred_[v] = u;
        source_[v] = source_[u];
        queue.emplace(nd, v);
      } else if (same_length(nd, dist_[v]) && u < pred_[v]) {
        pred_[v] = u;
        source_[v] = source_[u];
      }
    }
  }
  return out_;
}

double BallSearch::mass(const Ball& b) {
  double m = 0.0;
  for (const auto& r : members(b)) m += g_->mass(r.vertex);
  return m;
}

double BallSearch::distance(VertexId a, VertexId b, double cutoff) {
  if (a == b) return 0.0;
  const double limit = std::isinf(cutoff) ? kInf : std::nextafter(cutoff, kInf);
  reset();
  MinQueue queue;
  dist_[a] = 0.0;
  touched_.push_back(a);
  queue.emplace(0.0, a);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled_[u] || d > dist_[u]) continue;
    if (d >= limit) break;
    settled_[u] = 1;
    if (u == b) return d;
    for (const auto& e : g_->neighbors(u)) {
      const VertexId v = e.to;
      if (settled_[v]) continue;
      const double nd = d + e.length;
      if (std::isinf(dist_[v])) touched_.push_back(v);
      if (nd < dist_[v]) {
        dist_[v] = nd;
        queue.emplace(nd, v);
      }
    }
  }
  return kInf;
}

std::vector<VertexId> ball_members(const SpaceGraph& g, const Ball& b) {
  BallSearch search(g);
  std::vector<VertexId> out;
  for (const auto& r : search.members(b)) out.push_back(r.vertex);
  std::sort(out.begin(), out.end());
  return out;
}

double ball_mass(const SpaceGraph& g, const Ball& b) {
  BallSearch search(g);
  return search.mass(b);
}

DoublingEstimate doubling_constant(const SpaceGraph& g, std::span<const DoublingSample> samples) {
  DoublingEstimate est;
  BallSearch search(g);
  for (const auto& s : samples) {
    const double inner = search.mass({s.center, s.radius});
    if (!(inner > 0.0)) {
      ++est.skipped;
      continue;
    }
    const double outer = search.mass({s.center, 2.0 * s.radius});
    const double ratio = outer / inner;
    ++est.used;
    if (ratio > est.constant || est.worst_center == kNoVertex) {
      est.constant = std::max(est.constant, ratio);
      est.worst_center = s.center;
      est.worst_radius = s.radius;
    }
  }
  return est;
}

double packing_bound(double cd, double R, double eps) {
  // Disjoint balls B(x_i, eps/2) sit inside B(x_i, 2R + eps/2); doubling
  // n times from radius eps/2 reaches that radius.
  const double n = std::ceil(std::log2((2.0 * R + 0.5 * eps) / (0.5 * eps)));
  return std::pow(std::max(cd, 1.0), std::max(n, 0.0));
}

}  // namespace visb
