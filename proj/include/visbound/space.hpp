#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace visb {

using VertexId = std::uint32_t;

inline constexpr VertexId kNoVertex = std::numeric_limits<VertexId>::max();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  VertexId to;
  double length;
};

/// Row-major boolean raster; `true` cells become vertices.
struct BoolRaster {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  BoolRaster() = default;
  BoolRaster(int r, int c, bool fill = false)
      : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

  bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool v) { cells[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
  std::size_t count() const;
};

/// Placement of a raster in the plane: cell (row, col) sits at
/// (origin_x + col*h, origin_y + row*h).
struct GridFrame {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double h = 1.0;

  std::array<double, 2> position(int row, int col) const {
    return {origin_x + col * h, origin_y + row * h};
  }
};

/// Per-cell density evaluated at the cell's planar position.
using WeightFunction = std::function<double(double x, double y)>;

/// Finite geodesic metric measure space: a connected graph with positive edge
/// lengths and positive vertex masses. Immutable after construction.
class SpaceGraph {
 public:
  /// Arbitrary weighted graph. Throws "degenerate-space" when disconnected or
  /// when any length or mass is non-positive.
  static SpaceGraph from_edges(std::size_t vertex_count,
                               std::span<const std::array<double, 3>> edges,  // (u, v, length)
                               std::vector<double> masses, double h,
                               std::vector<std::array<double, 2>> positions = {});

  std::size_t size() const { return masses_.size(); }
  double h() const { return h_; }
  double mass(VertexId v) const { return masses_[v]; }
  const std::vector<double>& masses() const { return masses_; }
  double total_mass() const { return total_mass_; }
  std::span<const Edge> neighbors(VertexId v) const {
    return {edges_.data() + offsets_[v], edges_.data() + offsets_[v + 1]};
  }
  std::array<double, 2> position(VertexId v) const { return positions_[v]; }
  /// Edge length between adjacent vertices, or nullopt.
  std::optional<double> edge_length(VertexId u, VertexId v) const;
  double min_edge_length() const { return min_edge_; }
  double max_edge_length() const { return max_edge_; }

  // Grid bookkeeping (rows/cols are 0 for non-grid graphs).
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const GridFrame& frame() const { return frame_; }
  std::optional<VertexId> vertex_at(int row, int col) const;
  std::array<int, 2> cell(VertexId v) const { return cells_[v]; }
  std::size_t discarded_cells() const { return discarded_; }

 private:
  friend SpaceGraph build_grid_space(const BoolRaster&, const GridFrame&, const WeightFunction&);

  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<double> masses_;
  std::vector<std::array<double, 2>> positions_;
  std::vector<std::array<int, 2>> cells_;
  std::vector<VertexId> cell_to_vertex_;
  double h_ = 1.0;
  double total_mass_ = 0.0;
  double min_edge_ = kInf;
  double max_edge_ = 0.0;
  int rows_ = 0;
  int cols_ = 0;
  GridFrame frame_;
  std::size_t discarded_ = 0;
};

/// 8-neighbour grid graph over true cells with octile edge lengths and
/// mu(x) = weight(x) * h^2. Only the largest connected component is kept;
/// discarded_cells() reports how many true cells were dropped.
SpaceGraph build_grid_space(const BoolRaster& mask, const GridFrame& frame,
                            const WeightFunction& weight);

/// Convenience overload with unit density.
SpaceGraph build_grid_space(const BoolRaster& mask, double h);

/// Open-ball membership for a computed distance: d < r, with distances equal
/// to r up to rounding treated as outside.
bool inside_open_ball(double d, double r);

struct Ball {
  VertexId center = kNoVertex;
  double radius = 0.0;

  Ball dilate(double factor) const { return {center, radius * factor}; }
};

struct DistanceField {
  std::vector<double> dist;
  std::vector<VertexId> pred;    // kNoVertex for sources and unreached vertices
  std::vector<VertexId> source;  // originating source, kNoVertex when unreached

  std::vector<VertexId> path_to(VertexId v) const;  // source ... v
};

struct SearchOptions {
  double radius = kInf;                          // settle only d < radius
  const std::vector<std::uint8_t>* allowed = nullptr;  // vertex filter (nonzero = usable)
  std::span<const VertexId> stop_after;          // stop once all of these are settled
};

/// Multi-source shortest paths (Dijkstra). Ties are broken toward the smaller
/// predecessor id so that paths are reproducible. Unreached vertices get +inf.
DistanceField geodesic_distance(const SpaceGraph& g, std::span<const VertexId> sources,
                                const SearchOptions& options = {});

struct Reached {
  VertexId vertex;
  double dist;
};

/// Reusable scratch for many truncated searches on one graph. Not thread-safe;
/// use one instance per thread.
class BallSearch {
 public:
  explicit BallSearch(const SpaceGraph& g);

  /// Vertices with d(center, y) < radius in nondecreasing distance order.
  const std::vector<Reached>& members(const Ball& b,
                                      const std::vector<std::uint8_t>* allowed = nullptr);
  /// Multi-source variant: d(sources, y) < radius.
  const std::vector<Reached>& within(std::span<const VertexId> sources, double radius,
                                     const std::vector<std::uint8_t>* allowed = nullptr);
  /// Predecessor of v in the most recent search (kNoVertex for sources).
  VertexId pred(VertexId v) const { return pred_[v]; }
  VertexId source(VertexId v) const { return source_[v]; }
  double mass(const Ball& b);
  /// d(a, b) by a search that stops when b is settled (+inf beyond `cutoff`).
  double distance(VertexId a, VertexId b, double cutoff = kInf);

  const SpaceGraph& graph() const { return *g_; }

 private:
  void reset();

  const SpaceGraph* g_;
  std::vector<double> dist_;
  std::vector<VertexId> pred_;
  std::vector<VertexId> source_;
  std::vector<std::uint8_t> settled_;
  std::vector<VertexId> touched_;
  std::vector<Reached> out_;
};

/// Exactly {y : d(center, y) < radius}, sorted by vertex id.
std::vector<VertexId> ball_members(const SpaceGraph& g, const Ball& b);
double ball_mass(const SpaceGraph& g, const Ball& b);

struct DoublingSample {
  VertexId center;
  double radius;
};

struct DoublingEstimate {
  double constant = 1.0;  // max over samples of mu(2B)/mu(B)
  VertexId worst_center = kNoVertex;
  double worst_radius = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Lower bound for the doubling constant over the given samples.
DoublingEstimate doubling_constant(const SpaceGraph& g, std::span<const DoublingSample> samples);

/// Upper bound on the number of eps-separated points inside a ball of radius R,
/// implied by doubling constant `cd` (disjoint eps/2-balls argument).
double packing_bound(double cd, double R, double eps);

}  // namespace visb
