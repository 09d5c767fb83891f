#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "visbound/space.hpp"
#include "visbound/tolerance.hpp"

namespace visb {

enum class Role : std::uint8_t { exterior = 0, interior = 1, boundary = 2 };

/// Partition of a SpaceGraph into interior, boundary (non-interior vertices
/// adjacent to the interior) and exterior, with d_omega = distance to the
/// boundary set.
class DomainDecomp {
 public:
  const SpaceGraph& space() const { return *space_; }
  Role role(VertexId v) const { return static_cast<Role>(role_[v]); }
  bool is_interior(VertexId v) const { return role_[v] == static_cast<std::uint8_t>(Role::interior); }
  bool is_boundary(VertexId v) const { return role_[v] == static_cast<std::uint8_t>(Role::boundary); }
  const std::vector<VertexId>& interior() const { return interior_; }
  const std::vector<VertexId>& boundary() const { return boundary_; }
  /// Nonzero exactly on interior vertices; usable as a search filter.
  const std::vector<std::uint8_t>& interior_mask() const { return interior_mask_; }
  /// Nonzero on interior and boundary vertices (the closure).
  const std::vector<std::uint8_t>& closure_mask() const { return closure_mask_; }
  double d_omega(VertexId v) const { return d_omega_[v]; }
  const std::vector<double>& d_omega() const { return d_omega_; }
  /// Nearest boundary vertex (ties toward the smaller id).
  VertexId nearest_boundary(VertexId v) const { return nearest_boundary_[v]; }
  std::size_t discarded_interior() const { return discarded_; }
  /// Interior vertex maximising d_omega (ties toward the smaller id).
  VertexId deepest() const;

 private:
  friend DomainDecomp decompose(const SpaceGraph&, std::span<const std::uint8_t>);

  const SpaceGraph* space_ = nullptr;
  std::vector<std::uint8_t> role_;
  std::vector<std::uint8_t> interior_mask_;
  std::vector<std::uint8_t> closure_mask_;
  std::vector<VertexId> interior_;
  std::vector<VertexId> boundary_;
  std::vector<double> d_omega_;
  std::vector<VertexId> nearest_boundary_;
  std::size_t discarded_ = 0;
};

/// Builds the decomposition from a per-vertex interior predicate. The largest
/// connected piece of the interior is kept. Throws "empty-domain" and
/// "boundaryless-domain".
DomainDecomp decompose(const SpaceGraph& g, std::span<const std::uint8_t> interior_mask);

/// Vertex path with prefix lengths.
struct Curve {
  std::vector<VertexId> path;
  std::vector<double> prefix;  // prefix[i] = length of path[0..i]

  double length() const { return prefix.empty() ? 0.0 : prefix.back(); }
  double tail_length(std::size_t i) const { return length() - prefix[i]; }
  VertexId front() const { return path.front(); }
  VertexId back() const { return path.back(); }
};

/// Validates consecutive adjacency (throws "curve-not-connected").
Curve make_curve(const SpaceGraph& g, std::vector<VertexId> path);
/// Concatenates curves whose endpoints coincide.
Curve concat(const SpaceGraph& g, const Curve& a, const Curve& b);
Curve reversed(const SpaceGraph& g, const Curve& c);
/// Shortest path from a to b through vertices allowed by `allowed` (plus b).
Curve geodesic_curve(const SpaceGraph& g, VertexId a, VertexId b,
                     const std::vector<std::uint8_t>* allowed = nullptr);

struct JohnCheck {
  bool ok = true;
  double worst_ratio = 0.0;  // max over z of tail(z)/d_omega(z), boundary endpoint skipped
  VertexId witness = kNoVertex;
};

/// Twisted-cone test for a curve from the John-centre side (front) to its
/// target (back): tail(z) <= c * distortion * d_omega(z) + length_slack for
/// every vertex except a boundary endpoint. Throws "curve-escapes-domain".
JohnCheck verify_john_curve(const DomainDecomp& dd, const Curve& curve, double c,
                            const Tolerances& tol);

/// Ladder of John constants on which quality labels are resolved.
std::vector<double> default_john_ladder();

/// Result of the fixed-c twisted-cone reachability search from z0.
struct JohnReach {
  VertexId center = kNoVertex;
  double c = 1.0;
  std::vector<double> slack;    // remaining cone budget; >= 0 iff reachable
  std::vector<VertexId> pred;   // predecessor on the best admissible path
};

/// Exact maximum-slack search: slack(z0) = cap(z0), slack(v) = min(slack(u) - |uv|,
/// cap(v)) with cap(v) = c * distortion * d_omega(v) + length_slack. Interior
/// vertices only; boundary vertices are scored as curve endpoints (no cap).
JohnReach john_reach(const DomainDecomp& dd, VertexId z0, double c, const Tolerances& tol);

/// Admissible curve z0 -> target recovered from the search.
Curve john_curve(const DomainDecomp& dd, const JohnReach& reach, VertexId target);

struct JohnSubdomain {
  VertexId center = kNoVertex;
  double c = 1.0;
  /// quality[v] = 1/c' for the smallest ladder constant c' (the requested c is
  /// always on the ladder) at which v is reachable; +inf at z0, 0 if never.
  std::vector<double> quality;
  std::vector<std::uint8_t> member;   // interior vertices in Omega_{z0}(c)
  std::vector<VertexId> vertices;     // same, sorted
  JohnReach reach;                    // search at the requested c
};

/// Throws "center-outside" when z0 is not interior.
JohnSubdomain john_subdomain(const DomainDecomp& dd, VertexId z0, double c, const Tolerances& tol,
                             std::span<const double> ladder = {});

struct VisibleBoundary {
  std::vector<VertexId> vertices;  // sorted
  std::vector<std::uint8_t> flag;  // per vertex
  bool localized = false;
  double localization_radius = 0.0;
};

/// Boundary vertices reached by an admissible curve from z0 at constant c.
/// With `localize`, intersected with B(z0, 3 d_omega(z0) + length_slack).
VisibleBoundary visible_boundary(const DomainDecomp& dd, VertexId z0, double c,
                                 const Tolerances& tol, bool localize = false);
VisibleBoundary visible_boundary(const DomainDecomp& dd, const JohnReach& reach,
                                 const Tolerances& tol, bool localize = false);

struct ConeDomain {
  std::vector<VertexId> vertices;   // sorted
  std::vector<std::uint8_t> mask;
  double certificate_c = 0.0;
  bool certified = false;           // every vertex reachable in C[gamma] at certificate_c
  std::size_t failing = 0;
  double min_quality = 0.0;         // min over C[gamma] of the quality label
};

/// C[gamma] = union of B(gamma(t), d_omega(gamma(t))) over curve vertices,
/// certified by re-running john_subdomain inside C[gamma] from curve.front().
ConeDomain cone_domain(const DomainDecomp& dd, const Curve& curve, double certificate_c,
                       const Tolerances& tol);

}  // namespace visb
