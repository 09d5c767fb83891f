#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "visbound/domain.hpp"
#include "visbound/space.hpp"
#include "visbound/tolerance.hpp"

namespace visb {

inline constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

/// Balls of one common radius, each inside the domain and touching the
/// boundary at its contact vertex.
struct BallFamily {
  double radius = 0.0;
  std::vector<Ball> balls;
  std::vector<VertexId> contacts;  // nearest boundary vertex of each centre
};

/// Greedy maximal family of radius eta*rho balls well-placed along
/// B(w, 2 rho) ∩ ∂Ω: centres in B(w, rho) with d_omega in [eta*rho, eta*rho + contact],
/// pairwise disjoint 4-fold dilations, contacts at least 8*eta*rho apart and
/// every ball chainable to `seed` through radius eta*rho balls inside Ω with
/// centres in B(w, 2 rho). Candidates are taken by decreasing mu(B), then id.
/// Balls in `taken` (same radius) also block candidates. Throws
/// "scale-unresolved" when eta*rho < 2h and "seed-outside" when the seed is
/// not an admissible chain ball.
BallFamily well_placed_family(const DomainDecomp& dd, VertexId w, double rho, double eta,
                              const Ball& seed, const Tolerances& tol,
                              const BallFamily* taken = nullptr);

struct WellPlacedCheck {
  bool inside = true;       // every ball contained in Ω
  bool separated = true;    // 4B_i ∩ 4B_j empty (exact set test)
  bool contact = true;      // contact on ∂Ω, inside the window, within tol.contact of ∂B
  bool maximal = true;      // no admissible candidate was left out
  std::size_t candidates = 0;
};

/// Re-checks the well-placed invariants of a family and certifies maximality by
/// a full scan of the candidate set.
WellPlacedCheck check_well_placed(const DomainDecomp& dd, const BallFamily& family, VertexId w,
                                  double rho, double eta, const Ball& seed, const Tolerances& tol,
                                  const BallFamily* taken = nullptr);

/// Family plus connecting balls. Ball 0 is the seed, balls 1..family_count are
/// the family in order, the rest are chain balls. Two balls are adjacent when
/// the centre of one lies in the closure of the other.
struct ChainedFamily {
  double radius = 0.0;
  std::vector<Ball> balls;
  std::size_t family_count = 0;
  std::vector<std::vector<std::uint32_t>> adjacency;
  /// For each family ball, a minimal-hop chain of ball indices ending at the seed.
  std::vector<std::vector<std::uint32_t>> chains;

  std::size_t extra() const { return balls.size() - 1 - family_count; }
};

/// Union of shortest ball chains from each family ball to the seed, pruned to
/// local minimality (removing any chain ball disconnects the chain graph).
/// Chain centres range over Ω ∩ B(w, window_radius). Throws "chain-broken".
ChainedFamily chainable_closure(const DomainDecomp& dd, const BallFamily& family,
                                const Ball& seed, VertexId w, double window_radius);

/// Connectivity of the chain graph after dropping `removed` (kNoParent: none).
bool chain_connected(const ChainedFamily& f, std::uint32_t removed = kNoParent);

struct GenPoint {
  VertexId w = kNoVertex;          // boundary point
  VertexId center = kNoVertex;     // centre z_w of its ball in W_k^0
  std::uint32_t parent = kNoParent;
  double ball_mass = 0.0;          // mu(B(w, eta^k r))
  std::vector<std::uint32_t> children;  // D_k(w) as indices into the next level
  std::vector<VertexId> chain;     // chain centres from z_w to the parent's centre
};

struct Generation {
  double radius = 0.0;             // eta^k r
  std::vector<GenPoint> points;
  std::vector<ChainedFamily> families;  // W_k(w), one per parent (level >= 1)
  double min_separation = kInf;    // min distance between distinct points
  std::size_t max_chain = 0;       // longest minimal chain, in hops
};

struct GenerationOptions {
  double eta = 0.125;
  std::size_t depth = 2;
  bool strict = false;             // enforce eta < 1/168
  double resolution = 2.0;         // levels need eta^k r >= resolution * h
};

struct GenerationTree {
  VertexId z0 = kNoVertex;
  VertexId w0 = kNoVertex;
  double r = 0.0;
  double eta = 0.125;
  std::size_t requested_depth = 0;
  bool starved = false;               // some point found no children
  bool resolution_truncated = false;  // depth capped by the resolution guard
  std::vector<Generation> levels;

  std::size_t depth() const { return levels.empty() ? 0 : levels.size() - 1; }
};

inline constexpr double kStrictEtaCap = 1.0 / 168.0;

/// Iterated well-placed families from z0. Level k stops early (with the
/// matching flag) when eta^k r drops below the resolution guard or when some
/// point of the previous level gets no children. Throws "center-outside" and
/// "invalid-eta".
GenerationTree build_generations(const DomainDecomp& dd, VertexId z0,
                                 const GenerationOptions& opt, const Tolerances& tol);

struct ChainBound {
  std::size_t M = 0;              // longest minimal chain over all levels, in hops
  std::size_t M_john = 0;         // integer constant used by the curve certificates, max(M, 4)
  double doubling = 1.0;          // measured on the tree's own balls
  double packing = 0.0;           // separated-points bound in B(w, 2 eta^(k-1) r)
  bool ok = false;                // M <= 2 * packing
};

ChainBound chain_bound(const DomainDecomp& dd, const GenerationTree& tree);

struct FrostmanMeasure {
  std::size_t depth = 0;
  std::vector<std::vector<double>> a;  // a[k][i] = a(P_k[i], k)
  std::vector<double> level_mass;      // sum over each level

  const std::vector<double>& atoms() const { return a.back(); }
};

/// Weight recursion from a(w0, 0) = 1. Throws "orphaned-mass" when a point with
/// positive weight has no children below the measure depth.
FrostmanMeasure frostman_weights(const GenerationTree& tree);
/// Same, truncated to `depth` (<= tree.depth()).
FrostmanMeasure frostman_weights(const GenerationTree& tree, std::size_t depth);

struct FrostmanBoundReport {
  double p = 0.0;
  double q = 0.0;
  double eps = 0.0;                 // p - q
  double max_ratio = 0.0;           // nu(B) rho^p mu_Ω(B(w0,r)) / (mu_Ω(B) r^p)
  VertexId worst_center = kNoVertex;
  double worst_radius = 0.0;
  std::vector<double> radii;        // sampled radii
  std::vector<VertexId> centers;    // sampled centres
  bool finite = false;
};

/// Samples xi over the atoms and `random_boundary` boundary vertices
/// (std::mt19937_64 with `seed`), rho geometric from 4h up to r.
FrostmanBoundReport verify_frostman_bound(const DomainDecomp& dd, const GenerationTree& tree,
                                          const FrostmanMeasure& nu, double p, double q,
                                          std::size_t random_boundary = 32,
                                          std::uint64_t seed = 1);

struct TelescopingReport {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  double max_error = 0.0;
  std::size_t checked = 0;
  bool ok = false;                  // max_error <= 1e-12
};

/// nu_{k2}(B(w, 3 eta^k1 r)) = nu_{k1}(B(w, eta^k1 r)) = a(w, k1) for w in P_k1.
TelescopingReport verify_telescoping(const DomainDecomp& dd, const GenerationTree& tree,
                                     const FrostmanMeasure& nu, std::size_t k1, std::size_t k2);

/// Sum of the level-k weights lying in an open ball.
double level_measure(const DomainDecomp& dd, const GenerationTree& tree, const FrostmanMeasure& nu,
                     std::size_t k, const Ball& b);

struct GenerationCurve {
  Curve curve;                      // z0 ... z_w, w
  double c = 0.0;                   // 4 * M_john
  JohnCheck check;
  double chain_margin = kInf;       // min over chain vertices of d_omega - (eta^j r / 2 - h)
  bool chain_ok = true;
};

/// Chain-of-balls curve from z0 to P_k[index], certified at c = 4 M_john.
/// Throws "john-certificate" when the certificate fails.
GenerationCurve john_curve_from_generation(const DomainDecomp& dd, const GenerationTree& tree,
                                           std::size_t k, std::size_t index,
                                           std::size_t M_john, const Tolerances& tol);

}  // namespace visb
