#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "visbound/space.hpp"

namespace visb {

/// Family-relative t-codimensional content query. Balls are measured in the
/// ambient space; centres default to the target set and radii to h*2^j <= R.
struct ContentQuery {
  std::vector<VertexId> target;   // the set A (duplicates are ignored)
  double t = 1.0;
  double R = 1.0;                 // radius cap
  std::vector<VertexId> centers;  // empty: A itself
  std::vector<double> radii;      // empty: dyadic grid h*2^j in [min_radius, R]
  double min_radius = 0.0;        // floor for the default grid (at least h)
};

struct CandidateBall {
  Ball ball;
  double mass = 0.0;              // mu(B)
  double cost = 0.0;              // mu(B) / r^t
  std::vector<std::uint32_t> covers;  // indices into CandidateFamily::target, sorted
};

struct CandidateFamily {
  std::vector<VertexId> target;   // sorted, unique
  std::vector<CandidateBall> balls;
  double t = 1.0;
};

/// Dyadic radii h*2^j (j >= 0) inside [max(h, floor), R]; R itself when no
/// dyadic radius fits.
std::vector<double> dyadic_radii(double h, double R, double floor = 0.0);

CandidateFamily build_candidates(const SpaceGraph& g, const ContentQuery& q);

enum class EstimateKind { upper, lower, exact };
std::string to_string(EstimateKind k);

struct ContentEstimate {
  double value = 0.0;
  EstimateKind kind = EstimateKind::upper;
  std::vector<Ball> cover;        // upper and exact
  std::vector<double> dual;       // lower: weight per target vertex (family order)
  bool lp_solved = false;         // lower: exact LP optimum rather than a scaled seed
};

/// Greedy weighted set cover: cost / newly covered, ties toward larger radius
/// then smaller centre id. Throws "insufficient-candidates".
ContentEstimate content_upper(const CandidateFamily& f);
ContentEstimate content_upper(const SpaceGraph& g, const ContentQuery& q);

struct ExactCaps {
  std::size_t max_candidates = 24;
  std::size_t max_targets = 16;
};

/// Exact minimum cover over the candidate family by branch and bound.
/// Throws "instance-too-large" when both caps are exceeded and
/// "insufficient-candidates" when A cannot be covered.
ContentEstimate content_exact_small(const CandidateFamily& f, const ExactCaps& caps = {});
ContentEstimate content_exact_small(const SpaceGraph& g, const ContentQuery& q,
                                    const ExactCaps& caps = {});

struct LowerOptions {
  /// LP is solved when candidates * targets stays below this; otherwise the
  /// seed measure is scaled down to feasibility.
  std::size_t lp_cell_limit = 4'000'000;
  /// Seed weights per target vertex (family order); empty means mu restricted to A.
  std::vector<double> seed;
};

/// max nu(A) over nu >= 0 on A with nu(B) <= mu(B)/r^t for every candidate.
/// The returned weights satisfy every constraint exactly (post-scaled).
ContentEstimate content_lower_frostman(const CandidateFamily& f, const SpaceGraph& g,
                                       const LowerOptions& opt = {});
ContentEstimate content_lower_frostman(const SpaceGraph& g, const ContentQuery& q,
                                       const LowerOptions& opt = {});

/// rho^(tau - t) H^{-tau}_rho(A) >= H^{-t}_rho(A).
struct ScalingReport {
  double lhs = 0.0;     // rho^(tau-t) * content at tau
  double rhs = 0.0;     // content at t
  double margin = 0.0;  // lhs - rhs
  bool exact = false;   // both sides exact; otherwise upper(tau) vs lower(t)
  bool ok = false;
};

ScalingReport verify_content_scaling(const SpaceGraph& g, std::span<const VertexId> A, double t,
                                     double tau, double rho, bool exact,
                                     const ExactCaps& caps = {});

/// Refinement of a scale-alpha cover into radius-rho balls.
struct ScaleChangeReport {
  double alpha = 0.0;
  double rho = 0.0;
  double cover_sum = 0.0;      // sum mu(B_i)/r_i^t of the given cover
  double refined_sum = 0.0;    // cost of the refined rho-cover (>= H^{-t}_rho(K))
  double empirical_C = 0.0;    // refined_sum / ((alpha/rho)^t cover_sum)
  std::size_t refined_balls = 0;
  bool covers = false;         // refined family covers K
};

/// Balls of radius > rho are replaced by radius-rho balls centred at a greedy
/// maximal rho/2-separated subset of K inside B_i.
ScaleChangeReport verify_scale_change(const SpaceGraph& g, std::span<const VertexId> K, double t,
                                      double alpha, double rho, std::span<const Ball> cover);

}  // namespace visb
