#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "visbound/domain.hpp"
#include "visbound/space.hpp"
#include "visbound/tolerance.hpp"

namespace visb {

/// g(x) = max over interior neighbours y of |u(x) - u(y)| / d(x, y) on Ω, 0 elsewhere.
std::vector<double> minimal_upper_gradient(const DomainDecomp& dd, std::span<const double> u);

/// Edgewise check |u(x) - u(y)| <= (g(x) + g(y))/2 * d(x, y) over edges inside Ω.
bool is_upper_gradient(const DomainDecomp& dd, std::span<const double> u,
                       std::span<const double> g, double rel_slack = 1e-12);

struct TraceValues {
  std::vector<VertexId> support;
  std::vector<double> radii;                 // decreasing
  std::vector<double> value;                 // average at the smallest radius
  std::vector<std::vector<double>> averages; // [support][radius]
  std::vector<double> gap;                   // max |avg_i - avg_(i+1)| over successive radii
  std::vector<double> fine_gap;              // the same for the two smallest radii
};

/// mu-averages of u over B(z, r) ∩ Ω. Radii are sorted decreasing. Throws
/// "invalid-radii" (empty or non-positive) and "isolated-boundary-point".
TraceValues trace_values(const DomainDecomp& dd, std::span<const double> u,
                         std::span<const VertexId> support, std::vector<double> radii);

/// Geometric radii r_max, r_max/2, ... down to (not below) r_min.
std::vector<double> halving_radii(double r_max, double r_min);

struct BesovParams {
  double theta = 0.5;   // 1 - p/q
  double q = 3.0;
  double S = 2.0;
};

/// Exact double sum over ordered atom pairs y != z of
/// nu(y) nu(z) |f(y) - f(z)|^q / (d(y,z)^(theta q) nu(closed B(z, S d(y,z)))).
/// `dist` is the row-major atom distance matrix.
double besov_seminorm(std::span<const double> dist, std::span<const double> weight,
                      std::span<const double> f, const BesovParams& params);

/// Atom distance matrix by truncated shortest-path searches.
std::vector<double> atom_distances(const SpaceGraph& g, std::span<const VertexId> atoms);

double besov_seminorm(const SpaceGraph& g, std::span<const VertexId> atoms,
                      std::span<const double> weight, std::span<const double> f,
                      const BesovParams& params);

/// sup over balls B(x, r), x in the closure of Ω and r in `radii`, containing w
/// of the mu-average of chi_D f over B ∩ Ω. Vertices outside Ω get 0.
std::vector<double> restricted_maximal(const DomainDecomp& dd, std::span<const double> f,
                                       std::span<const std::uint8_t> window,
                                       std::span<const double> radii);

struct TraceParams {
  double p = 1.5;
  double q = 3.0;
  double q_hat = 2.0;
  double c = 2.0;                 // John constant, > 1
  double S = 2.0;
  std::vector<double> radii;      // trace radii; empty: halving from d_omega(z0) to 2h
  bool proof_mode = false;        // also evaluate the maximal-function gradient
};

struct TraceReport {
  std::vector<VertexId> atoms;
  std::vector<double> weights;
  TraceValues trace;

  double d0 = 0.0;                // d_omega(z0)
  double window_radius = 0.0;     // D(z0) = B(z0, 10 c d0) ∩ Ω
  double core_radius = 0.0;       // B* = B(z0, d0 / 2)
  std::size_t window_size = 0;
  std::size_t john_size = 0;      // |Ω_{z0}(c)|

  double theta = 0.0;             // 1 - p/q
  double eps = 0.0;               // (q - p)/2, so p + eps < q
  double beta0 = 0.0;             // (1 - p/q)/2, so p < q(1 - beta0)
  double tau = 0.0;               // 2c + 1
  double alpha = 0.0;             // 2 - 1/(2c)

  double besov = 0.0;             // ||Tu||^q in B^theta_{q,q,S}
  double energy = 0.0;            // sum over D(z0) of g_u^q mu
  double proof_energy = -1.0;     // same with the maximal-function gradient (proof mode)
  double lq_trace = 0.0;          // ||Tu||^q in L^q(nu)
  double lq_u = 0.0;              // ||u||^q in L^q(Ω_{z0}(c))
  double lq_rhs = 0.0;            // d0^-p lq_u + d0^(q-p) energy
  double ratio_energy = 0.0;      // besov / energy (0 when both vanish)
  double ratio_lq = 0.0;          // lq_trace / lq_rhs (0 when both vanish)
};

/// Checks 1 < p < q_hat < q and c > 1 (throws "invalid-exponents", "invalid-john-constant").
void validate_trace_params(const TraceParams& tp);

/// Besov energy of the trace against the Sobolev energy on D(z0). Throws
/// "center-outside", "atoms-mismatch" and "zero-energy" (nonzero seminorm
/// with vanishing energy).
TraceReport verify_trace_energy(const DomainDecomp& dd, VertexId z0, std::span<const double> u,
                                std::span<const VertexId> atoms, std::span<const double> weights,
                                const TraceParams& tp);

/// L^q(nu) norm of the trace against the local Sobolev norm; also fills the
/// energy part.
TraceReport verify_Lq_estimate(const DomainDecomp& dd, VertexId z0, std::span<const double> u,
                               std::span<const VertexId> atoms, std::span<const double> weights,
                               const TraceParams& tp, const Tolerances& tol);

}  // namespace visb
