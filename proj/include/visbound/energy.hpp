#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "visbound/space.hpp"

namespace visb {

/// (Lip u)(x) = max over neighbours y (inside `allowed` when given) of
/// |u(x) - u(y)| / d(x, y). Vertices outside `allowed` get 0.
std::vector<double> discrete_lip(const SpaceGraph& g, std::span<const double> u,
                                 const std::vector<std::uint8_t>* allowed = nullptr);

/// Potential problem on `region` (empty = whole graph): u = 1 on E, u = 0 on F.
struct CondenserProblem {
  const SpaceGraph* g = nullptr;
  std::vector<std::uint8_t> region;
  std::vector<VertexId> E;
  std::vector<VertexId> F;
  double q = 2.0;
};

struct EnergyOptions {
  std::size_t max_iterations = 400;
  double energy_tol = 1e-10;     // relative change between reweighting sweeps
  double damping = 0.5;
  double eps = 1e-12;            // added to squared differences when reweighting
  std::size_t newton_iterations = 60;
  double residual_tol = 1e-11;
  bool throw_on_failure = true;  // otherwise return the best iterate with converged = false
};

struct EnergySolution {
  std::vector<double> u;         // per vertex; 0 outside the region
  double energy = 0.0;           // max form: sum (Lip u)^q mu over the region
  double edge_energy = 0.0;      // optimised form: sum over edges (mu_x + mu_y) |du/d|^q
  std::size_t iterations = 0;
  std::size_t newton_steps = 0;
  double residual = 0.0;         // max |gradient| / max absolute force sum
  bool converged = false;
};

/// Minimises the edge-sum energy with the plate constraints. q = 2 is one
/// sparse symmetric solve; other q use damped reweighted least squares started
/// from the q = 2 potential, then Newton polishing. Free components without a
/// plate are set to 1/2. Throws "empty-plate", "plates-overlap",
/// "plate-outside", "invalid-exponent", and "no-convergence".
EnergySolution minimize_energy(const CondenserProblem& p, const EnergyOptions& opt = {});

double edge_energy(const SpaceGraph& g, std::span<const double> u, double q,
                   const std::vector<std::uint8_t>* region = nullptr);
double maxform_energy(const SpaceGraph& g, std::span<const double> u, double q,
                      const std::vector<std::uint8_t>* region = nullptr);
/// Gradient of the edge energy at free vertices (0 elsewhere) and the force
/// scale used to normalise it.
struct EnergyGradient {
  std::vector<double> grad;
  double force_scale = 0.0;
  double residual = 0.0;
};
EnergyGradient energy_gradient(const CondenserProblem& p, std::span<const double> u);

struct LoewnerReport {
  double lambda = 0.0;
  double ball_mass = 0.0;
  double r = 0.0;
  double q = 2.0;
  double energy = 0.0;             // max form at the computed potential
  double edge_energy = 0.0;
  std::size_t max_degree = 0;
  double empirical_C = 0.0;        // lambda mu(B) / (r^q energy)
  double certified_C = 0.0;        // same with edge_energy / max_degree, a lower bound
                                   // for the minimal max-form energy
  bool ok = false;                 // both constants finite and positive
};

/// lambda = min{H(E), H(F)} r^t / mu(B) must be supplied by the caller.
LoewnerReport verify_loewner(const CondenserProblem& p, const EnergySolution& s, double lambda,
                             double ball_mass, double r);

struct BallCountingReport {
  double eta = 0.0;
  double q = 0.0;
  double lhs = 0.0;         // eta^q mu(B(z, r))
  double family_mass = 0.0; // sum mu(B_i(eta r))
  double K0 = 0.0;          // lhs / family_mass
  std::size_t family_size = 0;
  bool strict_violation = false;  // eta >= strict cap
};

/// Throws "no-well-placed-balls" for an empty family.
BallCountingReport verify_ball_counting(double eta, double q, double big_ball_mass,
                                        std::span<const double> family_masses,
                                        double strict_cap = 1.0 / 168.0);

}  // namespace visb
