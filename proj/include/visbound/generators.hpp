#pragma once

#include <string>
#include <vector>

#include "visbound/space.hpp"

namespace visb {

/// Parameters of the named domain generators. The planar domains live on a
/// square canvas of cell size h covering [-extent, extent]^2; the ambient
/// space is the whole canvas.
struct DomainSpec {
  std::string name = "disk";
  double h = 0.01;
  double extent = 1.1;
  double radius = 1.0;           // disk
  double inner_radius = 0.5;     // annulus: inner_radius < |x| < 1
  int teeth = 8;                 // comb: arcs n = 2..teeth
  double puncture_radius = 0.0;  // punctured_disk; 0 removes the centre cell only
  int koch_level = 3;            // koch_flake_interior
  std::string path;              // mask_file (text or PGM)
};

struct GeneratedDomain {
  std::string name;
  BoolRaster ambient;            // cells that become vertices
  BoolRaster interior;           // cells of Omega
  GridFrame frame;
  double inradius_hint = 0.0;    // analytic depth of the deepest point, 0 if unknown
};

/// Names accepted by generate_domain.
const std::vector<std::string>& domain_names();

/// Throws "unknown-domain", "invalid-domain-params" and, for the comb,
/// "teeth-unresolved" when corridors or openings are narrower than three cells.
/// mask_file reads the whole file raster as the ambient space and its true
/// cells as Omega.
GeneratedDomain generate_domain(const DomainSpec& spec);

/// Arc E_n = {(1 - 1/n) e^{i theta} : alpha_n <= theta <= beta_n} of the comb.
struct CombArc {
  int n = 2;
  double radius = 0.5;
  double alpha = 0.0;
  double beta = 0.0;
};
std::vector<CombArc> comb_arcs(int teeth);

/// Whether the direction theta lies in [alpha, beta] modulo 2 pi.
bool angle_in_arc(double theta, double alpha, double beta);

/// Space and per-vertex interior predicate of a generated domain. Throws
/// "degenerate-space" from the grid builder.
struct DomainInstance {
  SpaceGraph space;
  std::vector<std::uint8_t> interior;
};
DomainInstance realize(const GeneratedDomain& d);

}  // namespace visb
