#pragma once

#include <iosfwd>
#include <string>

#include "visbound/space.hpp"

namespace visb {

/// Text grid: one row per line, '#' inside, '.' outside.
BoolRaster parse_text_mask(std::istream& in);
/// Binary (P5) or ASCII (P2) graymap; pixels above half of maxval are inside.
BoolRaster parse_pgm(std::istream& in);
/// Chooses the format from the first bytes of the file. Throws "bad-mask".
BoolRaster read_mask(const std::string& path);

void write_text_mask(std::ostream& out, const BoolRaster& mask);
void write_pgm(std::ostream& out, const BoolRaster& mask);  // P5, maxval 255

}  // namespace visb
