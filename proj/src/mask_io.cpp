#include "visbound/mask_io.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "visbound/error.hpp"

namespace visb {

namespace {

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int header_int(std::istream& in) {
  const std::string tok = header_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw Error("bad-mask", "malformed PGM header");
    return v;
  } catch (const std::logic_error&) {
    throw Error("bad-mask", "malformed PGM header");
  }
}

}  // namespace

BoolRaster parse_text_mask(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw Error("empty-space", "mask file has no rows");
  const int cols = static_cast<int>(lines.front().size());
  BoolRaster mask(static_cast<int>(lines.size()), cols);
  for (int r = 0; r < mask.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != cols) throw Error("bad-mask", "ragged text mask");
    for (int c = 0; c < cols; ++c) {
      const char ch = lines[r][c];
      if (ch == '#') {
        mask.set(r, c, true);
      } else if (ch != '.') {
        throw Error("bad-mask", std::string("unexpected character '") + ch + "' in text mask");
      }
    }
  }
  return mask;
}

BoolRaster parse_pgm(std::istream& in) {
  const std::string magic = header_token(in);
  if (magic != "P2" && magic != "P5") throw Error("bad-mask", "not a PGM file");
  const int cols = header_int(in);
  const int rows = header_int(in);
  const int maxval = header_int(in);
  if (cols == 0 || rows == 0 || maxval == 0 || maxval > 65535) {
    throw Error("bad-mask", "unsupported PGM dimensions");
  }
  BoolRaster mask(rows, cols);
  const double half = 0.5 * maxval;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int value = 0;
      if (magic == "P2") {
        if (!(in >> value)) throw Error("bad-mask", "truncated PGM data");
      } else if (maxval < 256) {
        const int b = in.get();
        if (b == EOF) throw Error("bad-mask", "truncated PGM data");
        value = b;
      } else {
        const int hi = in.get();
        const int lo = in.get();
        if (lo == EOF) throw Error("bad-mask", "truncated PGM data");
        value = (hi << 8) | lo;
      }
      mask.set(r, c, value > half);
    }
  }
  return mask;
}

BoolRaster read_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("bad-mask", "cannot open " + path);
  const int first = in.peek();
  if (first == 'P') return parse_pgm(in);
  return parse_text_mask(in);
}

void write_text_mask(std::ostream& out, const BoolRaster& mask) {
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) out.put(mask.at(r, c) ? '#' : '.');
    out.put('\n');
  }
}

void write_pgm(std::ostream& out, const BoolRaster& mask) {
  out << "P5\n" << mask.cols << ' ' << mask.rows << "\n255\n";
  for (std::uint8_t cell : mask.cells) out.put(static_cast<char>(cell ? 255 : 0));
}

}  // namespace visb
