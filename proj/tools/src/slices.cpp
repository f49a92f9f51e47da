#include "slices.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "tbm/error.hpp"

namespace tbm::cli {

namespace fs = std::filesystem;

Slice extract_slice(const ScalarField& field, int axis, std::size_t index) {
  const GridSpec& g = field.grid;
  if (axis < 0 || axis > 2) throw Error(ErrorKind::InvalidArgument, "slice axis must be 0, 1 or 2");
  if (index >= g.dim(axis)) {
    throw Error(ErrorKind::InvalidArgument, "slice index " + std::to_string(index) + " outside axis " +
                                                std::to_string(axis));
  }
  const int ra = axis == 0 ? 1 : 0;
  const int ca = axis == 2 ? 1 : 2;
  Slice s;
  s.rows = g.dim(ra);
  s.cols = g.dim(ca);
  s.values.resize(s.rows * s.cols);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      const std::size_t p = index * g.stride(axis) + r * g.stride(ra) + c * g.stride(ca);
      s.values[r * s.cols + c] = field.values[p];
    }
  }
  return s;
}

void write_pgm(const fs::path& path, const Slice& slice, double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "P5\n" << slice.cols << ' ' << slice.rows << "\n255\n";
  std::vector<unsigned char> bytes(slice.values.size(), 0);
  if (hi > lo) {
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      const double t = std::clamp((slice.values[i] - lo) / (hi - lo), 0.0, 1.0);
      bytes[i] = static_cast<unsigned char>(std::lround(255.0 * t));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

PgmImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::string magic;
  int maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw Error(ErrorKind::BadMagic, "not an 8-bit P5 PGM: " + path.string());
  in.get();
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error(ErrorKind::TruncatedFile, "PGM payload too short: " + path.string());
  }
  return img;
}

}  // namespace tbm::cli
