#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tbm/volume.hpp"

namespace tbm::cli {

/// Plane of a volume at a fixed index along one axis. Rows run along the
/// lower remaining axis, columns along the higher one.
struct Slice {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

Slice extract_slice(const ScalarField& field, int axis, std::size_t index);

/// Binary PGM (P5, maxval 255); v maps to round(255 (v - lo) / (hi - lo)),
/// clamped, and to 0 everywhere when hi <= lo.
void write_pgm(const std::filesystem::path& path, const Slice& slice, double lo, double hi);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace tbm::cli
