#pragma once

#include <array>
#include <span>
#include <vector>

#include "tbm/calculus.hpp"
#include "tbm/grid.hpp"

namespace tbm {

/// Applies (I - l^2 Laplacian)^-1 with l = length_voxels * min spacing.
/// Scalars use reflecting (zero-flux) faces. For vector fields, component a
/// vanishes at the two faces normal to axis a and reflects at the others, so
/// smoothed displacements slide along the walls instead of crossing them.
/// The solve is diagonal in sine/cosine bases, so a pass costs O(N log N).
class HelmholtzSmoother {
 public:
  HelmholtzSmoother(const GridSpec& grid, double length_voxels);

  const GridSpec& grid() const noexcept { return grid_; }
  double length_voxels() const noexcept { return length_voxels_; }

  void apply(VectorField& field) const;
  void apply(std::span<double> values) const;

 private:
  void apply(std::span<double> values, int sine_axis) const;

  GridSpec grid_;
  double length_voxels_;
  // Index 0..2: sine along that axis; 3: cosine everywhere. Each entry is the
  // inverse symbol per mode including the transform normalization.
  std::array<std::vector<double>, 4> inverse_symbol_;
};

}  // namespace tbm
