#pragma once

#include <span>
#include <vector>

#include "tbm/grid.hpp"

namespace tbm {

/// Unconstrained scalar field on a grid (residuals, curls, determinants).
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  ScalarField(const GridSpec& g, std::vector<double> v);
};

/// Nonnegative, finite scalar field. Value units are density (mass per unit
/// volume); total mass is sum(values) * voxel_volume.
class DensityVolume {
 public:
  DensityVolume() = default;
  DensityVolume(const GridSpec& grid, std::vector<double> values);
  explicit DensityVolume(ScalarField field) : DensityVolume(field.grid, std::move(field.values)) {}

  const GridSpec& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  double sum() const;
  double mass() const { return sum() * grid_.voxel_volume(); }
  double min() const;
  double max() const;

  ScalarField as_field() const { return ScalarField(grid_, values_); }

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

inline constexpr double kDefaultTargetMass = 1.0e6;
inline constexpr double kDefaultFloor = 0.1;

/// Scale to target_mass, add floor to every voxel, rescale to target_mass.
/// Throws AllZeroVolume / NonFiniteInput.
DensityVolume normalize_density(const DensityVolume& v, double target_mass = kDefaultTargetMass,
                                double floor = kDefaultFloor);

/// Multilinear resampling onto new_dims over the same physical extent,
/// renormalized to the source's total mass.
DensityVolume resample(const DensityVolume& v, std::span<const std::size_t> new_dims);

/// Neumaier-compensated sum.
double stable_sum(std::span<const double> x);

}  // namespace tbm
