#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace tbm {

/// Regular 2D or 3D voxel grid. Values live at voxel centers: the world
/// coordinate of voxel i along axis a is (i + 0.5) * spacing[a].
///
/// Storage is row-major with the last axis fastest. Unused trailing axes of a
/// 2D grid have dims == 1 and are never differentiated.
class GridSpec {
 public:
  static constexpr std::size_t kMinDim = 4;

  GridSpec() = default;
  GridSpec(std::span<const std::size_t> dims, std::span<const double> spacing = {});

  static GridSpec make2d(std::size_t n0, std::size_t n1, double h = 1.0);
  static GridSpec make3d(std::size_t n0, std::size_t n1, std::size_t n2, double h = 1.0);

  int rank() const noexcept { return rank_; }
  std::size_t dim(int axis) const noexcept { return dims_[axis]; }
  double spacing(int axis) const noexcept { return spacing_[axis]; }
  const std::array<std::size_t, 3>& dims() const noexcept { return dims_; }
  const std::array<double, 3>& spacings() const noexcept { return spacing_; }

  std::size_t size() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }
  double voxel_volume() const noexcept;
  double min_spacing() const noexcept;
  std::size_t stride(int axis) const noexcept;

  // World coordinate of voxel index i along axis.
  double center(int axis, std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * spacing_[axis];
  }

  // Same physical extent, new voxel counts (spacing rescaled per axis).
  GridSpec resized(std::span<const std::size_t> new_dims) const;
  std::vector<std::size_t> dim_vector() const;
  std::vector<double> spacing_vector() const;

  bool operator==(const GridSpec& other) const = default;

 private:
  int rank_ = 0;
  std::array<std::size_t, 3> dims_{1, 1, 1};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
};

// Throws GridMismatch unless a == b.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* context);

}  // namespace tbm
