#include "tbm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tbm/error.hpp"

namespace tbm {

GridSpec::GridSpec(std::span<const std::size_t> dims, std::span<const double> spacing) {
  if (dims.size() != 2 && dims.size() != 3) {
    throw Error(ErrorKind::InvalidArgument, "grid must have 2 or 3 axes");
  }
  if (!spacing.empty() && spacing.size() != dims.size()) {
    throw Error(ErrorKind::InvalidArgument, "spacing count must match axis count");
  }
  rank_ = static_cast<int>(dims.size());
  for (int a = 0; a < rank_; ++a) {
    if (dims[a] < kMinDim) {
      throw Error(ErrorKind::InvalidArgument,
                  "axis " + std::to_string(a) + " has " + std::to_string(dims[a]) +
                      " voxels; at least 4 are required");
    }
    dims_[a] = dims[a];
    const double h = spacing.empty() ? 1.0 : spacing[a];
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(ErrorKind::InvalidArgument, "spacing must be finite and positive");
    }
    spacing_[a] = h;
  }
}

GridSpec GridSpec::make2d(std::size_t n0, std::size_t n1, double h) {
  const std::array<std::size_t, 2> d{n0, n1};
  const std::array<double, 2> s{h, h};
  return GridSpec(d, s);
}

GridSpec GridSpec::make3d(std::size_t n0, std::size_t n1, std::size_t n2, double h) {
  const std::array<std::size_t, 3> d{n0, n1, n2};
  const std::array<double, 3> s{h, h, h};
  return GridSpec(d, s);
}

double GridSpec::voxel_volume() const noexcept {
  double v = 1.0;
  for (int a = 0; a < rank_; ++a) v *= spacing_[a];
  return v;
}

double GridSpec::min_spacing() const noexcept {
  double h = spacing_[0];
  for (int a = 1; a < rank_; ++a) h = std::min(h, spacing_[a]);
  return h;
}

std::size_t GridSpec::stride(int axis) const noexcept {
  std::size_t s = 1;
  for (int a = 2; a > axis; --a) s *= dims_[a];
  return s;
}

GridSpec GridSpec::resized(std::span<const std::size_t> new_dims) const {
  if (static_cast<int>(new_dims.size()) != rank_) {
    throw Error(ErrorKind::InvalidArgument, "resize must keep the axis count");
  }
  std::vector<double> h(rank_);
  for (int a = 0; a < rank_; ++a) {
    h[a] = spacing_[a] * static_cast<double>(dims_[a]) / static_cast<double>(new_dims[a]);
  }
  return GridSpec(new_dims, h);
}

std::vector<std::size_t> GridSpec::dim_vector() const {
  return {dims_.begin(), dims_.begin() + rank_};
}

std::vector<double> GridSpec::spacing_vector() const {
  return {spacing_.begin(), spacing_.begin() + rank_};
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* context) {
  if (!(a == b)) throw Error(ErrorKind::GridMismatch, context);
}

}  // namespace tbm
