#include "tbm/smoothing.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "tbm/error.hpp"

namespace tbm {

namespace {

// FFTW planning touches global state; execution of a finished plan does not.
// Unaligned plans keep results independent of where the allocator put data.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void transform(const GridSpec& g, std::span<double> data, int sine_axis, bool forward) {
  int n[3];
  fftw_r2r_kind kinds[3];
  const int rank = g.rank();
  for (int a = 0; a < rank; ++a) {
    n[a] = static_cast<int>(g.dim(a));
    if (a == sine_axis) {
      kinds[a] = forward ? FFTW_RODFT10 : FFTW_RODFT01;
    } else {
      kinds[a] = forward ? FFTW_REDFT10 : FFTW_REDFT01;
    }
  }
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_r2r(rank, n, data.data(), data.data(), kinds, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (plan == nullptr) throw Error(ErrorKind::InvalidArgument, "trigonometric transform plan failed");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

HelmholtzSmoother::HelmholtzSmoother(const GridSpec& grid, double length_voxels)
    : grid_(grid), length_voxels_(length_voxels) {
  if (!(length_voxels >= 0.0) || !std::isfinite(length_voxels)) {
    throw Error(ErrorKind::InvalidArgument, "smoothing length must be finite and >= 0");
  }
  if (length_voxels == 0.0) return;
  const double l = length_voxels * grid.min_spacing();
  double scale = 1.0;
  std::array<std::vector<double>, 3> cosine;
  std::array<std::vector<double>, 3> sine;
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = grid.dim(a);
    cosine[a].assign(n, 0.0);
    sine[a].assign(n, 0.0);
    if (a >= grid.rank()) continue;
    const double h = grid.spacing(a);
    const double nn = static_cast<double>(n);
    scale *= 2.0 * nn;
    for (std::size_t k = 0; k < n; ++k) {
      const double kc = static_cast<double>(k);
      cosine[a][k] = l * l * (2.0 - 2.0 * std::cos(std::numbers::pi * kc / nn)) / (h * h);
      sine[a][k] = l * l * (2.0 - 2.0 * std::cos(std::numbers::pi * (kc + 1.0) / nn)) / (h * h);
    }
  }
  for (int variant = 0; variant < 4; ++variant) {
    if (variant < 3 && variant >= grid.rank()) continue;
    auto& out = inverse_symbol_[variant];
    out.resize(grid.size());
    std::size_t idx = 0;
    for (std::size_t i0 = 0; i0 < grid.dim(0); ++i0) {
      for (std::size_t i1 = 0; i1 < grid.dim(1); ++i1) {
        for (std::size_t i2 = 0; i2 < grid.dim(2); ++i2, ++idx) {
          const double s = 1.0 + (variant == 0 ? sine : cosine)[0][i0] +
                           (variant == 1 ? sine : cosine)[1][i1] +
                           (variant == 2 ? sine : cosine)[2][i2];
          out[idx] = 1.0 / (s * scale);
        }
      }
    }
  }
}

void HelmholtzSmoother::apply(std::span<double> values, int sine_axis) const {
  if (values.size() != grid_.size()) {
    throw Error(ErrorKind::GridMismatch, "smoother: field size does not match its grid");
  }
  if (length_voxels_ == 0.0) return;
  const auto& symbol = inverse_symbol_[sine_axis < 0 ? 3 : sine_axis];
  transform(grid_, values, sine_axis, true);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= symbol[i];
  transform(grid_, values, sine_axis, false);
}

void HelmholtzSmoother::apply(std::span<double> values) const { apply(values, -1); }

void HelmholtzSmoother::apply(VectorField& field) const {
  require_same_grid(field.grid, grid_, "smoother: field grid differs");
  for (int a = 0; a < field.rank(); ++a) apply(std::span<double>(field.comp[a]), a);
}

}  // namespace tbm
