#include "tbm/volume.hpp"

#include <algorithm>
#include <cmath>

#include "tbm/error.hpp"

namespace tbm {

ScalarField::ScalarField(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) {
    throw Error(ErrorKind::InvalidArgument, "value count does not match grid size");
  }
}

DensityVolume::DensityVolume(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw Error(ErrorKind::InvalidArgument, "value count does not match grid size");
  }
  for (double x : values_) {
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteInput, "density contains NaN/Inf");
    if (x < 0.0) throw Error(ErrorKind::InvalidArgument, "density contains negative values");
  }
}

double DensityVolume::sum() const { return stable_sum(values_); }

double DensityVolume::min() const { return *std::min_element(values_.begin(), values_.end()); }

double DensityVolume::max() const { return *std::max_element(values_.begin(), values_.end()); }

double stable_sum(std::span<const double> x) {
  double s = 0.0;
  double c = 0.0;
  for (double v : x) {
    const double t = s + v;
    if (std::abs(s) >= std::abs(v)) {
      c += (s - t) + v;
    } else {
      c += (v - t) + s;
    }
    s = t;
  }
  return s + c;
}

DensityVolume normalize_density(const DensityVolume& v, double target_mass, double floor) {
  if (!(target_mass > 0.0) || !std::isfinite(target_mass)) {
    throw Error(ErrorKind::InvalidArgument, "target mass must be positive");
  }
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw Error(ErrorKind::InvalidArgument, "floor must be nonnegative");
  }
  const double total = v.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::AllZeroVolume, "volume sums to zero");

  std::vector<double> out(v.values().begin(), v.values().end());
  const double first = target_mass / total;
  for (double& x : out) x = x * first + floor;
  const double second = target_mass / stable_sum(out);
  for (double& x : out) x *= second;
  return DensityVolume(v.grid(), std::move(out));
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo;
  std::vector<double> w_hi;  // weight of lo + 1
};

AxisTaps linear_taps(std::size_t n_old, std::size_t n_new) {
  AxisTaps t;
  t.lo.resize(n_new);
  t.w_hi.resize(n_new);
  const double ratio = static_cast<double>(n_old) / static_cast<double>(n_new);
  const double last = static_cast<double>(n_old - 1);
  for (std::size_t j = 0; j < n_new; ++j) {
    const double u = std::clamp((static_cast<double>(j) + 0.5) * ratio - 0.5, 0.0, last);
    std::size_t i = static_cast<std::size_t>(std::floor(u));
    if (i >= n_old - 1) i = n_old - 2;
    t.lo[j] = i;
    t.w_hi[j] = u - static_cast<double>(i);
  }
  return t;
}

}  // namespace

DensityVolume resample(const DensityVolume& v, std::span<const std::size_t> new_dims) {
  const GridSpec& src = v.grid();
  const GridSpec dst = src.resized(new_dims);

  std::array<AxisTaps, 3> taps;
  for (int a = 0; a < 3; ++a) {
    if (a < src.rank()) {
      taps[a] = linear_taps(src.dim(a), dst.dim(a));
    } else {
      taps[a].lo = {0};
      taps[a].w_hi = {0.0};
    }
  }
  const std::size_t s0 = src.stride(0);
  const std::size_t s1 = src.stride(1);
  const std::size_t s2 = src.stride(2);
  const bool has2 = src.rank() == 3;
  const auto in = v.values();

  std::vector<double> out(dst.size());
  std::size_t o = 0;
  for (std::size_t j0 = 0; j0 < dst.dim(0); ++j0) {
    const std::size_t i0 = taps[0].lo[j0];
    const double w0 = taps[0].w_hi[j0];
    for (std::size_t j1 = 0; j1 < dst.dim(1); ++j1) {
      const std::size_t i1 = taps[1].lo[j1];
      const double w1 = taps[1].w_hi[j1];
      for (std::size_t j2 = 0; j2 < dst.dim(2); ++j2) {
        const std::size_t i2 = taps[2].lo[j2];
        const double w2 = taps[2].w_hi[j2];
        double acc = 0.0;
        for (int c0 = 0; c0 < 2; ++c0) {
          const double a0 = c0 ? w0 : 1.0 - w0;
          for (int c1 = 0; c1 < 2; ++c1) {
            const double a1 = c1 ? w1 : 1.0 - w1;
            const std::size_t base = (i0 + c0) * s0 + (i1 + c1) * s1 + i2 * s2;
            if (has2) {
              acc += a0 * a1 * ((1.0 - w2) * in[base] + w2 * in[base + s2]);
            } else {
              acc += a0 * a1 * in[base];
            }
          }
        }
        out[o++] = acc;
      }
    }
  }

  const double src_mass = v.mass();
  const double dst_mass = stable_sum(out) * dst.voxel_volume();
  if (dst_mass > 0.0) {
    const double scale = src_mass / dst_mass;
    for (double& x : out) x *= scale;
  }
  return DensityVolume(dst, std::move(out));
}

}  // namespace tbm
