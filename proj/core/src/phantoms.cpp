#include "tbm/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tbm/error.hpp"

namespace tbm {

ScalarField blob_field(const GridSpec& grid, const std::vector<Blob>& blobs) {
  ScalarField out(grid);
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < grid.dim(0); ++i0) {
    for (std::size_t i1 = 0; i1 < grid.dim(1); ++i1) {
      for (std::size_t i2 = 0; i2 < grid.dim(2); ++i2, ++idx) {
        const std::array<double, 3> x{grid.center(0, i0), grid.center(1, i1),
                                      grid.rank() == 3 ? grid.center(2, i2) : 0.0};
        double v = 0.0;
        for (const Blob& b : blobs) {
          double e = 0.0;
          for (int a = 0; a < grid.rank(); ++a) {
            const double d = (x[a] - b.center[a]) / b.sigma[a];
            e += d * d;
          }
          v += b.amplitude * std::exp(-0.5 * e);
        }
        out.values[idx] = v;
      }
    }
  }
  return out;
}

ScalarField annulus_field(const GridSpec& grid, std::array<double, 3> center, double inner_radius,
                          double outer_radius, double edge_width, double anisotropy) {
  ScalarField out(grid);
  auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < grid.dim(0); ++i0) {
    for (std::size_t i1 = 0; i1 < grid.dim(1); ++i1) {
      for (std::size_t i2 = 0; i2 < grid.dim(2); ++i2, ++idx) {
        const double d0 = (grid.center(0, i0) - center[0]) / anisotropy;
        const double d1 = grid.center(1, i1) - center[1];
        const double d2 = grid.rank() == 3 ? grid.center(2, i2) - center[2] : 0.0;
        const double r = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
        out.values[idx] =
            logistic((r - inner_radius) / edge_width) * logistic((outer_radius - r) / edge_width);
      }
    }
  }
  return out;
}

std::string to_string(PhantomFamily family) {
  switch (family) {
    case PhantomFamily::Translation: return "translation";
    case PhantomFamily::Aging: return "aging";
    case PhantomFamily::TwoClass: return "two_class";
  }
  return "unknown";
}

PhantomFamily phantom_family_from_string(const std::string& name) {
  if (name == "translation") return PhantomFamily::Translation;
  if (name == "aging") return PhantomFamily::Aging;
  if (name == "two_class") return PhantomFamily::TwoClass;
  throw Error(ErrorKind::ConfigError, "unknown phantom family '" + name + "'");
}

namespace {

DensityVolume to_density(const ScalarField& f) {
  return normalize_density(DensityVolume(f.grid, f.values));
}

std::array<double, 3> grid_center(const GridSpec& g) {
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (int a = 0; a < g.rank(); ++a) c[a] = 0.5 * static_cast<double>(g.dim(a)) * g.spacing(a);
  return c;
}

std::string subject_id(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sub%03zu", k);
  return buf;
}

}  // namespace

PhantomCohort make_phantom_cohort(const PhantomSpec& spec) {
  const GridSpec grid(spec.dims);
  const double h = grid.min_spacing();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto center = grid_center(grid);

  PhantomCohort out;
  for (std::size_t k = 0; k < spec.count; ++k) {
    out.ids.push_back(subject_id(k));
    switch (spec.family) {
      case PhantomFamily::Translation: {
        const double span = spec.shift_step * static_cast<double>(spec.count - 1);
        Blob b;
        b.center = center;
        b.center[0] += (static_cast<double>(k) * spec.shift_step - 0.5 * span) * h;
        b.sigma = {spec.bump_sigma * h, spec.bump_sigma * h, spec.bump_sigma * h};
        out.volumes.push_back(to_density(blob_field(grid, {b})));
        out.covariate.push_back(static_cast<double>(k) * spec.shift_step);
        out.truth.push_back(out.covariate.back());
        break;
      }
      case PhantomFamily::Aging: {
        const double t = spec.count > 1 ? static_cast<double>(k) / static_cast<double>(spec.count - 1)
                                        : 0.0;
        const double n = static_cast<double>(*std::min_element(spec.dims.begin(), spec.dims.end()));
        const double inner = (0.09 + 0.09 * t) * n * h;
        const double outer = (0.33 - 0.03 * t) * n * h;
        const double aniso = 1.0 + 0.02 * spec.jitter * normal(rng);
        out.volumes.push_back(to_density(annulus_field(grid, center, inner, outer, 0.04 * n * h, aniso)));
        out.truth.push_back(t);
        out.covariate.push_back(t + spec.covariate_noise * normal(rng));
        break;
      }
      case PhantomFamily::TwoClass: {
        const int label = static_cast<int>(k % 2);
        Blob b;
        b.center = center;
        b.center[0] += (label == 0 ? -spec.class_shift : spec.class_shift) * h;
        for (int a = 0; a < grid.rank(); ++a) b.center[a] += spec.jitter * normal(rng) * h;
        const double s = spec.bump_sigma * h * (1.0 + 0.05 * normal(rng));
        b.sigma = {s, s, s};
        out.volumes.push_back(to_density(blob_field(grid, {b})));
        out.labels.push_back(label);
        out.covariate.push_back(static_cast<double>(label));
        out.truth.push_back(static_cast<double>(label));
        break;
      }
    }
  }
  return out;
}

ScalarField plateau_field(const GridSpec& grid, double margin_voxels, double edge_voxels) {
  ScalarField out(grid);
  auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::array<std::vector<double>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    axis[a].assign(grid.dim(a), 1.0);
    if (a >= grid.rank()) continue;
    const double n = static_cast<double>(grid.dim(a));
    const double lo = margin_voxels + 3.0 * edge_voxels;
    const double hi = n - lo;
    for (std::size_t i = 0; i < grid.dim(a); ++i) {
      const double x = static_cast<double>(i) + 0.5;
      axis[a][i] = logistic((x - lo) / edge_voxels) * logistic((hi - x) / edge_voxels);
    }
  }
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < grid.dim(0); ++i0) {
    for (std::size_t i1 = 0; i1 < grid.dim(1); ++i1) {
      for (std::size_t i2 = 0; i2 < grid.dim(2); ++i2, ++idx) {
        out.values[idx] = axis[0][i0] * axis[1][i1] * axis[2][i2];
      }
    }
  }
  return out;
}

std::pair<DensityVolume, DensityVolume> random_smooth_pair(const GridSpec& grid, std::uint64_t seed,
                                                           const PairSpec& spec) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double n_min = static_cast<double>(*std::min_element(grid.dims().begin(), grid.dims().end()));
  const double edge = std::max(1.0, 0.03 * n_min);
  const ScalarField window = plateau_field(grid, spec.margin_voxels, edge);

  const int count = 2 + static_cast<int>(unit(rng) * 2.0);
  std::vector<Blob> first;
  std::vector<Blob> second;
  for (int b = 0; b < count; ++b) {
    Blob blob;
    Blob moved;
    for (int a = 0; a < grid.rank(); ++a) {
      const double n = static_cast<double>(grid.dim(a));
      const double h = grid.spacing(a);
      blob.sigma[a] = (0.08 + 0.06 * unit(rng)) * n * h;
      blob.center[a] = (0.35 + 0.3 * unit(rng)) * n * h;
      moved.sigma[a] = blob.sigma[a] * (0.85 + 0.3 * unit(rng));
      moved.center[a] = blob.center[a] + (2.0 * unit(rng) - 1.0) * spec.shift_fraction * n * h;
    }
    blob.amplitude = 0.5 + 0.5 * unit(rng);
    moved.amplitude = blob.amplitude * (0.8 + 0.4 * unit(rng));
    first.push_back(blob);
    second.push_back(moved);
  }
  auto make = [&](const std::vector<Blob>& blobs) {
    ScalarField f = blob_field(grid, blobs);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      f.values[i] = window.values[i] * (spec.pedestal + f.values[i]);
    }
    return to_density(f);
  };
  return {make(first), make(second)};
}

std::pair<DensityVolume, DensityVolume> displaced_blob_pair(const GridSpec& grid, std::uint64_t seed,
                                                            const BlobPairSpec& spec) {
  if (grid.rank() != 2) throw Error(ErrorKind::InvalidArgument, "displaced_blob_pair needs a 2D grid");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = grid.min_spacing();
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  const double d = spec.distance_voxels * (0.7 + 0.6 * unit(rng)) * h;
  const double cx = (0.5 * static_cast<double>(grid.dim(0)) + 0.8 * (unit(rng) - 0.5)) * h;
  const double cy = (0.5 * static_cast<double>(grid.dim(1)) + 0.8 * (unit(rng) - 0.5)) * h;
  const double s0 = spec.sigma_voxels * (0.9 + 0.2 * unit(rng)) * h;
  const double s1 = spec.sigma_voxels * (0.9 + 0.2 * unit(rng)) * h;
  const double s2 = spec.sigma_voxels * (0.9 + 0.2 * unit(rng)) * h;
  const double dx = 0.5 * d * std::cos(theta);
  const double dy = 0.5 * d * std::sin(theta);
  const Blob a{{cx - dx, cy - dy, 0.0}, {s0, s1, 1.0}, 1.0};
  const Blob b{{cx + dx, cy + dy, 0.0}, {s2, s0, 1.0}, 1.0};
  const ScalarField window = plateau_field(grid, spec.margin_voxels, 1.0);
  auto make = [&](const Blob& blob) {
    ScalarField f = blob_field(grid, {blob});
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      f.values[i] = window.values[i] * (spec.pedestal + f.values[i]);
    }
    return to_density(f);
  };
  return {make(a), make(b)};
}

std::vector<double> windowed_profile(std::size_t n, double center, double sigma, double amplitude,
                                     double pedestal, double margin_voxels) {
  auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double len = static_cast<double>(n);
  const double edge = std::max(1.0, 0.03 * len);
  const double lo = margin_voxels + 3.0 * edge;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) + 0.5;
    const double z = (x - center) / sigma;
    const double w = logistic((x - lo) / edge) * logistic((len - lo - x) / edge);
    out[i] = w * (pedestal + amplitude * std::exp(-0.5 * z * z));
  }
  return out;
}

DensityVolume separable_density(const GridSpec& grid, std::span<const double> axis0,
                                std::span<const double> axis1) {
  if (grid.rank() != 2 || axis0.size() != grid.dim(0) || axis1.size() != grid.dim(1)) {
    throw Error(ErrorKind::InvalidArgument, "separable_density: profiles do not match the 2D grid");
  }
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < axis0.size(); ++i) {
    for (std::size_t j = 0; j < axis1.size(); ++j) v[i * axis1.size() + j] = axis0[i] * axis1[j];
  }
  return normalize_density(DensityVolume(grid, std::move(v)));
}

}  // namespace tbm
