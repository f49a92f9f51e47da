#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tbm/grid.hpp"
#include "tbm/volume.hpp"

namespace tbm {

/// Anisotropic Gaussian bump; center and widths in world units.
struct Blob {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  std::array<double, 3> sigma{1.0, 1.0, 1.0};
  double amplitude = 1.0;
};

/// Sum of blobs sampled at voxel centers (not normalized).
ScalarField blob_field(const GridSpec& grid, const std::vector<Blob>& blobs);

/// Ring of tissue around a cavity: radial profile rising at inner_radius and
/// falling at outer_radius with logistic edges of the given width.
ScalarField annulus_field(const GridSpec& grid, std::array<double, 3> center, double inner_radius,
                          double outer_radius, double edge_width, double anisotropy = 1.0);

enum class PhantomFamily {
  Translation,  // one bump shifted along axis 0 by shift_step per subject
  Aging,        // cavity widens and rim thins with atrophy t in [0, 1]
  TwoClass,     // bumps displaced by -class_shift / +class_shift with jitter
};

std::string to_string(PhantomFamily family);
PhantomFamily phantom_family_from_string(const std::string& name);

struct PhantomSpec {
  PhantomFamily family = PhantomFamily::Translation;
  std::vector<std::size_t> dims{64, 64};
  std::size_t count = 10;
  std::uint64_t seed = 1;
  double shift_step = 1.0;       // Translation: voxels per subject
  double bump_sigma = 5.0;       // Translation / TwoClass: bump width in voxels
  double class_shift = 4.0;      // TwoClass: half-distance between class centers
  double jitter = 0.5;           // TwoClass / Aging: per-subject nuisance (voxels)
  double covariate_noise = 0.02; // Aging: std of noise added to t
};

/// Volumes are normalized densities (default target mass and floor).
struct PhantomCohort {
  std::vector<std::string> ids;
  std::vector<DensityVolume> volumes;
  std::vector<double> covariate;  // shift, atrophy (+ noise), or class id
  std::vector<int> labels;        // TwoClass only
  std::vector<double> truth;      // generating parameter without noise
};

PhantomCohort make_phantom_cohort(const PhantomSpec& spec);

/// Separable window equal to one in the interior and falling off with
/// logistic edges so that the outer margin_voxels of every face carry less
/// than 5% of the interior level.
ScalarField plateau_field(const GridSpec& grid, double margin_voxels, double edge_voxels);

struct PairSpec {
  double margin_voxels = 4.0;
  double pedestal = 0.25;       // background level inside the window, relative to blob peaks
  double shift_fraction = 0.06; // max blob displacement per axis, fraction of the extent
};

/// Random pair of normalized densities: two to three Gaussian blobs over a
/// pedestal inside a plateau window, and a copy with the blobs displaced,
/// resized and reweighted.
std::pair<DensityVolume, DensityVolume> random_smooth_pair(const GridSpec& grid, std::uint64_t seed,
                                                           const PairSpec& spec = {});

struct BlobPairSpec {
  double sigma_voxels = 3.0;
  double distance_voxels = 4.0;  // drawn in [0.7, 1.3] times this
  double pedestal = 0.1;
  double margin_voxels = 1.0;
};

/// One Gaussian over a pedestal near the center of a 2D grid and a copy moved
/// in a random direction with redrawn widths, both inside a plateau window.
std::pair<DensityVolume, DensityVolume> displaced_blob_pair(const GridSpec& grid, std::uint64_t seed,
                                                            const BlobPairSpec& spec = {});

/// window(x) * (pedestal + amplitude * exp(-(x - center)^2 / (2 sigma^2))) at
/// the n voxel centers, with the plateau_field window; positions in voxels.
std::vector<double> windowed_profile(std::size_t n, double center, double sigma, double amplitude,
                                     double pedestal, double margin_voxels);

/// Normalized product density axis0(i) * axis1(j) on a 2D grid.
DensityVolume separable_density(const GridSpec& grid, std::span<const double> axis0,
                                std::span<const double> axis1);

}  // namespace tbm
