#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tbm/calculus.hpp"
#include "tbm/solver.hpp"
#include "tbm/volume.hpp"

namespace tbm {

/// Closed-form 1D transport between two positive densities on the same
/// uniform grid. Mass in each cell is spread uniformly over the cell, so the
/// CDFs are piecewise linear and invert exactly. The map is evaluated at
/// voxel centers.
struct Omt1dResult {
  std::vector<double> map;  // world coordinate f(x_i)
  double cost = 0.0;        // sum (f(x_i) - x_i)^2 p_i dx
};

Omt1dResult omt_1d(std::span<const double> p, std::span<const double> q, double spacing = 1.0);

/// Exact discrete Kantorovich cost between two volumes on the same grid with
/// squared Euclidean ground cost between voxel centers; masses are
/// value * voxel volume. Solved as a min-cost transportation problem by
/// successive shortest paths with Dijkstra potentials.
double kantorovich_lp(const DensityVolume& p, const DensityVolume& q,
                      std::size_t max_voxels = 400);

/// Same, on raw masses at explicit points (n-dimensional, row-major coords).
double transport_lp(std::span<const double> supply, std::span<const double> demand,
                    const std::vector<std::vector<double>>& cost);

/// Cost of the discrete plan a map induces: each source voxel's mass is split
/// multilinearly among the voxel centers around f(x) (clamped to the hull)
/// and charged the squared distance between the two centers. Carries the same
/// center quantization as kantorovich_lp, so the two compare directly.
double induced_plan_cost(const VectorField& f, const DensityVolume& i0);

using GradientFn = std::function<VectorField(const VectorField&, const DensityVolume&,
                                             const DensityVolume&, const SolverConfig&)>;

struct FdCheckOptions {
  int trials = 20;
  double epsilon = 1e-5;
  std::uint64_t seed = 1;
  // Per-voxel direction: when >= 0, h is zero except at this flat index.
  long single_voxel = -1;
};

/// Worst relative error between <grad, h> dV and the central difference of
/// objective() along random smooth directions h.
double fd_objective_check(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                          const SolverConfig& cfg, const FdCheckOptions& opts = {},
                          const GradientFn& gradient = {});

/// Random smooth field (sum of a few low-frequency cosines per component).
VectorField random_smooth_field(const GridSpec& grid, std::uint64_t seed, double amplitude);

}  // namespace tbm
