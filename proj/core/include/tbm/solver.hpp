#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "tbm/calculus.hpp"
#include "tbm/volume.hpp"

namespace tbm {

/// Hyperparameters of the penalized transport objective and its multiscale
/// accelerated descent. Defaults follow the published MRI settings.
struct SolverConfig {
  double lambda = 100.0;                  // mass-preservation penalty weight
  double gamma = 6.5e4;                   // curl penalty weight
  double gamma_activation_fraction = 0.25;
  int scales = 3;
  double max_step_voxels = 0.01;          // displacement cap per update, in voxels
  double mse_termination = 0.0055;        // relative MSE stop
  int max_iters = 5000;                   // per scale
  double diffeo_min_det = 1e-3;
  int stagnation_window = 100;
  double stagnation_tolerance = 1e-7;
  // Once the MSE target is met, descent continues with the curl term on until
  // the lowest objective among iterates meeting the target improves by less
  // than this fraction over stagnation_window iterations.
  double settle_tolerance = 1e-3;
  // Descent direction is (I - l^2 Laplacian)^-1 grad with l in voxels of the
  // current scale; 0 uses the raw gradient.
  double precondition_voxels = 4.0;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  int scale = 0;  // 0 = finest
  double rel_mse = 0.0;
  double mean_curl = 0.0;
  double cost = 0.0;
  double step = 0.0;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  std::size_t rejected_steps = 0;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct MapMetrics {
  double rel_mse = 0.0;
  double mean_curl = 0.0;
  double transport_cost = 0.0;   // sum |f - x|^2 I0 dV
  double normalized_cost = 0.0;  // transport_cost / total mass
  double min_det = 0.0;
  double mass_penalty = 0.0;  // sum (det(Df) I1(f) - I0)^2 dV
  double curl_energy = 0.0;   // sum |curl f|^2 dV

  /// objective() assembled from the stored terms.
  double objective(const SolverConfig& cfg, bool curl_active = true) const;
};

struct SolveResult {
  VectorField map;
  SolveTrace trace;
  bool converged = false;
  MapMetrics final_metrics;
};

/// Penalized objective; the curl term is included only when curl_active.
double objective(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                 const SolverConfig& cfg, bool curl_active = true);

/// Gradient of objective() with respect to the map, per unit voxel volume:
/// <el_gradient(f), h> * voxel_volume is the directional derivative along h.
VectorField el_gradient(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                        const SolverConfig& cfg, bool curl_active = true);

/// Relative MSE of the pushforward: sum (det(Df) I1(f) - I0)^2 / sum I0^2.
double relative_mse(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1);
MapMetrics evaluate_map(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1);

/// sum |f(x) - x|^2 I0(x) dV.
double transport_cost(const VectorField& f, const DensityVolume& i0);

/// Accelerated descent state: the two most recent iterates and the index of
/// the next update (k >= 1).
struct NesterovState {
  VectorField current;   // f^(k-1)
  VectorField previous;  // f^(k-2)
  int k = 1;
  bool stationary = false;

  explicit NesterovState(VectorField start);

  double momentum() const;       // (k - 2) / (k + 1), zero for k <= 2
  VectorField lookahead() const;  // g^k
};

/// Step length that moves the largest voxel displacement by exactly
/// max_step_voxels * min spacing; zero when the gradient vanishes.
double step_length(const VectorField& grad, const SolverConfig& cfg);

/// f^k = g^k - alpha * grad(g^k); shifts the state and increments k. A zero
/// gradient leaves the state untouched and marks it stationary.
void nesterov_step(NesterovState& state, const VectorField& lookahead, const VectorField& grad,
                   const SolverConfig& cfg);

/// Clamps every map position into the hull of voxel centers so the map
/// sends the domain into itself.
void project_to_domain(VectorField& f);

struct DiffeoCheck {
  VectorField map;
  bool rejected = false;
  int halvings = 0;
  double min_det = 0.0;
};

/// Pull candidate back toward previous by halving the step until
/// min det(D map) > cfg.diffeo_min_det (at most 20 halvings).
DiffeoCheck enforce_diffeomorphism(const VectorField& candidate, const VectorField& previous,
                                   const SolverConfig& cfg);

/// Multiscale transport map from template i0 to subject i1
/// (det(Df) i1(f) ~= i0).
SolveResult solve(const DensityVolume& i0, const DensityVolume& i1, const SolverConfig& cfg);

/// Displacement (f - id) upsampled from a coarser grid onto fine, id re-added.
VectorField upsample_map(const VectorField& coarse, const GridSpec& fine);

}  // namespace tbm
