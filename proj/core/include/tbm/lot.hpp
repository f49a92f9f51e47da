#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tbm/calculus.hpp"
#include "tbm/grid.hpp"
#include "tbm/solver.hpp"
#include "tbm/volume.hpp"

namespace tbm {

struct Template {
  DensityVolume density;
  std::vector<std::string> provenance;  // ids of the averaged subjects
};

/// Voxelwise mean of the subjects, renormalized to the default target mass.
Template build_template(std::span<const DensityVolume> subjects,
                        std::vector<std::string> ids = {});

/// (f(x) - x) * sqrt(I0(x)) per voxel, stored component-major: all voxels of
/// axis 0, then axis 1, ... Units are length * sqrt(density).
struct LotEmbedding {
  GridSpec grid;
  std::vector<double> payload;

  LotEmbedding() = default;
  explicit LotEmbedding(const GridSpec& g);
  LotEmbedding(const GridSpec& g, std::vector<double> values);

  int components() const noexcept { return grid.rank(); }
  std::size_t dimension() const noexcept { return payload.size(); }
  /// sum payload^2 * voxel volume; equals transport_cost of the map.
  double squared_norm() const;

  LotEmbedding& operator+=(const LotEmbedding& other);
  LotEmbedding& operator*=(double s);
};

LotEmbedding operator+(LotEmbedding a, const LotEmbedding& b);
LotEmbedding operator-(LotEmbedding a, const LotEmbedding& b);
LotEmbedding operator*(double s, LotEmbedding a);

LotEmbedding embed_map(const VectorField& f, const DensityVolume& i0);

/// f = id + payload / sqrt(I0); voxels with I0 <= 0 keep zero displacement.
VectorField map_from_embedding(const DensityVolume& i0, const LotEmbedding& e);

struct Analysis {
  LotEmbedding embedding;
  SolveResult solve;
};

/// Solves template -> subject and embeds the resulting map.
Analysis analyze(const Template& t, const DensityVolume& subject, const SolverConfig& cfg);

/// Pushforward of i0 by f: each voxel's mass is deposited at f(x) with
/// multilinear weights over the surrounding voxel centers (positions clamped
/// to the hull of centers). Total mass is preserved exactly.
DensityVolume splat_pushforward(const VectorField& f, const DensityVolume& i0);

/// Pushforward of i0 by f evaluated through the inverse map: each output voxel
/// center y is pulled back to x with f(x) = y (Newton on the cubic
/// interpolant of f, x clamped to the hull of voxel centers) and receives
/// i0(x) / det Df(x). Renormalized to i0's mass.
DensityVolume inverse_pushforward(const VectorField& f, const DensityVolume& i0);

/// Image generated by an arbitrary point of the embedding space (the inverse
/// pushforward of the template). Throws NonDiffeomorphicMap when the
/// reconstructed map folds (min det <= 0).
DensityVolume synthesize(const Template& t, const LotEmbedding& e);

/// synthesize(t, mean + nu * direction) for each nu.
std::vector<DensityVolume> sample_direction(const Template& t, const LotEmbedding& mean,
                                            const LotEmbedding& direction,
                                            std::span<const double> nus);

void write_embedding(const LotEmbedding& e, const std::filesystem::path& path);
LotEmbedding read_embedding(const std::filesystem::path& path);

}  // namespace tbm
