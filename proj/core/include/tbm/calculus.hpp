#pragma once

#include <array>
#include <span>
#include <vector>

#include "tbm/grid.hpp"
#include "tbm/volume.hpp"

namespace tbm {

/// Vector field with one component per grid axis, values in world units.
struct VectorField {
  GridSpec grid;
  std::array<std::vector<double>, 3> comp;

  VectorField() = default;
  explicit VectorField(const GridSpec& g, double fill = 0.0);

  int rank() const noexcept { return grid.rank(); }
  std::size_t size() const noexcept { return grid.size(); }

  static VectorField identity(const GridSpec& g);
};

/// Per-voxel n x n matrices; entry(i, k) holds d f^i / d x^k.
struct JacobianField {
  GridSpec grid;
  std::array<std::vector<double>, 9> entries;

  JacobianField() = default;
  explicit JacobianField(const GridSpec& g);

  std::vector<double>& entry(int i, int k) { return entries[i * 3 + k]; }
  const std::vector<double>& entry(int i, int k) const { return entries[i * 3 + k]; }
};

// Second-order finite differences: central in the interior, one-sided
// three-point stencils on the two boundary voxels of each line.

void derivative(std::span<const double> in, const GridSpec& g, int axis, std::span<double> out);
// Exact transpose of derivative(); accumulates into out.
void derivative_adjoint_add(std::span<const double> in, const GridSpec& g, int axis,
                            std::span<double> out, double scale = 1.0);

VectorField gradient(const ScalarField& s);
ScalarField divergence(const VectorField& v);
JacobianField jacobian(const VectorField& f);
ScalarField determinant(const JacobianField& j);
JacobianField adjugate(const JacobianField& j);

/// 3D: three components. 2D: one scalar component (d f^1/dx^0 - d f^0/dx^1)
/// returned in comp[0] of a field whose remaining components are empty.
struct CurlField {
  GridSpec grid;
  int components = 0;
  std::array<std::vector<double>, 3> comp;
};

CurlField curl(const VectorField& f);
/// curl^T applied to a curl-shaped field (discrete adjoint of curl()).
VectorField curl_adjoint(const CurlField& c);
/// curl^T(curl(f)); approximates the continuum curl of curl in the interior.
VectorField curl_curl(const VectorField& f);
/// Mean over voxels of the Euclidean norm of curl(f).
double mean_curl_magnitude(const CurlField& c);

/// Separable Catmull-Rom interpolation of v at world positions f(x).
/// Positions are clamped to the hull of voxel centers; taps outside the grid
/// use linear extrapolation of the edge, so affine data is reproduced up to
/// the boundary.
ScalarField interp(const ScalarField& v, const VectorField& f);
/// As interp, also returning the spatial gradient of the interpolant at f(x)
/// (zero along clamped axes).
ScalarField interp_with_gradient(const ScalarField& v, const VectorField& f, VectorField& grad);

/// det(D f) * interp(I1, f) - I0.
ScalarField pushforward_residual(const VectorField& f, const DensityVolume& i1,
                                 const DensityVolume& i0);

/// Catmull-Rom kernel weights for fractional offset t in [0, 1] over taps
/// i-1, i, i+1, i+2; and the weights' derivatives with respect to t.
std::array<double, 4> catmull_rom_weights(double t);
std::array<double, 4> catmull_rom_derivative_weights(double t);

}  // namespace tbm
