#include "tbm/calculus.hpp"

#include <algorithm>
#include <cmath>

#include "tbm/error.hpp"

namespace tbm {

VectorField::VectorField(const GridSpec& g, double fill) : grid(g) {
  for (int a = 0; a < g.rank(); ++a) comp[a].assign(g.size(), fill);
}

VectorField VectorField::identity(const GridSpec& g) {
  VectorField f(g);
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < g.dim(0); ++i0) {
    const double x0 = g.center(0, i0);
    for (std::size_t i1 = 0; i1 < g.dim(1); ++i1) {
      const double x1 = g.center(1, i1);
      for (std::size_t i2 = 0; i2 < g.dim(2); ++i2, ++idx) {
        f.comp[0][idx] = x0;
        f.comp[1][idx] = x1;
        if (g.rank() == 3) f.comp[2][idx] = g.center(2, i2);
      }
    }
  }
  return f;
}

JacobianField::JacobianField(const GridSpec& g) : grid(g) {
  const int n = g.rank();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) entry(i, k).assign(g.size(), 0.0);
  }
}

namespace {

struct LineLayout {
  std::size_t n;
  std::size_t stride;
  std::size_t outer;
};

LineLayout line_layout(const GridSpec& g, int axis) {
  const std::size_t n = g.dim(axis);
  const std::size_t s = g.stride(axis);
  return {n, s, g.size() / (n * s)};
}

}  // namespace

void derivative(std::span<const double> in, const GridSpec& g, int axis, std::span<double> out) {
  const auto [n, s, outer] = line_layout(g, axis);
  const double c = 0.5 / g.spacing(axis);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * n * s;
    for (std::size_t in_off = 0; in_off < s; ++in_off) {
      const double* u = in.data() + base + in_off;
      double* d = out.data() + base + in_off;
      d[0] = c * (-3.0 * u[0] + 4.0 * u[s] - u[2 * s]);
      for (std::size_t i = 1; i + 1 < n; ++i) d[i * s] = c * (u[(i + 1) * s] - u[(i - 1) * s]);
      const std::size_t l = (n - 1) * s;
      d[l] = c * (3.0 * u[l] - 4.0 * u[l - s] + u[l - 2 * s]);
    }
  }
}

void derivative_adjoint_add(std::span<const double> in, const GridSpec& g, int axis,
                            std::span<double> out, double scale) {
  const auto [n, s, outer] = line_layout(g, axis);
  const double c = 0.5 * scale / g.spacing(axis);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * n * s;
    for (std::size_t in_off = 0; in_off < s; ++in_off) {
      const double* w = in.data() + base + in_off;
      double* d = out.data() + base + in_off;
      d[0] += c * -3.0 * w[0];
      d[s] += c * 4.0 * w[0];
      d[2 * s] -= c * w[0];
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const double v = c * w[i * s];
        d[(i + 1) * s] += v;
        d[(i - 1) * s] -= v;
      }
      const std::size_t l = (n - 1) * s;
      d[l] += c * 3.0 * w[l];
      d[l - s] -= c * 4.0 * w[l];
      d[l - 2 * s] += c * w[l];
    }
  }
}

VectorField gradient(const ScalarField& s) {
  VectorField g(s.grid);
  for (int a = 0; a < s.grid.rank(); ++a) derivative(s.values, s.grid, a, g.comp[a]);
  return g;
}

ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid);
  std::vector<double> tmp(v.size());
  for (int a = 0; a < v.rank(); ++a) {
    derivative(v.comp[a], v.grid, a, tmp);
    for (std::size_t i = 0; i < tmp.size(); ++i) out.values[i] += tmp[i];
  }
  return out;
}

JacobianField jacobian(const VectorField& f) {
  JacobianField j(f.grid);
  const int n = f.rank();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) derivative(f.comp[i], f.grid, k, j.entry(i, k));
  }
  return j;
}

ScalarField determinant(const JacobianField& j) {
  ScalarField d(j.grid);
  const std::size_t size = j.grid.size();
  if (j.grid.rank() == 2) {
    const auto& a = j.entry(0, 0);
    const auto& b = j.entry(0, 1);
    const auto& c = j.entry(1, 0);
    const auto& e = j.entry(1, 1);
    for (std::size_t i = 0; i < size; ++i) d.values[i] = a[i] * e[i] - b[i] * c[i];
    return d;
  }
  for (std::size_t i = 0; i < size; ++i) {
    const double m00 = j.entry(0, 0)[i], m01 = j.entry(0, 1)[i], m02 = j.entry(0, 2)[i];
    const double m10 = j.entry(1, 0)[i], m11 = j.entry(1, 1)[i], m12 = j.entry(1, 2)[i];
    const double m20 = j.entry(2, 0)[i], m21 = j.entry(2, 1)[i], m22 = j.entry(2, 2)[i];
    d.values[i] = m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) +
                  m02 * (m10 * m21 - m11 * m20);
  }
  return d;
}

JacobianField adjugate(const JacobianField& j) {
  JacobianField out(j.grid);
  const std::size_t size = j.grid.size();
  if (j.grid.rank() == 2) {
    for (std::size_t i = 0; i < size; ++i) {
      out.entry(0, 0)[i] = j.entry(1, 1)[i];
      out.entry(0, 1)[i] = -j.entry(0, 1)[i];
      out.entry(1, 0)[i] = -j.entry(1, 0)[i];
      out.entry(1, 1)[i] = j.entry(0, 0)[i];
    }
    return out;
  }
  for (std::size_t i = 0; i < size; ++i) {
    const double m00 = j.entry(0, 0)[i], m01 = j.entry(0, 1)[i], m02 = j.entry(0, 2)[i];
    const double m10 = j.entry(1, 0)[i], m11 = j.entry(1, 1)[i], m12 = j.entry(1, 2)[i];
    const double m20 = j.entry(2, 0)[i], m21 = j.entry(2, 1)[i], m22 = j.entry(2, 2)[i];
    out.entry(0, 0)[i] = m11 * m22 - m12 * m21;
    out.entry(0, 1)[i] = m02 * m21 - m01 * m22;
    out.entry(0, 2)[i] = m01 * m12 - m02 * m11;
    out.entry(1, 0)[i] = m12 * m20 - m10 * m22;
    out.entry(1, 1)[i] = m00 * m22 - m02 * m20;
    out.entry(1, 2)[i] = m02 * m10 - m00 * m12;
    out.entry(2, 0)[i] = m10 * m21 - m11 * m20;
    out.entry(2, 1)[i] = m01 * m20 - m00 * m21;
    out.entry(2, 2)[i] = m00 * m11 - m01 * m10;
  }
  return out;
}

CurlField curl(const VectorField& f) {
  const GridSpec& g = f.grid;
  CurlField c;
  c.grid = g;
  std::vector<double> tmp(g.size());
  auto diff = [&](int comp, int axis, std::vector<double>& acc, double sign) {
    derivative(f.comp[comp], g, axis, tmp);
    for (std::size_t i = 0; i < tmp.size(); ++i) acc[i] += sign * tmp[i];
  };
  if (g.rank() == 2) {
    c.components = 1;
    c.comp[0].assign(g.size(), 0.0);
    diff(1, 0, c.comp[0], 1.0);
    diff(0, 1, c.comp[0], -1.0);
    return c;
  }
  c.components = 3;
  for (auto& v : c.comp) v.assign(g.size(), 0.0);
  diff(2, 1, c.comp[0], 1.0);
  diff(1, 2, c.comp[0], -1.0);
  diff(0, 2, c.comp[1], 1.0);
  diff(2, 0, c.comp[1], -1.0);
  diff(1, 0, c.comp[2], 1.0);
  diff(0, 1, c.comp[2], -1.0);
  return c;
}

VectorField curl_adjoint(const CurlField& c) {
  const GridSpec& g = c.grid;
  VectorField out(g);
  if (g.rank() == 2) {
    derivative_adjoint_add(c.comp[0], g, 1, out.comp[0], -1.0);
    derivative_adjoint_add(c.comp[0], g, 0, out.comp[1], 1.0);
    return out;
  }
  derivative_adjoint_add(c.comp[1], g, 2, out.comp[0], 1.0);
  derivative_adjoint_add(c.comp[2], g, 1, out.comp[0], -1.0);
  derivative_adjoint_add(c.comp[2], g, 0, out.comp[1], 1.0);
  derivative_adjoint_add(c.comp[0], g, 2, out.comp[1], -1.0);
  derivative_adjoint_add(c.comp[0], g, 1, out.comp[2], 1.0);
  derivative_adjoint_add(c.comp[1], g, 0, out.comp[2], -1.0);
  return out;
}

VectorField curl_curl(const VectorField& f) { return curl_adjoint(curl(f)); }

double mean_curl_magnitude(const CurlField& c) {
  const std::size_t size = c.grid.size();
  if (size == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double m2 = 0.0;
    for (int k = 0; k < c.components; ++k) m2 += c.comp[k][i] * c.comp[k][i];
    acc += std::sqrt(m2);
  }
  return acc / static_cast<double>(size);
}

std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
          0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)};
}

std::array<double, 4> catmull_rom_derivative_weights(double t) {
  const double t2 = t * t;
  return {0.5 * (-3.0 * t2 + 4.0 * t - 1.0), 0.5 * (9.0 * t2 - 10.0 * t),
          0.5 * (-9.0 * t2 + 8.0 * t + 1.0), 0.5 * (3.0 * t2 - 2.0 * t)};
}

namespace {

// Four taps along one axis with edge ghosts folded into in-range indices.
struct AxisStencil {
  std::size_t idx[4];
  double w[4];
  double dw[4];  // d weight / d world coordinate; zero when clamped
};

inline void fold_ghosts(std::size_t n, std::ptrdiff_t first, double* w, std::size_t* idx) {
  // Taps are first .. first+3; ghost -1 = 2 v[0] - v[1], ghost n = 2 v[n-1] - v[n-2].
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t slot[4];
  const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(first, 0, static_cast<std::ptrdiff_t>(n) - 4);
  for (int k = 0; k < 4; ++k) slot[k] = static_cast<std::size_t>(lo + k);
  auto add = [&](std::ptrdiff_t j, double v) { acc[j - lo] += v; };
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  for (int k = 0; k < 4; ++k) {
    const std::ptrdiff_t j = first + k;
    if (j < 0) {
      add(0, 2.0 * w[k]);
      add(1, -w[k]);
    } else if (j > last) {
      add(last, 2.0 * w[k]);
      add(last - 1, -w[k]);
    } else {
      add(j, w[k]);
    }
  }
  for (int k = 0; k < 4; ++k) {
    w[k] = acc[k];
    idx[k] = slot[k];
  }
}

inline AxisStencil axis_stencil(double world, std::size_t n, double h, bool want_derivative) {
  AxisStencil s;
  double u = world / h - 0.5;
  const double last = static_cast<double>(n - 1);
  bool clamped = false;
  if (u <= 0.0) {
    clamped = u < 0.0;
    u = 0.0;
  } else if (u >= last) {
    clamped = u > last;
    u = last;
  }
  auto i = static_cast<std::ptrdiff_t>(std::floor(u));
  if (i >= static_cast<std::ptrdiff_t>(n) - 1) i = static_cast<std::ptrdiff_t>(n) - 2;
  const double t = u - static_cast<double>(i);
  const auto w = catmull_rom_weights(t);
  std::copy(w.begin(), w.end(), s.w);
  std::size_t dummy[4];
  fold_ghosts(n, i - 1, s.w, s.idx);
  if (want_derivative) {
    if (clamped) {
      std::fill(s.dw, s.dw + 4, 0.0);
    } else {
      const auto dw = catmull_rom_derivative_weights(t);
      std::copy(dw.begin(), dw.end(), s.dw);
      fold_ghosts(n, i - 1, s.dw, dummy);
      for (double& x : s.dw) x /= h;
    }
  }
  return s;
}

template <int Rank, bool WithGradient>
void interp_impl(const ScalarField& v, const VectorField& f, ScalarField& out, VectorField* grad) {
  const GridSpec& src = v.grid;
  const std::size_t size = f.grid.size();
  const double* data = v.values.data();
  const std::size_t s0 = src.stride(0);
  const std::size_t s1 = src.stride(1);
  for (std::size_t p = 0; p < size; ++p) {
    const AxisStencil a0 = axis_stencil(f.comp[0][p], src.dim(0), src.spacing(0), WithGradient);
    const AxisStencil a1 = axis_stencil(f.comp[1][p], src.dim(1), src.spacing(1), WithGradient);
    if constexpr (Rank == 2) {
      double val = 0.0, g0 = 0.0, g1 = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double* row = data + a0.idx[i] * s0;
        double r = 0.0, rd = 0.0;
        for (int j = 0; j < 4; ++j) {
          const double x = row[a1.idx[j]];
          r += a1.w[j] * x;
          if constexpr (WithGradient) rd += a1.dw[j] * x;
        }
        val += a0.w[i] * r;
        if constexpr (WithGradient) {
          g0 += a0.dw[i] * r;
          g1 += a0.w[i] * rd;
        }
      }
      out.values[p] = val;
      if constexpr (WithGradient) {
        grad->comp[0][p] = g0;
        grad->comp[1][p] = g1;
      }
    } else {
      const AxisStencil a2 = axis_stencil(f.comp[2][p], src.dim(2), src.spacing(2), WithGradient);
      double val = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0;
      for (int i = 0; i < 4; ++i) {
        double pv = 0.0, pd1 = 0.0, pd2 = 0.0;
        for (int j = 0; j < 4; ++j) {
          const double* row = data + a0.idx[i] * s0 + a1.idx[j] * s1;
          double r = 0.0, rd = 0.0;
          for (int k = 0; k < 4; ++k) {
            const double x = row[a2.idx[k]];
            r += a2.w[k] * x;
            if constexpr (WithGradient) rd += a2.dw[k] * x;
          }
          pv += a1.w[j] * r;
          if constexpr (WithGradient) {
            pd1 += a1.dw[j] * r;
            pd2 += a1.w[j] * rd;
          }
        }
        val += a0.w[i] * pv;
        if constexpr (WithGradient) {
          g0 += a0.dw[i] * pv;
          g1 += a0.w[i] * pd1;
          g2 += a0.w[i] * pd2;
        }
      }
      out.values[p] = val;
      if constexpr (WithGradient) {
        grad->comp[0][p] = g0;
        grad->comp[1][p] = g1;
        grad->comp[2][p] = g2;
      }
    }
  }
}

void check_interp_args(const ScalarField& v, const VectorField& f) {
  if (v.grid.rank() != f.grid.rank()) {
    throw Error(ErrorKind::GridMismatch, "interp: field and map dimensionality differ");
  }
}

}  // namespace

ScalarField interp(const ScalarField& v, const VectorField& f) {
  check_interp_args(v, f);
  ScalarField out(f.grid);
  if (v.grid.rank() == 2) {
    interp_impl<2, false>(v, f, out, nullptr);
  } else {
    interp_impl<3, false>(v, f, out, nullptr);
  }
  return out;
}

ScalarField interp_with_gradient(const ScalarField& v, const VectorField& f, VectorField& grad) {
  check_interp_args(v, f);
  ScalarField out(f.grid);
  grad = VectorField(f.grid);
  if (v.grid.rank() == 2) {
    interp_impl<2, true>(v, f, out, &grad);
  } else {
    interp_impl<3, true>(v, f, out, &grad);
  }
  return out;
}

ScalarField pushforward_residual(const VectorField& f, const DensityVolume& i1,
                                 const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "pushforward_residual: map and I0");
  require_same_grid(i1.grid(), i0.grid(), "pushforward_residual: I1 and I0");
  ScalarField det = determinant(jacobian(f));
  const ScalarField warped = interp(i1.as_field(), f);
  for (std::size_t i = 0; i < det.values.size(); ++i) {
    det.values[i] = det.values[i] * warped.values[i] - i0[i];
  }
  return det;
}

}  // namespace tbm
