#include "tbm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "tbm/error.hpp"
#include "tbm/smoothing.hpp"

namespace tbm {

void SolverConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(mse_termination > 0.0 && mse_termination < 1.0)) fail("mse_termination must be in (0, 1)");
  if (scales < 1) fail("scales must be >= 1");
  if (!(max_step_voxels > 0.0)) fail("max_step_voxels must be > 0");
  if (max_iters < 1) fail("max_iters must be >= 1");
  if (!(gamma_activation_fraction >= 0.0 && gamma_activation_fraction <= 1.0)) {
    fail("gamma_activation_fraction must be in [0, 1]");
  }
  if (stagnation_window < 1) fail("stagnation_window must be >= 1");
  if (!(precondition_voxels >= 0.0)) fail("precondition_voxels must be >= 0");
  if (!(settle_tolerance >= 0.0)) fail("settle_tolerance must be >= 0");
}

void SolveTrace::write_csv(std::ostream& out) const {
  out << "iter,scale,rel_mse,mean_curl,cost,step\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%d,%.10g,%.10g,%.10g,%.10g\n", r.iteration, r.scale,
                  r.rel_mse, r.mean_curl, r.cost, r.step);
    out << line;
  }
}

void SolveTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_csv(out);
}

namespace {

void check_inputs(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1) {
  require_same_grid(i0.grid(), i1.grid(), "template and subject grids differ");
  require_same_grid(f.grid, i0.grid(), "map and template grids differ");
}

// Terms shared by the objective, its gradient and the metrics.
struct Residual {
  JacobianField jac;
  ScalarField det;
  ScalarField warped;  // I1(f)
  VectorField warped_grad;
  ScalarField r;       // det * I1(f) - I0
};

Residual residual(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                  bool with_gradient) {
  Residual out;
  out.jac = jacobian(f);
  out.det = determinant(out.jac);
  const ScalarField src = i1.as_field();
  out.warped = with_gradient ? interp_with_gradient(src, f, out.warped_grad) : interp(src, f);
  out.r = ScalarField(f.grid);
  for (std::size_t i = 0; i < out.r.values.size(); ++i) {
    out.r.values[i] = out.det.values[i] * out.warped.values[i] - i0[i];
  }
  return out;
}

double displacement_energy(const VectorField& f, const DensityVolume& i0) {
  const VectorField id = VectorField::identity(f.grid);
  double acc = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    double d2 = 0.0;
    for (int a = 0; a < f.rank(); ++a) {
      const double d = f.comp[a][p] - id.comp[a][p];
      d2 += d * d;
    }
    acc += d2 * i0[p];
  }
  return acc * f.grid.voxel_volume();
}

double sum_squares(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double curl_energy(const CurlField& c) {
  double acc = 0.0;
  for (int k = 0; k < c.components; ++k) acc += sum_squares(c.comp[k]);
  return acc;
}

}  // namespace

double objective(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                 const SolverConfig& cfg, bool curl_active) {
  check_inputs(f, i0, i1);
  const double dv = f.grid.voxel_volume();
  const Residual res = residual(f, i0, i1, false);
  double value = 0.5 * displacement_energy(f, i0);
  value += 0.5 * cfg.lambda * sum_squares(res.r.values) * dv;
  if (curl_active && cfg.gamma > 0.0) value += 0.5 * cfg.gamma * curl_energy(curl(f)) * dv;
  return value;
}

VectorField el_gradient(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                        const SolverConfig& cfg, bool curl_active) {
  check_inputs(f, i0, i1);
  const GridSpec& g = f.grid;
  const int n = g.rank();
  const std::size_t size = g.size();
  const Residual res = residual(f, i0, i1, true);
  const JacobianField adj = adjugate(res.jac);
  const VectorField id = VectorField::identity(g);

  VectorField grad(g);
  std::vector<double> flux(size);
  for (int i = 0; i < n; ++i) {
    auto& gi = grad.comp[i];
    const auto& fi = f.comp[i];
    const auto& xi = id.comp[i];
    const auto& dI = res.warped_grad.comp[i];
    for (std::size_t p = 0; p < size; ++p) {
      gi[p] = (fi[p] - xi[p]) * i0[p] +
              cfg.lambda * res.r.values[p] * res.det.values[p] * dI[p];
    }
    // Mass-preservation flux through the Jacobian: cofactor C_ik = adj_ki.
    for (int k = 0; k < n; ++k) {
      const auto& cof = adj.entry(k, i);
      for (std::size_t p = 0; p < size; ++p) {
        flux[p] = res.r.values[p] * res.warped.values[p] * cof[p];
      }
      derivative_adjoint_add(flux, g, k, gi, cfg.lambda);
    }
  }
  if (curl_active && cfg.gamma > 0.0) {
    const VectorField cc = curl_curl(f);
    for (int i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < size; ++p) grad.comp[i][p] += cfg.gamma * cc.comp[i][p];
    }
  }
  return grad;
}

double relative_mse(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1) {
  check_inputs(f, i0, i1);
  const Residual res = residual(f, i0, i1, false);
  return sum_squares(res.r.values) / sum_squares(i0.values());
}

double transport_cost(const VectorField& f, const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "map and template grids differ");
  return displacement_energy(f, i0);
}

MapMetrics evaluate_map(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1) {
  check_inputs(f, i0, i1);
  const Residual res = residual(f, i0, i1, false);
  const CurlField c = curl(f);
  const double dv = f.grid.voxel_volume();
  MapMetrics m;
  m.mass_penalty = sum_squares(res.r.values) * dv;
  m.rel_mse = m.mass_penalty / (sum_squares(i0.values()) * dv);
  m.mean_curl = mean_curl_magnitude(c);
  m.curl_energy = curl_energy(c) * dv;
  m.transport_cost = displacement_energy(f, i0);
  m.normalized_cost = m.transport_cost / i0.mass();
  m.min_det = *std::min_element(res.det.values.begin(), res.det.values.end());
  return m;
}

double MapMetrics::objective(const SolverConfig& cfg, bool curl_active) const {
  double value = 0.5 * transport_cost + 0.5 * cfg.lambda * mass_penalty;
  if (curl_active) value += 0.5 * cfg.gamma * curl_energy;
  return value;
}

NesterovState::NesterovState(VectorField start) : current(start), previous(std::move(start)) {}

double NesterovState::momentum() const {
  if (k <= 2) return 0.0;
  return static_cast<double>(k - 2) / static_cast<double>(k + 1);
}

VectorField NesterovState::lookahead() const {
  const double beta = momentum();
  if (beta == 0.0) return current;
  VectorField g = current;
  for (int a = 0; a < g.rank(); ++a) {
    auto& ga = g.comp[a];
    const auto& pa = previous.comp[a];
    for (std::size_t p = 0; p < ga.size(); ++p) ga[p] += beta * (ga[p] - pa[p]);
  }
  return g;
}

double step_length(const VectorField& grad, const SolverConfig& cfg) {
  double max2 = 0.0;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    double m2 = 0.0;
    for (int a = 0; a < grad.rank(); ++a) m2 += grad.comp[a][p] * grad.comp[a][p];
    max2 = std::max(max2, m2);
  }
  if (!(max2 > 0.0) || !std::isfinite(max2)) return 0.0;
  return cfg.max_step_voxels * grad.grid.min_spacing() / std::sqrt(max2);
}

void nesterov_step(NesterovState& state, const VectorField& lookahead, const VectorField& grad,
                   const SolverConfig& cfg) {
  const double alpha = step_length(grad, cfg);
  if (alpha == 0.0) {
    state.stationary = true;
    return;
  }
  VectorField next = lookahead;
  for (int a = 0; a < next.rank(); ++a) {
    auto& na = next.comp[a];
    const auto& ga = grad.comp[a];
    for (std::size_t p = 0; p < na.size(); ++p) na[p] -= alpha * ga[p];
  }
  state.previous = std::move(state.current);
  state.current = std::move(next);
  ++state.k;
}

void project_to_domain(VectorField& f) {
  for (int a = 0; a < f.rank(); ++a) {
    const double lo = f.grid.center(a, 0);
    const double hi = f.grid.center(a, f.grid.dim(a) - 1);
    for (double& v : f.comp[a]) v = std::clamp(v, lo, hi);
  }
}

namespace {

// Slip boundary: the component normal to a face is held fixed on that
// face's voxels, and no direction may push a position out of the domain.
void constrain_direction(const VectorField& at, VectorField& dir) {
  const GridSpec& g = at.grid;
  for (int a = 0; a < at.rank(); ++a) {
    const double lo = g.center(a, 0);
    const double hi = g.center(a, g.dim(a) - 1);
    const std::size_t stride = g.stride(a);
    const std::size_t last = g.dim(a) - 1;
    const auto& x = at.comp[a];
    auto& d = dir.comp[a];
    for (std::size_t p = 0; p < d.size(); ++p) {
      const std::size_t i = (p / stride) % g.dim(a);
      if ((x[p] <= lo && d[p] > 0.0) || (x[p] >= hi && d[p] < 0.0)) d[p] = 0.0;
      if (i == 0 || i == last) d[p] = 0.0;
    }
  }
}

double min_jacobian_det(const VectorField& f) {
  const ScalarField d = determinant(jacobian(f));
  return *std::min_element(d.values.begin(), d.values.end());
}

}  // namespace

DiffeoCheck enforce_diffeomorphism(const VectorField& candidate, const VectorField& previous,
                                   const SolverConfig& cfg) {
  DiffeoCheck out;
  out.map = candidate;
  out.min_det = min_jacobian_det(candidate);
  if (out.min_det > cfg.diffeo_min_det) return out;

  bool same = true;
  for (int a = 0; a < candidate.rank() && same; ++a) same = candidate.comp[a] == previous.comp[a];
  if (same) return out;

  double t = 1.0;
  for (int h = 1; h <= 20; ++h) {
    t *= 0.5;
    for (int a = 0; a < candidate.rank(); ++a) {
      auto& m = out.map.comp[a];
      const auto& c = candidate.comp[a];
      const auto& p = previous.comp[a];
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = p[i] + t * (c[i] - p[i]);
    }
    out.halvings = h;
    out.min_det = min_jacobian_det(out.map);
    if (out.min_det > cfg.diffeo_min_det) return out;
  }
  out.map = previous;
  out.min_det = min_jacobian_det(previous);
  out.rejected = true;
  return out;
}

VectorField upsample_map(const VectorField& coarse, const GridSpec& fine) {
  const VectorField coarse_id = VectorField::identity(coarse.grid);
  const VectorField fine_id = VectorField::identity(fine);
  VectorField out = fine_id;
  ScalarField disp(coarse.grid);
  for (int a = 0; a < fine.rank(); ++a) {
    for (std::size_t p = 0; p < disp.values.size(); ++p) {
      disp.values[p] = coarse.comp[a][p] - coarse_id.comp[a][p];
    }
    // World-unit displacements carry over between scales without rescaling.
    const ScalarField up = interp(disp, fine_id);
    for (std::size_t p = 0; p < up.values.size(); ++p) out.comp[a][p] += up.values[p];
  }
  return out;
}

namespace {

std::vector<std::size_t> level_dims(const GridSpec& g, int level) {
  std::vector<std::size_t> d(g.rank());
  for (int a = 0; a < g.rank(); ++a) {
    std::size_t n = g.dim(a);
    for (int s = 0; s < level; ++s) n = (n + 1) / 2;
    d[a] = n;
  }
  return d;
}

bool level_fits(const GridSpec& g, int level) {
  for (std::size_t n : level_dims(g, level)) {
    if (n < GridSpec::kMinDim) return false;
  }
  return true;
}

struct ScaleOutcome {
  VectorField best;
  MapMetrics best_metrics;
};

ScaleOutcome run_scale(const DensityVolume& i0, const DensityVolume& i1, VectorField start,
                       const SolverConfig& cfg, int scale, SolveTrace& trace) {
  MapMetrics metrics = evaluate_map(start, i0, i1);
  const double initial_mse = metrics.rel_mse;
  ScaleOutcome out{start, metrics};
  trace.rows.push_back({0, scale, metrics.rel_mse, metrics.mean_curl, metrics.transport_cost, 0.0});

  const HelmholtzSmoother smoother(i0.grid(), cfg.precondition_voxels);
  NesterovState state(std::move(start));
  bool curl_active = false;
  // Settling phase: target met, curl on, best = lowest objective within target.
  bool settling = metrics.rel_mse <= cfg.mse_termination;
  std::vector<double> history;  // best MSE, or best objective while settling
  history.push_back(settling ? metrics.objective(cfg) : metrics.rel_mse);
  const auto w = static_cast<std::size_t>(cfg.stagnation_window);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (!curl_active && (settling || metrics.rel_mse <= cfg.gamma_activation_fraction * initial_mse)) {
      curl_active = true;
    }
    const VectorField look = state.lookahead();
    VectorField dir = el_gradient(look, i0, i1, cfg, curl_active);
    smoother.apply(dir);
    constrain_direction(look, dir);
    const double alpha = step_length(dir, cfg);
    nesterov_step(state, look, dir, cfg);
    if (state.stationary) break;
    project_to_domain(state.current);

    DiffeoCheck chk = enforce_diffeomorphism(state.current, state.previous, cfg);
    if (chk.rejected) {
      ++trace.rejected_steps;
      state.current = state.previous;
      state.k = 1;
    } else if (chk.halvings > 0) {
      state.current = std::move(chk.map);
      state.k = 1;
    }

    metrics = evaluate_map(state.current, i0, i1);
    trace.rows.push_back(
        {it, scale, metrics.rel_mse, metrics.mean_curl, metrics.transport_cost, alpha});
    if (!std::isfinite(metrics.rel_mse)) break;

    if (!settling) {
      if (metrics.rel_mse < out.best_metrics.rel_mse) {
        out.best = state.current;
        out.best_metrics = metrics;
      }
      if (out.best_metrics.rel_mse <= cfg.mse_termination) {
        settling = true;
        history.assign(1, out.best_metrics.objective(cfg));
        continue;
      }
      history.push_back(out.best_metrics.rel_mse);
      if (history.size() > w &&
          history[history.size() - 1 - w] - out.best_metrics.rel_mse < cfg.stagnation_tolerance) {
        break;
      }
    } else {
      const double best = out.best_metrics.objective(cfg);
      if (metrics.rel_mse <= cfg.mse_termination && metrics.objective(cfg) < best) {
        out.best = state.current;
        out.best_metrics = metrics;
      }
      history.push_back(out.best_metrics.objective(cfg));
      if (history.size() > w) {
        const double earlier = history[history.size() - 1 - w];
        if (earlier - history.back() <= cfg.settle_tolerance * earlier) break;
      }
    }
  }
  return out;
}

}  // namespace

SolveResult solve(const DensityVolume& i0, const DensityVolume& i1, const SolverConfig& cfg) {
  cfg.validate();
  require_same_grid(i0.grid(), i1.grid(), "solve: template and subject grids differ");

  int levels = 1;
  while (levels < cfg.scales && level_fits(i0.grid(), levels)) ++levels;

  std::vector<DensityVolume> pyr0{i0};
  std::vector<DensityVolume> pyr1{i1};
  for (int s = 1; s < levels; ++s) {
    const auto d = level_dims(i0.grid(), s);
    pyr0.push_back(resample(pyr0.back(), d));
    pyr1.push_back(resample(pyr1.back(), d));
  }

  SolveResult result;
  VectorField map = VectorField::identity(pyr0.back().grid());
  ScaleOutcome outcome;
  for (int s = levels - 1; s >= 0; --s) {
    if (s != levels - 1) {
      // Cubic upsampling can overshoot into a fold; shrink toward identity.
      const VectorField up = upsample_map(map, pyr0[s].grid());
      DiffeoCheck chk = enforce_diffeomorphism(up, VectorField::identity(up.grid), cfg);
      map = chk.rejected ? VectorField::identity(up.grid) : std::move(chk.map);
    }
    outcome = run_scale(pyr0[s], pyr1[s], std::move(map), cfg, s, result.trace);
    map = outcome.best;
  }
  result.map = std::move(map);
  result.final_metrics = outcome.best_metrics;
  result.converged = result.final_metrics.rel_mse <= cfg.mse_termination &&
                     result.final_metrics.min_det > cfg.diffeo_min_det;
  return result;
}

}  // namespace tbm
