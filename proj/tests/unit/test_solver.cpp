#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tbm/error.hpp"
#include "tbm/oracles.hpp"
#include "tbm/phantoms.hpp"
#include "tbm/solver.hpp"

using namespace tbm;

namespace {

DensityVolume smooth_density(const GridSpec& g, std::uint64_t seed) {
  const VectorField r = random_smooth_field(g, seed, 1.0);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * r.comp[0][i];
  return normalize_density(DensityVolume(g, std::move(v)));
}

// Contracted identity plus a smooth perturbation; stays inside the hull.
VectorField perturbed_map(const GridSpec& g, std::uint64_t seed) {
  const VectorField id = VectorField::identity(g);
  const VectorField u = random_smooth_field(g, seed, 0.4);
  VectorField f(g);
  for (int a = 0; a < g.rank(); ++a) {
    const double c = 0.5 * static_cast<double>(g.dim(a)) * g.spacing(a);
    for (std::size_t i = 0; i < g.size(); ++i) f.comp[a][i] = c + 0.85 * (id.comp[a][i] - c) + u.comp[a][i];
  }
  return f;
}

double max_abs_displacement(const VectorField& a, const VectorField& b) {
  double m = 0.0;
  for (int c = 0; c < a.rank(); ++c)
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.comp[c][i] - b.comp[c][i]));
  return m;
}

}  // namespace

TEST_CASE("config validation rejects out-of-range hyperparameters") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.mse_termination = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SolverConfig{};
  c.scales = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SolverConfig{};
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("transport_cost: identity is free, a constant shift costs |t|^2 mass") {
  const GridSpec g = GridSpec::make2d(10, 10);
  const DensityVolume i0 = normalize_density(DensityVolume(g, std::vector<double>(g.size(), 1.0)), 1.0, 0.0);
  VectorField f = VectorField::identity(g);
  CHECK(transport_cost(f, i0) == 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    f.comp[0][i] += 0.3;
    f.comp[1][i] -= 0.4;
  }
  CHECK(transport_cost(f, i0) == doctest::Approx(0.25));
}

TEST_CASE("objective at the identity between equal densities is zero") {
  const GridSpec g = GridSpec::make2d(12, 12);
  const DensityVolume i0 = smooth_density(g, 5);
  CHECK(objective(VectorField::identity(g), i0, i0, SolverConfig{}) == doctest::Approx(0.0));
  CHECK(relative_mse(VectorField::identity(g), i0, i0) == doctest::Approx(0.0));
}

TEST_CASE("pure transport term: gradient is (f - x) I0 and finite differences agree to 1e-8") {
  const GridSpec g = GridSpec::make3d(8, 8, 8);
  const DensityVolume i0 = smooth_density(g, 1);
  const DensityVolume i1 = smooth_density(g, 2);
  const VectorField f = perturbed_map(g, 3);
  SolverConfig cfg;
  cfg.lambda = 0.0;
  cfg.gamma = 0.0;
  const VectorField grad = el_gradient(f, i0, i1, cfg);
  const VectorField id = VectorField::identity(g);
  for (int a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < g.size(); i += 11)
      CHECK(grad.comp[a][i] == doctest::Approx((f.comp[a][i] - id.comp[a][i]) * i0[i]));
  // The term is quadratic, so a central difference is exact for any step; a
  // large one keeps cancellation out of the comparison.
  FdCheckOptions opts;
  opts.trials = 5;
  opts.epsilon = 0.1;
  CHECK(fd_objective_check(f, i0, i1, cfg, opts) <= 1e-8);
}

TEST_CASE("full objective: 20 random directions on 8^3 agree within 1e-3") {
  const GridSpec g = GridSpec::make3d(8, 8, 8);
  const DensityVolume i0 = smooth_density(g, 11);
  const DensityVolume i1 = smooth_density(g, 12);
  const VectorField f = perturbed_map(g, 13);
  FdCheckOptions opts;
  opts.trials = 20;
  CHECK(fd_objective_check(f, i0, i1, SolverConfig{}, opts) <= 1e-3);
}

TEST_CASE("single-voxel directions match per-voxel partial derivatives") {
  const GridSpec g = GridSpec::make3d(8, 8, 8);
  const DensityVolume i0 = smooth_density(g, 21);
  const DensityVolume i1 = smooth_density(g, 22);
  const VectorField f = perturbed_map(g, 23);
  for (long voxel : {0L, 7L, 73L, 292L, 511L}) {
    FdCheckOptions opts;
    opts.trials = 1;
    opts.single_voxel = voxel;
    CHECK(fd_objective_check(f, i0, i1, SolverConfig{}, opts) <= 1e-3);
  }
}

TEST_CASE("a tampered gradient is caught by the finite-difference check") {
  const GridSpec g = GridSpec::make3d(8, 8, 8);
  const DensityVolume i0 = smooth_density(g, 31);
  const DensityVolume i1 = smooth_density(g, 32);
  const VectorField f = perturbed_map(g, 33);
  const GradientFn tampered = [](const VectorField& m, const DensityVolume& a, const DensityVolume& b,
                                 const SolverConfig& c) {
    VectorField grad = el_gradient(m, a, b, c);
    for (auto& comp : grad.comp)
      for (double& v : comp) v *= 1.01;
    return grad;
  };
  FdCheckOptions opts;
  opts.trials = 3;
  CHECK(fd_objective_check(f, i0, i1, SolverConfig{}, opts, tampered) > 1e-3);
}

TEST_CASE("step_length moves the largest component by max_step_voxels * h") {
  const GridSpec g = GridSpec::make2d(6, 6, 0.5);
  VectorField grad(g);
  grad.comp[0][4] = -8.0;
  grad.comp[1][9] = 2.0;
  SolverConfig cfg;
  const double alpha = step_length(grad, cfg);
  CHECK(alpha * 8.0 == doctest::Approx(cfg.max_step_voxels * 0.5));
  CHECK(step_length(VectorField(g), cfg) == 0.0);
}

TEST_CASE("Nesterov momentum follows (k - 2) / (k + 1)") {
  const GridSpec g = GridSpec::make2d(4, 4);
  NesterovState s(VectorField::identity(g));
  CHECK(s.momentum() == 0.0);
  s.k = 5;
  CHECK(s.momentum() == doctest::Approx(3.0 / 6.0));
  VectorField grad(g);
  grad.comp[0][5] = 1.0;
  SolverConfig cfg;
  NesterovState t(VectorField::identity(g));
  const VectorField look = t.lookahead();
  nesterov_step(t, look, grad, cfg);
  CHECK(t.k == 2);
  CHECK(t.current.comp[0][5] == doctest::Approx(VectorField::identity(g).comp[0][5] - cfg.max_step_voxels));
  NesterovState z(VectorField::identity(g));
  nesterov_step(z, z.lookahead(), VectorField(g), cfg);
  CHECK(z.stationary);
  CHECK(z.k == 1);
}

TEST_CASE("project_to_domain clamps into the hull of voxel centers") {
  const GridSpec g = GridSpec::make2d(5, 5, 2.0);
  VectorField f = VectorField::identity(g);
  f.comp[0][0] = -3.0;
  f.comp[1][24] = 50.0;
  project_to_domain(f);
  CHECK(f.comp[0][0] == doctest::Approx(1.0));
  CHECK(f.comp[1][24] == doctest::Approx(9.0));
}

TEST_CASE("enforce_diffeomorphism halves a folding step toward the previous map") {
  const GridSpec g = GridSpec::make2d(10, 10);
  const VectorField prev = VectorField::identity(g);
  VectorField cand = prev;
  // Row 5 pulled behind row 3: the difference across row 4 turns negative.
  for (std::size_t j = 0; j < 10; ++j) cand.comp[0][5 * 10 + j] -= 2.5;
  const DiffeoCheck chk = enforce_diffeomorphism(cand, prev, SolverConfig{});
  CHECK_FALSE(chk.rejected);
  CHECK(chk.halvings >= 1);
  CHECK(chk.min_det > SolverConfig{}.diffeo_min_det);
  const ScalarField d = determinant(jacobian(chk.map));
  CHECK(*std::min_element(d.values.begin(), d.values.end()) > 0.0);
}

TEST_CASE("upsample_map carries the identity to the identity") {
  const GridSpec fine = GridSpec::make2d(16, 16);
  const std::vector<std::size_t> half{8, 8};
  const VectorField up = upsample_map(VectorField::identity(fine.resized(half)), fine);
  CHECK(max_abs_displacement(up, VectorField::identity(fine)) == doctest::Approx(0.0));
}

TEST_CASE("trace CSV has the documented header") {
  SolveTrace t;
  t.rows.push_back({1, 0, 0.5, 0.01, 2.0, 0.1});
  std::ostringstream out;
  t.write_csv(out);
  CHECK(out.str().rfind("iter,scale,rel_mse,mean_curl,cost,step\n1,0,", 0) == 0);
}

TEST_CASE("solving a density onto itself returns (near) the identity") {
  const GridSpec g = GridSpec::make2d(24, 24);
  const auto [p, q] = random_smooth_pair(g, 4);
  (void)q;
  const SolveResult r = solve(p, p, SolverConfig{});
  CHECK(r.converged);
  CHECK(r.final_metrics.normalized_cost < 1e-6);
}

TEST_CASE("solver properties on a smooth 48^2 pair") {
  const GridSpec g = GridSpec::make2d(48, 48);
  const auto [p, q] = random_smooth_pair(g, 2);
  const SolverConfig cfg;
  const SolveResult r = solve(p, q, cfg);
  REQUIRE(r.converged);
  CHECK(r.final_metrics.rel_mse <= cfg.mse_termination);
  CHECK(r.final_metrics.min_det > cfg.diffeo_min_det);

  SUBCASE("mass conservation within 1%") {
    const ScalarField det = determinant(jacobian(r.map));
    const ScalarField i1f = interp(q.as_field(), r.map);
    double pushed = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) pushed += det.values[i] * i1f.values[i];
    pushed *= g.voxel_volume();
    CHECK(pushed == doctest::Approx(p.mass()).epsilon(0.01));
  }

  SUBCASE("relative MSE of the returned map is no worse than at the finest scale's start") {
    const auto first = std::find_if(r.trace.rows.begin(), r.trace.rows.end(),
                                    [](const TraceRow& row) { return row.scale == 0; });
    REQUIRE(first != r.trace.rows.end());
    CHECK(r.final_metrics.rel_mse <= first->rel_mse);
  }

  SUBCASE("roughly symmetric: cost(p -> q) vs cost(q -> p) within 2%") {
    const SolveResult back = solve(q, p, cfg);
    REQUIRE(back.converged);
    const double a = r.final_metrics.transport_cost;
    const double b = back.final_metrics.transport_cost;
    CHECK(std::abs(a - b) <= 0.02 * 0.5 * (a + b));
  }
}

TEST_CASE("curl never increases across 50-iteration windows after activation") {
  const GridSpec g = GridSpec::make2d(48, 48);
  const auto [p, q] = random_smooth_pair(g, 3);
  const SolverConfig cfg;
  const SolveResult r = solve(p, q, cfg);
  REQUIRE(r.converged);
  const auto& rows = r.trace.rows;
  const int finest = 0;
  std::vector<double> curl;
  for (const auto& row : rows)
    if (row.scale == finest) curl.push_back(row.mean_curl);
  REQUIRE(curl.size() > 100);
  // The finest level starts with gamma active (its first activation check
  // happens on entry); compare each window end with its start.
  int increases = 0;
  for (std::size_t i = 50; i < curl.size(); i += 50) increases += curl[i] > curl[i - 50] ? 1 : 0;
  CHECK(increases == 0);
}
