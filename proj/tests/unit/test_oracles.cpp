#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tbm/error.hpp"
#include "tbm/oracles.hpp"
#include "tbm/phantoms.hpp"

using namespace tbm;

namespace {

std::vector<double> gaussian(std::size_t n, double center, double sigma) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) + 0.5 - center;
    v[i] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return v;
}

void rescale_to(std::vector<double>& v, double mass) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x *= mass / s;
}

// Exact 1D discrete transport between point masses at the same sorted
// locations: the monotone (north-west corner) coupling.
double monotone_coupling_cost(std::vector<double> p, std::vector<double> q) {
  double cost = 0.0;
  std::size_t i = 0, j = 0;
  while (i < p.size() && j < q.size()) {
    const double m = std::min(p[i], q[j]);
    const double d = static_cast<double>(i) - static_cast<double>(j);
    cost += m * d * d;
    p[i] -= m;
    q[j] -= m;
    if (p[i] <= 1e-15) ++i;
    if (q[j] <= 1e-15) ++j;
  }
  return cost;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected tbm::Error");
  return ErrorKind::InvalidArgument;
}

std::vector<double> vals(const DensityVolume& v) {
  const auto s = v.values();
  return {s.begin(), s.end()};
}

double centroid0(const DensityVolume& v) {
  const GridSpec& g = v.grid();
  double s = 0.0, m = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const std::size_t i = p / g.stride(0);
    s += g.center(0, i) * v[p];
    m += v[p];
  }
  return s / m;
}

}  // namespace

TEST_CASE("omt_1d: identical densities give the identity at zero cost") {
  const std::vector<double> p = gaussian(50, 25.0, 6.0);
  const Omt1dResult r = omt_1d(p, p);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(r.map[i] == doctest::Approx(i + 0.5));
  CHECK(r.cost == doctest::Approx(0.0));
}

TEST_CASE("omt_1d: a translation costs |t|^2 times the mass") {
  std::vector<double> p = gaussian(120, 50.0, 5.0);
  std::vector<double> q = gaussian(120, 53.0, 5.0);
  rescale_to(p, 1.0);
  rescale_to(q, 1.0);
  const Omt1dResult r = omt_1d(p, q);
  CHECK(r.cost == doctest::Approx(9.0).epsilon(1e-3));
  CHECK(r.map[50] - 50.5 == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("omt_1d: Gaussian sigma 5 to sigma 10 costs (s2 - s1)^2 times the mass") {
  std::vector<double> p = gaussian(480, 240.0, 10.0);
  std::vector<double> q = gaussian(480, 240.0, 20.0);
  rescale_to(p, 2.0);
  rescale_to(q, 2.0);
  const Omt1dResult r = omt_1d(p, q, 0.5);
  // Spacing 0.5: world widths 5 and 10, mass 2 * 0.5 = 1.
  CHECK(r.cost == doctest::Approx(25.0).epsilon(0.01));
  for (std::size_t i = 200; i < 280; ++i) CHECK(r.map[i] - 120.0 == doctest::Approx(2.0 * ((i + 0.5) * 0.5 - 120.0)).epsilon(0.02));
  std::vector<double> bigger = q;
  bigger[240] *= 2.0;
  CHECK(kind_of([&] { omt_1d(p, bigger); }) == ErrorKind::MassMismatch);
  std::vector<double> hole = p;
  hole[0] = 0.0;
  CHECK(kind_of([&] { omt_1d(hole, q); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("transport_lp on hand-solvable instances") {
  const std::vector<double> one{1.0};
  CHECK(transport_lp(one, one, {{4.0}}) == doctest::Approx(4.0));
  const std::vector<double> s{1.0, 2.0};
  const std::vector<double> d{2.0, 1.0};
  CHECK(transport_lp(s, d, {{0.0, 1.0}, {1.0, 0.0}}) == doctest::Approx(1.0));
  const std::vector<double> short_d{1.0, 1.0};
  CHECK(kind_of([&] { transport_lp(s, short_d, {{0.0, 1.0}, {1.0, 0.0}}); }) == ErrorKind::Infeasible);
}

TEST_CASE("transport_lp equals the monotone coupling in 1D") {
  const std::size_t n = 40;
  std::vector<double> p = gaussian(n, 15.0, 4.0);
  std::vector<double> q = gaussian(n, 22.0, 6.0);
  for (auto* v : {&p, &q})
    for (double& x : *v) x += 0.01;
  rescale_to(p, 1.0);
  rescale_to(q, 1.0);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dd = static_cast<double>(i) - static_cast<double>(j);
      cost[i][j] = dd * dd;
    }
  const double lp = transport_lp(p, q, cost);
  CHECK(lp == doctest::Approx(monotone_coupling_cost(p, q)).epsilon(1e-9));
  // Cell-uniform spreading differs from point masses by O(h^2) per unit mass.
  CHECK(omt_1d(p, q).cost == doctest::Approx(lp).epsilon(0.03));
}

TEST_CASE("kantorovich_lp: zero on itself, symmetric, capped") {
  const GridSpec g = GridSpec::make2d(5, 5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> a(25), b(25);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  const DensityVolume p = normalize_density(DensityVolume(g, a), 1.0, 0.0);
  const DensityVolume q = normalize_density(DensityVolume(g, b), 1.0, 0.0);
  CHECK(kantorovich_lp(p, p) == doctest::Approx(0.0));
  const double pq = kantorovich_lp(p, q);
  CHECK(pq > 0.0);
  CHECK(pq == doctest::Approx(kantorovich_lp(q, p)).epsilon(1e-9));

  std::vector<double> lone(25, 0.0), other(25, 0.0);
  lone[0] = 1.0;
  other[24] = 1.0;
  // (0,0) -> (4,4): squared distance 32.
  CHECK(kantorovich_lp(DensityVolume(g, lone), DensityVolume(g, other)) == doctest::Approx(32.0));

  const GridSpec big = GridSpec::make2d(21, 20);
  const DensityVolume flat(big, std::vector<double>(big.size(), 1.0));
  CHECK(kind_of([&] { kantorovich_lp(flat, flat); }) == ErrorKind::TooLarge);
}

TEST_CASE("induced_plan_cost: identity, whole-voxel and half-voxel shifts") {
  const GridSpec g = GridSpec::make2d(8, 6, 0.5);
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t p = 0; p < g.size() - 6; ++p) v[p] = 1.0 + 0.1 * static_cast<double>(p % 5);
  const DensityVolume i0(g, v);
  VectorField f = VectorField::identity(g);
  CHECK(induced_plan_cost(f, i0) == doctest::Approx(0.0));
  for (double& x : f.comp[0]) x += 0.5;
  // One voxel along axis 0 for all of the mass (the last row is empty).
  CHECK(induced_plan_cost(f, i0) == doctest::Approx(i0.mass() * 0.25));
  for (double& x : f.comp[0]) x -= 0.25;
  // Half a voxel: half the mass stays, half moves one voxel.
  CHECK(induced_plan_cost(f, i0) == doctest::Approx(0.5 * i0.mass() * 0.25));
}

TEST_CASE("phantom cohorts are deterministic in the seed") {
  PhantomSpec s;
  s.family = PhantomFamily::TwoClass;
  s.dims = {24, 24};
  s.count = 4;
  const PhantomCohort a = make_phantom_cohort(s);
  const PhantomCohort b = make_phantom_cohort(s);
  REQUIRE(a.volumes.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(vals(a.volumes[k]) == vals(b.volumes[k]));
  s.seed = 2;
  const PhantomCohort c = make_phantom_cohort(s);
  CHECK(vals(c.volumes[0]) != vals(a.volumes[0]));
  CHECK(phantom_family_from_string(to_string(PhantomFamily::Aging)) == PhantomFamily::Aging);
  CHECK_THROWS_AS(phantom_family_from_string("zebra"), Error);
}

TEST_CASE("translation phantoms move by shift_step per subject") {
  PhantomSpec s;
  s.family = PhantomFamily::Translation;
  s.dims = {64, 64};
  s.count = 5;
  s.shift_step = 2.0;
  const PhantomCohort c = make_phantom_cohort(s);
  for (std::size_t k = 1; k < c.volumes.size(); ++k) {
    CHECK(centroid0(c.volumes[k]) - centroid0(c.volumes[k - 1]) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(c.volumes[k].mass() == doctest::Approx(kDefaultTargetMass));
  }
}

TEST_CASE("two-class phantoms separate along axis 0") {
  PhantomSpec s;
  s.family = PhantomFamily::TwoClass;
  s.dims = {48, 48};
  s.count = 8;
  const PhantomCohort c = make_phantom_cohort(s);
  REQUIRE(c.labels.size() == 8);
  double m[2] = {0, 0};
  int n[2] = {0, 0};
  for (std::size_t k = 0; k < 8; ++k) {
    m[c.labels[k]] += centroid0(c.volumes[k]);
    ++n[c.labels[k]];
  }
  REQUIRE(n[0] > 0);
  REQUIRE(n[1] > 0);
  CHECK(m[1] / n[1] > m[0] / n[0]);
}

TEST_CASE("aging phantoms: the cavity grows with atrophy") {
  PhantomSpec s;
  s.family = PhantomFamily::Aging;
  s.dims = {48, 48};
  s.count = 6;
  s.jitter = 0.0;
  const PhantomCohort c = make_phantom_cohort(s);
  std::vector<std::size_t> order(c.volumes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.truth[a] < c.truth[b]; });
  const auto cavity = [](const DensityVolume& v) {
    const GridSpec& g = v.grid();
    const double mx = v.max();
    int count = 0;
    for (std::size_t i = 0; i < 48; ++i)
      for (std::size_t j = 0; j < 48; ++j) {
        const double dx = g.center(0, i) - 24.0, dy = g.center(1, j) - 24.0;
        if (std::hypot(dx, dy) < 0.3 * 48 && v[i * 48 + j] < 0.5 * mx) ++count;
      }
    return count;
  };
  for (std::size_t k = 1; k < order.size(); ++k)
    CHECK(cavity(c.volumes[order[k]]) >= cavity(c.volumes[order[k - 1]]));
  CHECK(cavity(c.volumes[order.back()]) > cavity(c.volumes[order.front()]));
}

TEST_CASE("plateau window is one inside and small in the margin") {
  const GridSpec g = GridSpec::make2d(40, 40);
  const ScalarField w = plateau_field(g, 4.0, 1.5);
  CHECK(w.values[20 * 40 + 20] == doctest::Approx(1.0).epsilon(1e-3));
  for (std::size_t j = 0; j < 40; ++j)
    for (std::size_t i : {0, 1, 2, 3, 36, 37, 38, 39}) CHECK(w.values[i * 40 + j] < 0.05);
}

TEST_CASE("random smooth pairs are normalized and reproducible") {
  const GridSpec g = GridSpec::make2d(32, 32);
  const auto [p, q] = random_smooth_pair(g, 5);
  const auto [p2, q2] = random_smooth_pair(g, 5);
  CHECK(vals(p) == vals(p2));
  CHECK(vals(q) == vals(q2));
  CHECK(p.mass() == doctest::Approx(kDefaultTargetMass));
  CHECK(q.mass() == doctest::Approx(kDefaultTargetMass));
  CHECK(vals(p) != vals(q));
}
