#include "tbm/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "tbm/error.hpp"

namespace tbm {

Omt1dResult omt_1d(std::span<const double> p, std::span<const double> q, double spacing) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorKind::InvalidArgument, "omt_1d: densities must share a nonempty grid");
  }
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "omt_1d: spacing must be > 0");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !(q[i] > 0.0) || !std::isfinite(p[i]) || !std::isfinite(q[i])) {
      throw Error(ErrorKind::InvalidArgument, "omt_1d: densities must be positive and finite");
    }
  }
  const double mp = stable_sum(p);
  const double mq = stable_sum(q);
  if (std::abs(mp - mq) > 1e-9 * std::max(mp, mq)) {
    throw Error(ErrorKind::MassMismatch, "omt_1d: total masses differ");
  }

  const std::size_t n = p.size();
  std::vector<double> q_edges(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) q_edges[j + 1] = q_edges[j] + q[j] * spacing;

  Omt1dResult out;
  out.map.resize(n);
  double below = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = below + 0.5 * p[i] * spacing;
    below += p[i] * spacing;
    while (j + 1 < n && q_edges[j + 1] <= target) ++j;
    const double frac = std::clamp((target - q_edges[j]) / (q[j] * spacing), 0.0, 1.0);
    out.map[i] = (static_cast<double>(j) + frac) * spacing;
    const double x = (static_cast<double>(i) + 0.5) * spacing;
    const double d = out.map[i] - x;
    out.cost += d * d * p[i] * spacing;
  }
  return out;
}

double transport_lp(std::span<const double> supply, std::span<const double> demand,
                    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  if (cost.size() != n) throw Error(ErrorKind::InvalidArgument, "cost rows must match supply");
  for (const auto& row : cost) {
    if (row.size() != m) throw Error(ErrorKind::InvalidArgument, "cost cols must match demand");
  }
  const double total_s = stable_sum(supply);
  const double total_d = stable_sum(demand);
  if (std::abs(total_s - total_d) > 1e-9 * std::max(total_s, total_d)) {
    throw Error(ErrorKind::Infeasible, "supply and demand totals differ");
  }
  const double tol = 1e-13 * total_s;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> s(supply.begin(), supply.end());
  std::vector<double> d(demand.begin(), demand.end());
  // Balance the last sink so the totals agree exactly.
  d.back() += total_s - total_d;
  std::vector<double> flow(n * m, 0.0);

  // Node layout: sources [0, n), sinks [n, n + m). Reduced cost of u->v is
  // cost + pot[u] - pot[v] >= 0.
  std::vector<double> pot(n + m, 0.0);
  for (std::size_t jj = 0; jj < m; ++jj) {
    double best = kInf;
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, cost[i][jj]);
    pot[n + jj] = best;
  }

  std::vector<double> dist(n + m);
  std::vector<std::size_t> parent(n + m);
  std::vector<char> done(n + m);
  double remaining = total_s;

  while (remaining > tol) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i] > tol) {
        dist[i] = 0.0;
        parent[i] = i;
      }
    }
    std::size_t target = n + m;
    while (true) {
      std::size_t u = n + m;
      double best = kInf;
      for (std::size_t v = 0; v < n + m; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u == n + m) break;
      done[u] = 1;
      if (u >= n && d[u - n] > tol) {
        target = u;
        break;
      }
      if (u < n) {
        const auto& row = cost[u];
        for (std::size_t jj = 0; jj < m; ++jj) {
          const std::size_t v = n + jj;
          if (done[v]) continue;
          const double nd = dist[u] + std::max(0.0, row[jj] + pot[u] - pot[v]);
          if (nd < dist[v]) {
            dist[v] = nd;
            parent[v] = u;
          }
        }
      } else {
        const std::size_t jj = u - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (done[i] || flow[i * m + jj] <= tol) continue;
          const double nd = dist[u] + std::max(0.0, -cost[i][jj] + pot[u] - pot[i]);
          if (nd < dist[i]) {
            dist[i] = nd;
            parent[i] = u;
          }
        }
      }
    }
    if (target == n + m) throw Error(ErrorKind::Infeasible, "no augmenting path");

    // Bottleneck along the path.
    double delta = d[target - n];
    std::size_t v = target;
    while (true) {
      const std::size_t u = parent[v];
      if (u == v) {
        delta = std::min(delta, s[v]);
        break;
      }
      if (u >= n) delta = std::min(delta, flow[v * m + (u - n)]);  // backward arc sink->source
      v = u;
    }
    v = target;
    while (true) {
      const std::size_t u = parent[v];
      if (u == v) {
        s[v] -= delta;
        break;
      }
      if (u < n) {
        flow[u * m + (v - n)] += delta;
      } else {
        flow[v * m + (u - n)] -= delta;
      }
      v = u;
    }
    d[target - n] -= delta;
    remaining -= delta;

    const double cap = dist[target];
    for (std::size_t w = 0; w < n + m; ++w) pot[w] += std::min(dist[w], cap);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jj = 0; jj < m; ++jj) total += flow[i * m + jj] * cost[i][jj];
  }
  return total;
}

double kantorovich_lp(const DensityVolume& p, const DensityVolume& q, std::size_t max_voxels) {
  require_same_grid(p.grid(), q.grid(), "kantorovich_lp: grids differ");
  const GridSpec& g = p.grid();
  if (g.size() > max_voxels) {
    throw Error(ErrorKind::TooLarge, "kantorovich_lp: " + std::to_string(g.size()) +
                                         " voxels exceeds the cap of " + std::to_string(max_voxels));
  }
  const double dv = g.voxel_volume();
  const VectorField x = VectorField::identity(g);
  const std::size_t n = g.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (int a = 0; a < g.rank(); ++a) {
        const double dx = x.comp[a][i] - x.comp[a][j];
        c += dx * dx;
      }
      cost[i][j] = c;
    }
  }
  std::vector<double> supply(n);
  std::vector<double> demand(n);
  for (std::size_t i = 0; i < n; ++i) {
    supply[i] = p[i] * dv;
    demand[i] = q[i] * dv;
  }
  return transport_lp(supply, demand, cost);
}

double induced_plan_cost(const VectorField& f, const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "induced_plan_cost");
  const GridSpec& g = f.grid;
  const int rank = g.rank();
  const double dv = g.voxel_volume();
  double total = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    std::array<std::size_t, 3> src{0, 0, 0};
    for (int a = 0; a < rank; ++a) src[a] = (p / g.stride(a)) % g.dim(a);
    std::array<std::size_t, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < rank; ++a) {
      const double hi = static_cast<double>(g.dim(a) - 1);
      const double u = std::clamp(f.comp[a][p] / g.spacing(a) - 0.5, 0.0, hi);
      base[a] = std::min(static_cast<std::size_t>(u), g.dim(a) - 2);
      frac[a] = u - static_cast<double>(base[a]);
    }
    for (int corner = 0; corner < (1 << rank); ++corner) {
      double w = i0[p] * dv;
      double d2 = 0.0;
      for (int a = 0; a < rank; ++a) {
        const bool up = (corner >> a) & 1;
        w *= up ? frac[a] : 1.0 - frac[a];
        const double dst = static_cast<double>(base[a] + (up ? 1 : 0));
        const double diff = (dst - static_cast<double>(src[a])) * g.spacing(a);
        d2 += diff * diff;
      }
      total += w * d2;
    }
  }
  return total;
}

VectorField random_smooth_field(const GridSpec& grid, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const VectorField x = VectorField::identity(grid);
  VectorField out(grid);
  constexpr int kTerms = 3;
  for (int c = 0; c < grid.rank(); ++c) {
    for (int t = 0; t < kTerms; ++t) {
      std::array<double, 3> wave{0.0, 0.0, 0.0};
      for (int a = 0; a < grid.rank(); ++a) {
        const double extent = static_cast<double>(grid.dim(a)) * grid.spacing(a);
        wave[a] = 2.0 * std::numbers::pi * std::floor(unit(rng) * 3.0) / extent;
      }
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double amp = amplitude * (2.0 * unit(rng) - 1.0) / kTerms;
      for (std::size_t p = 0; p < grid.size(); ++p) {
        double arg = phase;
        for (int a = 0; a < grid.rank(); ++a) arg += wave[a] * x.comp[a][p];
        out.comp[c][p] += amp * std::cos(arg);
      }
    }
  }
  return out;
}

double fd_objective_check(const VectorField& f, const DensityVolume& i0, const DensityVolume& i1,
                          const SolverConfig& cfg, const FdCheckOptions& opts,
                          const GradientFn& gradient) {
  const GridSpec& g = f.grid;
  const VectorField grad = gradient ? gradient(f, i0, i1, cfg) : el_gradient(f, i0, i1, cfg, true);
  const double dv = g.voxel_volume();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  double worst = 0.0;
  for (int t = 0; t < opts.trials; ++t) {
    VectorField h(g);
    if (opts.single_voxel >= 0) {
      for (int a = 0; a < g.rank(); ++a) h.comp[a][static_cast<std::size_t>(opts.single_voxel)] = normal(rng);
    } else {
      h = random_smooth_field(g, rng(), 1.0);
    }
    double analytic = 0.0;
    VectorField plus = f;
    VectorField minus = f;
    for (int a = 0; a < g.rank(); ++a) {
      for (std::size_t p = 0; p < g.size(); ++p) {
        analytic += grad.comp[a][p] * h.comp[a][p];
        plus.comp[a][p] += opts.epsilon * h.comp[a][p];
        minus.comp[a][p] -= opts.epsilon * h.comp[a][p];
      }
    }
    analytic *= dv;
    const double fd =
        (objective(plus, i0, i1, cfg, true) - objective(minus, i0, i1, cfg, true)) / (2.0 * opts.epsilon);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-300});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
  }
  return worst;
}

}  // namespace tbm
