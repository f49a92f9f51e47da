#include "tbm/lot.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tbm/error.hpp"
#include "tbm/volume_io.hpp"

namespace tbm {

Template build_template(std::span<const DensityVolume> subjects, std::vector<std::string> ids) {
  if (subjects.empty()) throw Error(ErrorKind::EmptyCohort, "template needs at least one subject");
  const GridSpec& g = subjects.front().grid();
  std::vector<double> acc(g.size(), 0.0);
  for (const auto& s : subjects) {
    require_same_grid(s.grid(), g, "build_template");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
  }
  const double inv = 1.0 / static_cast<double>(subjects.size());
  for (double& v : acc) v *= inv;
  // Averaging already-normalized densities keeps positivity; only rescale.
  return Template{normalize_density(DensityVolume(g, std::move(acc)), kDefaultTargetMass, 0.0),
                  std::move(ids)};
}

LotEmbedding::LotEmbedding(const GridSpec& g)
    : grid(g), payload(g.size() * static_cast<std::size_t>(g.rank()), 0.0) {}

LotEmbedding::LotEmbedding(const GridSpec& g, std::vector<double> values)
    : grid(g), payload(std::move(values)) {
  if (payload.size() != g.size() * static_cast<std::size_t>(g.rank())) {
    throw Error(ErrorKind::InvalidArgument, "embedding payload length does not match its grid");
  }
}

double LotEmbedding::squared_norm() const {
  double s = 0.0;
  for (double v : payload) s += v * v;
  return s * grid.voxel_volume();
}

LotEmbedding& LotEmbedding::operator+=(const LotEmbedding& other) {
  require_same_grid(grid, other.grid, "embedding sum");
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] += other.payload[i];
  return *this;
}

LotEmbedding& LotEmbedding::operator*=(double s) {
  for (double& v : payload) v *= s;
  return *this;
}

LotEmbedding operator+(LotEmbedding a, const LotEmbedding& b) { return a += b; }
LotEmbedding operator-(LotEmbedding a, const LotEmbedding& b) { return a += -1.0 * b; }
LotEmbedding operator*(double s, LotEmbedding a) { return a *= s; }

LotEmbedding embed_map(const VectorField& f, const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "embed_map");
  const GridSpec& g = f.grid;
  const VectorField id = VectorField::identity(g);
  LotEmbedding e(g);
  const std::size_t n = g.size();
  for (int a = 0; a < g.rank(); ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      e.payload[a * n + i] = (f.comp[a][i] - id.comp[a][i]) * std::sqrt(i0[i]);
    }
  }
  return e;
}

VectorField map_from_embedding(const DensityVolume& i0, const LotEmbedding& e) {
  require_same_grid(e.grid, i0.grid(), "map_from_embedding");
  const GridSpec& g = e.grid;
  VectorField f = VectorField::identity(g);
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(i0[i] > 0.0)) continue;
    const double inv = 1.0 / std::sqrt(i0[i]);
    for (int a = 0; a < g.rank(); ++a) f.comp[a][i] += e.payload[a * n + i] * inv;
  }
  return f;
}

Analysis analyze(const Template& t, const DensityVolume& subject, const SolverConfig& cfg) {
  Analysis out;
  out.solve = solve(t.density, subject, cfg);
  out.embedding = embed_map(out.solve.map, t.density);
  return out;
}

DensityVolume splat_pushforward(const VectorField& f, const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "splat_pushforward");
  const GridSpec& g = f.grid;
  const int rank = g.rank();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t p = 0; p < g.size(); ++p) {
    std::array<std::size_t, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < rank; ++a) {
      const double hi = static_cast<double>(g.dim(a) - 1);
      const double u = std::clamp(f.comp[a][p] / g.spacing(a) - 0.5, 0.0, hi);
      const auto b = std::min(static_cast<std::size_t>(u), g.dim(a) - 2);
      base[a] = b;
      frac[a] = u - static_cast<double>(b);
    }
    for (int corner = 0; corner < (1 << rank); ++corner) {
      double w = i0[p];
      std::size_t q = 0;
      for (int a = 0; a < rank; ++a) {
        const bool up = (corner >> a) & 1;
        w *= up ? frac[a] : 1.0 - frac[a];
        q += (base[a] + (up ? 1 : 0)) * g.stride(a);
      }
      out[q] += w;
    }
  }
  // Splat weights sum to one, so the deposit already has i0's mass; the
  // renormalization only removes summation round-off.
  return normalize_density(DensityVolume(g, std::move(out)), i0.mass(), 0.0);
}

namespace {

// Solves J dx = r for the 2x2 or 3x3 matrix J stored row-major in m.
std::array<double, 3> solve_small(int rank, const std::array<double, 9>& m,
                                  const std::array<double, 3>& r, double& det) {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  if (rank == 2) {
    det = m[0] * m[4] - m[1] * m[3];
    x[0] = (m[4] * r[0] - m[1] * r[1]) / det;
    x[1] = (m[0] * r[1] - m[3] * r[0]) / det;
    return x;
  }
  const double c00 = m[4] * m[8] - m[5] * m[7];
  const double c01 = m[5] * m[6] - m[3] * m[8];
  const double c02 = m[3] * m[7] - m[4] * m[6];
  det = m[0] * c00 + m[1] * c01 + m[2] * c02;
  const double a[9] = {c00, m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
                       c01, m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
                       c02, m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  for (int i = 0; i < 3; ++i) x[i] = (a[3 * i] * r[0] + a[3 * i + 1] * r[1] + a[3 * i + 2] * r[2]) / det;
  return x;
}

}  // namespace

DensityVolume inverse_pushforward(const VectorField& f, const DensityVolume& i0) {
  require_same_grid(f.grid, i0.grid(), "inverse_pushforward");
  const GridSpec& g = f.grid;
  const int rank = g.rank();
  const std::size_t n = g.size();
  const VectorField id = VectorField::identity(g);
  std::array<ScalarField, 3> disp;
  for (int a = 0; a < rank; ++a) {
    disp[a] = ScalarField(g);
    for (std::size_t i = 0; i < n; ++i) disp[a].values[i] = f.comp[a][i] - id.comp[a][i];
  }

  // Start from y - u(y) and iterate Newton on x + u(x) = y.
  VectorField x = id;
  for (int a = 0; a < rank; ++a) {
    for (std::size_t i = 0; i < n; ++i) x.comp[a][i] -= disp[a].values[i];
  }
  project_to_domain(x);

  const double h = g.min_spacing();
  std::array<ScalarField, 3> u;
  std::array<VectorField, 3> du;
  constexpr int kNewtonIters = 30;
  for (int it = 0; it <= kNewtonIters; ++it) {
    for (int a = 0; a < rank; ++a) u[a] = interp_with_gradient(disp[a], x, du[a]);
    if (it == kNewtonIters) break;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 9> m{};
      std::array<double, 3> r{};
      for (int a = 0; a < rank; ++a) {
        r[a] = id.comp[a][i] - x.comp[a][i] - u[a].values[i];
        for (int b = 0; b < rank; ++b) m[a * rank + b] = (a == b ? 1.0 : 0.0) + du[a].comp[b][i];
        worst = std::max(worst, std::abs(r[a]));
      }
      if (rank == 2) m = {m[0], m[1], 0.0, m[2], m[3], 0.0, 0.0, 0.0, 1.0};
      double d = 0.0;
      auto step = solve_small(rank, m, r, d);
      if (!(d > 0.0) || !std::isfinite(d)) step = r;
      double len = 0.0;
      for (int a = 0; a < rank; ++a) len = std::max(len, std::abs(step[a]));
      const double cap = 2.0 * h;
      const double scale = len > cap ? cap / len : 1.0;
      for (int a = 0; a < rank; ++a) x.comp[a][i] += scale * step[a];
    }
    project_to_domain(x);
    if (worst < 1e-10 * h) {
      for (int a = 0; a < rank; ++a) u[a] = interp_with_gradient(disp[a], x, du[a]);
      break;
    }
  }

  const ScalarField base = interp(i0.as_field(), x);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 9> m{};
    for (int a = 0; a < rank; ++a) {
      for (int b = 0; b < rank; ++b) m[a * 3 + b] = (a == b ? 1.0 : 0.0) + du[a].comp[b][i];
    }
    if (rank == 2) m[8] = 1.0;
    double d = 0.0;
    solve_small(3, m, {0.0, 0.0, 0.0}, d);
    out[i] = std::max(base.values[i], 0.0) / std::max(d, 1e-3);
  }
  return normalize_density(DensityVolume(g, std::move(out)), i0.mass(), 0.0);
}

DensityVolume synthesize(const Template& t, const LotEmbedding& e) {
  const VectorField f = map_from_embedding(t.density, e);
  const ScalarField det = determinant(jacobian(f));
  const double min_det = *std::min_element(det.values.begin(), det.values.end());
  if (!(min_det > 0.0)) {
    throw Error(ErrorKind::NonDiffeomorphicMap,
                "synthesized map folds (min det " + std::to_string(min_det) + ")");
  }
  return normalize_density(inverse_pushforward(f, t.density), kDefaultTargetMass, 0.0);
}

std::vector<DensityVolume> sample_direction(const Template& t, const LotEmbedding& mean,
                                            const LotEmbedding& direction,
                                            std::span<const double> nus) {
  std::vector<DensityVolume> out;
  out.reserve(nus.size());
  for (double nu : nus) out.push_back(synthesize(t, mean + nu * direction));
  return out;
}

void write_embedding(const LotEmbedding& e, const std::filesystem::path& path) {
  RawVolume raw;
  raw.header.grid = e.grid;
  raw.header.components = static_cast<std::uint32_t>(e.components());
  raw.payload = e.payload;
  write_raw_volume(path, raw);
}

LotEmbedding read_embedding(const std::filesystem::path& path) {
  RawVolume raw = read_raw_volume(path);
  if (raw.header.components != static_cast<std::uint32_t>(raw.header.grid.rank())) {
    throw Error(ErrorKind::UnsupportedEncoding, "file does not hold a vector payload: " + path.string());
  }
  return LotEmbedding(raw.header.grid, std::move(raw.payload));
}

}  // namespace tbm
