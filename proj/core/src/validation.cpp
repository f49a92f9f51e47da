#include "tbm/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <sstream>

#include "tbm/error.hpp"
#include "tbm/lot.hpp"
#include "tbm/phantoms.hpp"
#include "tbm/solver.hpp"
#include "tbm/stats.hpp"

namespace tbm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Settings for comparisons against closed-form and LP costs: a stiff mass
// penalty so the penalized optimum sits on the constrained one.
SolverConfig oracle_config() {
  SolverConfig cfg;
  cfg.lambda = 1e4;
  cfg.gamma = 6.5e6;
  cfg.mse_termination = 1e-5;
  return cfg;
}

double relative_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::vector<LotEmbedding> embed_cohort(const Template& t, const PhantomCohort& c,
                                       const SolverConfig& cfg, int& unconverged) {
  std::vector<LotEmbedding> out;
  out.reserve(c.volumes.size());
  unconverged = 0;
  for (const auto& v : c.volumes) {
    Analysis a = analyze(t, v, cfg);
    if (!a.solve.converged) ++unconverged;
    out.push_back(std::move(a.embedding));
  }
  return out;
}

CriterionResult gradient_row(const ValidationOptions& opts) {
  const GridSpec g = GridSpec::make3d(8, 8, 8);
  const SolverConfig cfg;
  constexpr int kInstances = 20;
  const auto t0 = Clock::now();
  double worst = 0.0;
  const VectorField id = VectorField::identity(g);
  for (int k = 0; k < kInstances; ++k) {
    const std::uint64_t s = opts.seed + 4 * static_cast<std::uint64_t>(k);
    auto density = [&](std::uint64_t seed) {
      const VectorField r = random_smooth_field(g, seed, 1.0);
      std::vector<double> v(g.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * r.comp[0][i];
      return normalize_density(DensityVolume(g, std::move(v)));
    };
    const DensityVolume i0 = density(s);
    const DensityVolume i1 = density(s + 1);
    // Contract about the center so the perturbed map stays inside the hull.
    const VectorField u = random_smooth_field(g, s + 2, 0.4);
    VectorField f(g);
    for (int a = 0; a < 3; ++a) {
      const double c = 0.5 * static_cast<double>(g.dim(a)) * g.spacing(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        f.comp[a][i] = c + 0.85 * (id.comp[a][i] - c) + u.comp[a][i];
      }
    }
    FdCheckOptions fd;
    fd.trials = 1;
    fd.seed = s + 3;
    worst = std::max(worst, fd_objective_check(f, i0, i1, cfg, fd, opts.gradient));
  }
  const double elapsed = seconds_since(t0);
  CriterionResult r;
  r.passed = worst <= 1e-3 && elapsed <= 60.0;
  r.measured = fmt("max relative error %.3g over %d instances (limit 1e-3)", worst, kInstances);
  return r;
}

CriterionResult termination_row(const ValidationOptions& opts) {
  const GridSpec g = GridSpec::make2d(128, 128);
  const SolverConfig cfg;
  double worst_mse = 0.0;
  double worst_curl = 0.0;
  double slowest = 0.0;
  int failed = 0;
  for (int k = 0; k < 10; ++k) {
    const auto [p, q] = random_smooth_pair(g, opts.seed + static_cast<std::uint64_t>(k));
    const auto t0 = Clock::now();
    const SolveResult res = solve(p, q, cfg);
    slowest = std::max(slowest, seconds_since(t0));
    worst_mse = std::max(worst_mse, res.final_metrics.rel_mse);
    worst_curl = std::max(worst_curl, res.final_metrics.mean_curl);
    if (!res.converged) ++failed;
  }
  CriterionResult r;
  r.passed = failed == 0 && worst_mse <= 0.0055 && worst_curl <= 1e-3 && slowest <= 60.0;
  r.measured = fmt("worst rel MSE %.3g, worst mean curl %.3g, unconverged %d/10", worst_mse,
                   worst_curl, failed);
  return r;
}

CriterionResult lp_row(const ValidationOptions& opts) {
  const GridSpec g = GridSpec::make2d(16, 16);
  SolverConfig cfg;
  cfg.gamma = 4.2e6;
  cfg.scales = 2;
  cfg.mse_termination = 1e-5;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  double raw_lo = std::numeric_limits<double>::infinity();
  double raw_hi = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto [p, q] = displaced_blob_pair(g, opts.seed + static_cast<std::uint64_t>(k));
    const SolveResult res = solve(p, q, cfg);
    const double lp = kantorovich_lp(p, q);
    const double plan = induced_plan_cost(res.map, p) / lp;
    const double raw = res.final_metrics.transport_cost / lp;
    lo = std::min(lo, plan);
    hi = std::max(hi, plan);
    raw_lo = std::min(raw_lo, raw);
    raw_hi = std::max(raw_hi, raw);
  }
  CriterionResult r;
  r.passed = lo >= 1.0 && hi <= 1.05;
  r.measured = fmt("induced plan / LP in [%.4f, %.4f] (need [1, 1.05]); map cost / LP in [%.4f, %.4f]",
                   lo, hi, raw_lo, raw_hi);
  return r;
}

CriterionResult separable_row(const ValidationOptions&) {
  constexpr std::size_t n = 128;
  const GridSpec g = GridSpec::make2d(n, n);
  const SolverConfig cfg = oracle_config();
  const double len = static_cast<double>(n);
  const std::vector<double> flat = windowed_profile(n, 0.0, 1.0, 0.0, 1.0, 4.0);

  // 1D-embedded: the same profile pair in every column of axis 0.
  const DensityVolume p1 =
      separable_density(g, windowed_profile(n, 0.425 * len, 0.10 * len, 1.0, 0.25, 4.0), flat);
  const DensityVolume q1 =
      separable_density(g, windowed_profile(n, 0.575 * len, 0.12 * len, 0.8, 0.25, 4.0), flat);
  double oracle1 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = p1[i * n + j];
      b[i] = q1[i * n + j];
    }
    const double ma = stable_sum(a);
    const double mb = stable_sum(b);
    for (double& v : b) v *= ma / mb;
    oracle1 += omt_1d(a, b, g.spacing(0)).cost * g.spacing(1);
  }
  const double ratio1 = solve(p1, q1, cfg).final_metrics.transport_cost / oracle1;

  // Separable product: the cost splits into the two marginal problems.
  const DensityVolume p2 =
      separable_density(g, windowed_profile(n, 0.42 * len, 0.10 * len, 1.0, 0.25, 4.0),
                        windowed_profile(n, 0.55 * len, 0.12 * len, 1.0, 0.25, 4.0));
  const DensityVolume q2 =
      separable_density(g, windowed_profile(n, 0.55 * len, 0.12 * len, 0.8, 0.25, 4.0),
                        windowed_profile(n, 0.45 * len, 0.09 * len, 1.2, 0.25, 4.0));
  std::vector<double> px(n, 0.0), py(n, 0.0), qx(n, 0.0), qy(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      px[i] += p2[i * n + j] * g.spacing(1);
      qx[i] += q2[i * n + j] * g.spacing(1);
      py[j] += p2[i * n + j] * g.spacing(0);
      qy[j] += q2[i * n + j] * g.spacing(0);
    }
  }
  const double oracle2 = omt_1d(px, qx, g.spacing(0)).cost + omt_1d(py, qy, g.spacing(1)).cost;
  const double ratio2 = solve(p2, q2, cfg).final_metrics.transport_cost / oracle2;

  CriterionResult r;
  r.passed = std::abs(ratio1 - 1.0) <= 0.01 && std::abs(ratio2 - 1.0) <= 0.02;
  r.measured = fmt("1D-embedded cost / oracle %.4f (within 1%%), separable cost / oracle %.4f (within 2%%)",
                   ratio1, ratio2);
  return r;
}

CriterionResult translation_row(const ValidationOptions&) {
  const GridSpec g = GridSpec::make2d(64, 64);
  constexpr double kShift = 3.0;
  Blob a;
  a.center = {32.0 - 0.5 * kShift, 32.0, 0.0};
  a.sigma = {6.0, 6.0, 6.0};
  Blob b = a;
  b.center[0] += kShift;
  const DensityVolume p = normalize_density(DensityVolume(blob_field(g, {a})));
  const DensityVolume q = normalize_density(DensityVolume(blob_field(g, {b})));
  const SolveResult res = solve(p, q, SolverConfig{});

  const VectorField id = VectorField::identity(g);
  const double cutoff = 0.01 * p.max();
  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] <= cutoff) continue;
    const double dx = res.map.comp[0][i] - id.comp[0][i] - kShift;
    const double dy = res.map.comp[1][i] - id.comp[1][i];
    err += std::sqrt(dx * dx + dy * dy);
    ++count;
  }
  err /= static_cast<double>(count);
  const double ratio = res.final_metrics.transport_cost / (kShift * kShift * p.mass());
  CriterionResult r;
  r.passed = err <= 0.1 && std::abs(ratio - 1.0) <= 0.05;
  r.measured = fmt("mean displacement error %.4f voxel (limit 0.1), cost / (|t|^2 mass) %.4f", err,
                   ratio);
  return r;
}

CriterionResult round_trip_row(const ValidationOptions& opts) {
  PhantomSpec spec;
  spec.family = PhantomFamily::Aging;
  spec.count = 5;
  spec.seed = opts.seed;
  const PhantomCohort c = make_phantom_cohort(spec);
  const Template t = build_template(c.volumes, c.ids);
  double worst = 0.0;
  for (const auto& v : c.volumes) {
    const Analysis a = analyze(t, v, SolverConfig{});
    const DensityVolume back = synthesize(t, a.embedding);
    worst = std::max(worst, relative_l2(back.values(), v.values()));
  }
  CriterionResult r;
  r.passed = worst <= 0.01;
  r.measured = fmt("worst relative L2 round-trip error %.4g over 5 phantoms (limit 0.01)", worst);
  return r;
}

// Low-intensity pixels near the center: the cavity of an aging phantom.
struct Cavity {
  int area = 0;
  double offset = 0.0;  // centroid distance from the grid center, voxels
};

Cavity measure_cavity(const DensityVolume& im) {
  const GridSpec& g = im.grid();
  const double cx = 0.5 * static_cast<double>(g.dim(0));
  const double cy = 0.5 * static_cast<double>(g.dim(1));
  const double radius = 0.3 * static_cast<double>(std::min(g.dim(0), g.dim(1)));
  const double threshold = 0.5 * im.max();
  Cavity c;
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < g.dim(0); ++i) {
    for (std::size_t j = 0; j < g.dim(1); ++j) {
      const double x = static_cast<double>(i) + 0.5;
      const double y = static_cast<double>(j) + 0.5;
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
      if (im[i * g.dim(1) + j] >= threshold) continue;
      ++c.area;
      sx += x;
      sy += y;
    }
  }
  if (c.area > 0) c.offset = std::hypot(sx / c.area - cx, sy / c.area - cy);
  return c;
}

CriterionResult regression_row(const ValidationOptions& opts) {
  PhantomSpec spec;
  spec.family = PhantomFamily::Aging;
  spec.count = 40;
  spec.seed = opts.seed;
  const PhantomCohort c = make_phantom_cohort(spec);
  const Template t = build_template(c.volumes, c.ids);
  int unconverged = 0;
  const auto e = embed_cohort(t, c, SolverConfig{}, unconverged);
  const Cohort cohort = Cohort::from_embeddings(e, c.ids, c.covariate);
  const DirectionResult d = correlation_test(cohort, 1000, opts.seed);

  const double mean_score = d.scores.mean();
  const double sd = std::sqrt((d.scores.array() - mean_score).square().mean());
  const std::vector<double> nus{-1.0, -0.5, 0.0, 0.5, 1.0};
  const GridSpec& g = t.density.grid();
  const auto series = sample_direction(t, to_embedding(g, cohort.X.rowwise().mean()),
                                       to_embedding(g, d.direction * sd), nus);
  bool monotone = true;
  double worst_offset = 0.0;
  std::string areas;
  int previous = -1;
  for (const auto& im : series) {
    const Cavity cav = measure_cavity(im);
    monotone = monotone && cav.area > previous;
    previous = cav.area;
    worst_offset = std::max(worst_offset, cav.offset);
    areas += (areas.empty() ? "" : ",") + std::to_string(cav.area);
  }
  const double p = d.p_value.value_or(1.0);
  CriterionResult r;
  r.passed = d.statistic >= 0.95 && p <= 0.001 + 1.0 / 1001.0 && monotone && worst_offset <= 1.0;
  r.measured = fmt("r %.4f, p %.4g (T=1000), cavity area over nu in [-1,1] sd: %s, max centroid offset %.3g voxel",
                   d.statistic, p, areas.c_str(), worst_offset);
  return r;
}

CriterionResult plda_row(const ValidationOptions& opts) {
  PhantomSpec spec;
  spec.family = PhantomFamily::TwoClass;
  spec.count = 20;
  spec.seed = opts.seed;
  const PhantomCohort c = make_phantom_cohort(spec);
  const Template t = build_template(c.volumes, c.ids);
  int unconverged = 0;
  const auto e = embed_cohort(t, c, SolverConfig{}, unconverged);
  const Cohort cohort = Cohort::from_embeddings(e, c.ids, c.covariate, c.labels);
  const double alpha = 0.1 * pca(cohort).total_variance;
  const DirectionResult d = plda_test(cohort, alpha, 1000, opts.seed);

  double max0 = -std::numeric_limits<double>::infinity();
  double min1 = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < cohort.size(); ++k) {
    if (cohort.labels[static_cast<std::size_t>(k)] == 0) {
      max0 = std::max(max0, d.scores(k));
    } else {
      min1 = std::min(min1, d.scores(k));
    }
  }
  const double p = d.p_value.value_or(1.0);
  CriterionResult r;
  r.passed = min1 > max0 && p <= 0.01;
  r.measured = fmt("class gap %.4g (min class 1 minus max class 0), Fisher ratio %.4g, p %.4g",
                   min1 - max0, d.statistic, p);
  return r;
}

CriterionResult compaction_row(const ValidationOptions& opts) {
  PhantomSpec spec;
  spec.family = PhantomFamily::Translation;
  spec.count = 10;
  spec.seed = opts.seed;
  spec.bump_sigma = 5.0;
  spec.shift_step = 2.0;
  const PhantomCohort c = make_phantom_cohort(spec);
  const Template t = build_template(c.volumes, c.ids);
  int unconverged = 0;
  const auto e = embed_cohort(t, c, SolverConfig{}, unconverged);
  const double transport_share = pca(Cohort::from_embeddings(e)).explained_fraction(0);

  Cohort image;
  image.X.resize(static_cast<Eigen::Index>(c.volumes.front().size()),
                 static_cast<Eigen::Index>(c.volumes.size()));
  for (std::size_t k = 0; k < c.volumes.size(); ++k) {
    const auto v = c.volumes[k].values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      image.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i];
    }
  }
  const double image_share = pca(image).explained_fraction(0);
  CriterionResult r;
  r.passed = transport_share >= 0.99 && image_share <= 0.80;
  r.measured = fmt("PC1 share: transport %.4f (need >= 0.99), image %.4f (need <= 0.80)",
                   transport_share, image_share);
  return r;
}

CriterionResult smoke3d_row(const ValidationOptions& opts) {
  const GridSpec g = GridSpec::make3d(32, 32, 32);
  const auto [p, q] = random_smooth_pair(g, opts.seed);
  const auto t0 = Clock::now();
  const SolveResult res = solve(p, q, SolverConfig{});
  const double elapsed = seconds_since(t0);
  CriterionResult r;
  r.passed = res.converged && res.final_metrics.rel_mse <= 0.0055 &&
             res.final_metrics.min_det > 0.0 && elapsed <= 600.0;
  r.measured = fmt("rel MSE %.3g, min det %.4g, converged %s", res.final_metrics.rel_mse,
                   res.final_metrics.min_det, res.converged ? "yes" : "no");
  return r;
}

}  // namespace

std::string criterion_name(int id) {
  static const char* const names[kCriterionCount] = {
      "gradient consistency",  "2D termination target",  "optimality vs LP",
      "1D/separable oracle",   "translation recovery",   "LOT round trip",
      "regression pipeline",   "PLDA pipeline",          "PCA compaction",
      "3D smoke",              "determinism",
  };
  if (id < 1 || id > kCriterionCount) throw Error(ErrorKind::InvalidArgument, "no criterion " + std::to_string(id));
  return names[id - 1];
}

CriterionResult run_criterion(int id, const ValidationOptions& opts) {
  using Row = CriterionResult (*)(const ValidationOptions&);
  static const Row rows[] = {gradient_row,    termination_row, lp_row,       separable_row,
                             translation_row, round_trip_row,  regression_row, plda_row,
                             compaction_row,  smoke3d_row};
  if (id < 1 || id >= kCriterionCount) {
    throw Error(ErrorKind::InvalidArgument, "run_criterion: id must be in 1..10");
  }
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    r = rows[id - 1](opts);
  } catch (const std::exception& ex) {
    r.passed = false;
    r.measured = std::string("error: ") + ex.what();
  }
  r.id = id;
  r.name = criterion_name(id);
  if (opts.timings) *opts.timings << "criterion " << id << ": " << fmt("%.1f", seconds_since(t0)) << " s\n";
  return r;
}

bool ValidationReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const CriterionResult& r) { return r.passed; });
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  int passed_count = 0;
  for (const auto& r : rows) {
    out << (r.passed ? "PASS" : "FAIL") << fmt("  %2d  %-22s  ", r.id, r.name.c_str()) << r.measured << '\n';
    passed_count += r.passed ? 1 : 0;
  }
  out << passed_count << '/' << rows.size() << " criteria passed\n";
  return out.str();
}

ValidationReport run_validation(const ValidationOptions& opts) {
  std::vector<int> ids = opts.criteria;
  if (ids.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) criterion_name(id);

  std::vector<int> body;
  for (int id : ids) {
    if (id != kCriterionCount) body.push_back(id);
  }
  const bool determinism = ids.back() == kCriterionCount;

  auto run_body = [&](const std::vector<int>& which) {
    ValidationReport rep;
    for (int id : which) rep.rows.push_back(run_criterion(id, opts));
    return rep;
  };

  ValidationReport report = run_body(body);
  if (determinism) {
    const std::vector<int> rerun_ids = body.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10} : body;
    const auto t0 = Clock::now();
    const ValidationReport first = body.empty() ? run_body(rerun_ids) : report;
    const ValidationReport second = run_body(rerun_ids);
    const bool same = first.to_text() == second.to_text();
    CriterionResult r;
    r.id = kCriterionCount;
    r.name = criterion_name(kCriterionCount);
    r.passed = same;
    r.measured = fmt("%zu rows rerun with seed %llu: reports %s", rerun_ids.size(),
                     static_cast<unsigned long long>(opts.seed), same ? "byte-identical" : "differ");
    report.rows.push_back(r);
    if (opts.timings) *opts.timings << "criterion 11: " << fmt("%.1f", seconds_since(t0)) << " s\n";
  }
  return report;
}

}  // namespace tbm
