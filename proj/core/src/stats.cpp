#include "tbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "tbm/error.hpp"

namespace tbm {

Cohort Cohort::from_embeddings(std::span<const LotEmbedding> embeddings,
                               std::vector<std::string> ids, std::vector<double> covariate,
                               std::vector<int> labels) {
  if (embeddings.empty()) throw Error(ErrorKind::EmptyCohort, "cohort has no subjects");
  const auto d = static_cast<Eigen::Index>(embeddings.front().dimension());
  const auto k = static_cast<Eigen::Index>(embeddings.size());
  Cohort c;
  c.X.resize(d, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& e = embeddings[static_cast<std::size_t>(j)];
    require_same_grid(e.grid, embeddings.front().grid, "cohort embeddings");
    c.X.col(j) = Eigen::Map<const Eigen::VectorXd>(e.payload.data(), d);
  }
  if (ids.empty()) {
    for (Eigen::Index j = 0; j < k; ++j) ids.push_back("sub" + std::to_string(j));
  }
  auto check = [k](std::size_t n, const char* what) {
    if (n != 0 && n != static_cast<std::size_t>(k)) {
      throw Error(ErrorKind::InvalidArgument, std::string(what) + " length differs from cohort size");
    }
  };
  check(ids.size(), "ids");
  check(covariate.size(), "covariate");
  check(labels.size(), "labels");
  for (double v : covariate) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "covariate is not finite");
  }
  c.ids = std::move(ids);
  c.covariate = std::move(covariate);
  c.labels = std::move(labels);
  return c;
}

Eigen::VectorXd Reduction::project(const Eigen::VectorXd& x) const {
  return basis.transpose() * (x - mean);
}

Eigen::VectorXd Reduction::lift(const Eigen::VectorXd& z) const { return mean + basis * z; }

Reduction reduce(const Cohort& cohort, Eigen::Index r) {
  const Eigen::Index k = cohort.size();
  if (k < 2) throw Error(ErrorKind::EmptyCohort, "analysis needs at least two subjects");
  if (r == 0) r = k - 1;
  if (r < 0 || r > k - 1) {
    throw Error(ErrorKind::RankTooLarge,
                "rank " + std::to_string(r) + " outside [1, " + std::to_string(k - 1) + "]");
  }
  Reduction red;
  red.mean = cohort.X.rowwise().mean();
  const Eigen::MatrixXd xc = cohort.X.colwise() - red.mean;
  const Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lam = eig.eigenvalues();  // ascending
  const double top = std::max(lam(k - 1), 0.0);
  const double tol = 1e-10 * top;
  Eigen::Index keep = 0;
  while (keep < r && lam(k - 1 - keep) > tol && top > 0.0) ++keep;

  red.basis.resize(cohort.dimension(), keep);
  red.variances.resize(keep);
  red.scores.resize(keep, k);
  for (Eigen::Index j = 0; j < keep; ++j) {
    const double l = lam(k - 1 - j);
    const Eigen::VectorXd v = eig.eigenvectors().col(k - 1 - j);
    const double s = std::sqrt(l);
    red.basis.col(j) = xc * v / s;
    red.variances(j) = l / static_cast<double>(k);
    red.scores.row(j) = s * v.transpose();
  }
  return red;
}

double PcaModel::explained_fraction(Eigen::Index k) const {
  if (!(total_variance > 0.0) || k < 0 || k >= variances.size()) return 0.0;
  return variances(k) / total_variance;
}

PcaModel pca(const Cohort& cohort, Eigen::Index r) {
  const Reduction red = reduce(cohort, r);
  PcaModel m;
  m.mean = red.mean;
  m.components = red.basis;
  m.variances = red.variances;
  const Eigen::MatrixXd xc = cohort.X.colwise() - red.mean;
  m.total_variance = xc.squaredNorm() / static_cast<double>(cohort.size());
  return m;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "pearson needs two equal-length samples");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

Eigen::VectorXd centered(std::span<const double> v) {
  Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  out.array() -= out.mean();
  return out;
}

struct ReducedDirection {
  Eigen::VectorXd w;  // unit, reduced coordinates
  Eigen::VectorXd scores;
  double statistic = 0.0;
};

ReducedDirection correlation_reduced(const Reduction& red, std::span<const double> v) {
  const Eigen::VectorXd vc = centered(v);
  if (!(vc.squaredNorm() > 0.0)) throw Error(ErrorKind::ConstantCovariate, "covariate is constant");
  ReducedDirection out;
  Eigen::VectorXd w = red.scores * vc;
  const double norm = w.norm();
  if (!(norm > 0.0)) {
    out.w = Eigen::VectorXd::Zero(red.rank());
    out.scores = Eigen::VectorXd::Zero(red.scores.cols());
    return out;
  }
  out.w = w / norm;
  out.scores = red.scores.transpose() * out.w;
  out.statistic = pearson(std::span<const double>(out.scores.data(), static_cast<std::size_t>(out.scores.size())), v);
  return out;
}

std::vector<int> sorted_classes(std::span<const int> labels) {
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

double fisher_ratio(const Eigen::VectorXd& scores, std::span<const int> labels, int c0, int c1) {
  double s[2] = {0.0, 0.0}, ss[2] = {0.0, 0.0}, n[2] = {0.0, 0.0};
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const int which = labels[k] == c0 ? 0 : labels[k] == c1 ? 1 : -1;
    if (which < 0) continue;
    const double x = scores(static_cast<Eigen::Index>(k));
    s[which] += x;
    ss[which] += x * x;
    n[which] += 1.0;
  }
  const double m0 = s[0] / n[0], m1 = s[1] / n[1];
  const double v0 = std::max(ss[0] / n[0] - m0 * m0, 0.0);
  const double v1 = std::max(ss[1] / n[1] - m1 * m1, 0.0);
  const double gap = (m1 - m0) * (m1 - m0);
  const double spread = v0 + v1;
  if (!(spread > 0.0)) return gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return gap / spread;
}

ReducedDirection plda_reduced(const Reduction& red, std::span<const int> labels, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "alpha must be finite and >= 0");
  }
  const Eigen::Index r = red.rank();
  const Eigen::Index k = red.scores.cols();
  if (static_cast<Eigen::Index>(labels.size()) != k) {
    throw Error(ErrorKind::DegenerateLabels, "labels missing or of the wrong length");
  }
  const std::vector<int> classes = sorted_classes(labels);
  if (classes.size() < 2) throw Error(ErrorKind::DegenerateLabels, "need at least two classes");
  if (r == 0) throw Error(ErrorKind::DegenerateLabels, "cohort has no variance");

  const Eigen::MatrixXd& z = red.scores;
  const Eigen::MatrixXd st = z * z.transpose() / static_cast<double>(k);
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(r, r);
  for (int c : classes) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(r);
    double count = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (labels[static_cast<std::size_t>(j)] == c) {
        mu += z.col(j);
        count += 1.0;
      }
    }
    mu /= count;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (labels[static_cast<std::size_t>(j)] == c) {
        const Eigen::VectorXd dz = z.col(j) - mu;
        sw += dz * dz.transpose();
      }
    }
  }
  sw /= static_cast<double>(k);

  Eigen::MatrixXd penalty = sw;
  penalty.diagonal().array() += alpha;
  const Eigen::LLT<Eigen::MatrixXd> llt(penalty);
  const double scale = std::max(st.trace(), std::numeric_limits<double>::min());
  if (llt.info() != Eigen::Success ||
      llt.matrixLLT().diagonal().cwiseAbs().minCoeff() <= 1e-7 * std::sqrt(scale)) {
    throw Error(ErrorKind::SingularPenalty, "S_W + alpha I is singular; increase alpha");
  }
  // Whitened problem L^-1 S_T L^-T y = mu y, w = L^-T y.
  const Eigen::MatrixXd linv_st = llt.matrixL().solve(st);
  const Eigen::MatrixXd whitened = llt.matrixL().solve(linv_st.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (whitened + whitened.transpose()));
  const Eigen::VectorXd y = eig.eigenvectors().col(r - 1);
  Eigen::VectorXd w = llt.matrixU().solve(y);
  w.normalize();

  ReducedDirection out;
  out.scores = z.transpose() * w;
  double diff = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const int l = labels[static_cast<std::size_t>(j)];
    if (l == classes[1]) diff += out.scores(j);
    if (l == classes[0]) diff -= out.scores(j);
  }
  if (diff < 0.0) {
    w = -w;
    out.scores = -out.scores;
  }
  out.w = w;
  out.statistic = fisher_ratio(out.scores, labels, classes[0], classes[1]);
  return out;
}

DirectionResult lift_direction(const Reduction& red, const ReducedDirection& rd) {
  DirectionResult out;
  out.direction = red.basis * rd.w;
  const double n = out.direction.norm();
  if (n > 0.0) out.direction /= n;
  out.scores = rd.scores;
  out.statistic = rd.statistic;
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

DirectionResult correlation_direction(const Cohort& cohort, Eigen::Index r) {
  if (cohort.covariate.size() != static_cast<std::size_t>(cohort.size())) {
    throw Error(ErrorKind::ConfigError, "cohort has no covariate");
  }
  const Reduction red = reduce(cohort, r);
  return lift_direction(red, correlation_reduced(red, cohort.covariate));
}

PermutationResult permutation_test(std::size_t subjects, const PermutationStatistic& statistic,
                                   int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorKind::InvalidArgument, "permutation test needs T >= 1");
  std::vector<std::size_t> order(subjects);
  std::iota(order.begin(), order.end(), std::size_t{0});
  PermutationResult out;
  out.trials = trials;
  out.observed = statistic(order);
  for (int t = 0; t < trials; ++t) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(t))));
    // Fisher-Yates with explicit modulo draws keeps permutations identical
    // across standard library implementations.
    for (std::size_t i = subjects; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    if (statistic(order) >= out.observed) ++out.exceed;
  }
  out.p_value = (1.0 + out.exceed) / (trials + 1.0);
  return out;
}

DirectionResult correlation_test(const Cohort& cohort, int trials, std::uint64_t seed,
                                 Eigen::Index r) {
  if (cohort.covariate.size() != static_cast<std::size_t>(cohort.size())) {
    throw Error(ErrorKind::ConfigError, "cohort has no covariate");
  }
  const Reduction red = reduce(cohort, r);
  DirectionResult out = lift_direction(red, correlation_reduced(red, cohort.covariate));
  std::vector<double> permuted(cohort.covariate.size());
  const auto stat = [&](std::span<const std::size_t> order) {
    for (std::size_t k = 0; k < order.size(); ++k) permuted[k] = cohort.covariate[order[k]];
    return correlation_reduced(red, permuted).statistic;
  };
  out.p_value = permutation_test(cohort.covariate.size(), stat, trials, seed).p_value;
  return out;
}

DirectionResult plda(const Cohort& cohort, double alpha, Eigen::Index r) {
  const Reduction red = reduce(cohort, r);
  return lift_direction(red, plda_reduced(red, cohort.labels, alpha));
}

DirectionResult plda_test(const Cohort& cohort, double alpha, int trials, std::uint64_t seed,
                          Eigen::Index r) {
  const Reduction red = reduce(cohort, r);
  DirectionResult out = lift_direction(red, plda_reduced(red, cohort.labels, alpha));
  std::vector<int> permuted(cohort.labels.size());
  const auto stat = [&](std::span<const std::size_t> order) {
    for (std::size_t k = 0; k < order.size(); ++k) permuted[k] = cohort.labels[order[k]];
    return plda_reduced(red, permuted, alpha).statistic;
  };
  out.p_value = permutation_test(cohort.labels.size(), stat, trials, seed).p_value;
  return out;
}

double principal_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return 0.5 * std::numbers::pi;
  const Eigen::VectorXd ua = a / na, ub = b / nb;
  const double dot = ua.dot(ub);
  // atan2 of the orthogonal residual keeps precision for tiny angles.
  return std::atan2((ub - dot * ua).norm(), std::abs(dot));
}

std::vector<AlphaScanRow> alpha_stability_scan(const Cohort& cohort,
                                               std::span<const double> alphas, Eigen::Index r) {
  if (alphas.size() < 2) throw Error(ErrorKind::InvalidArgument, "alpha scan needs two or more alphas");
  const Reduction red = reduce(cohort, r);
  std::vector<AlphaScanRow> rows;
  std::optional<Eigen::VectorXd> previous;
  for (double alpha : alphas) {
    AlphaScanRow row;
    row.alpha = alpha;
    try {
      const ReducedDirection rd = plda_reduced(red, cohort.labels, alpha);
      if (previous) row.angle_to_previous = principal_angle(*previous, rd.w);
      previous = rd.w;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularPenalty) throw;
      row.ok = false;
      row.note = "singular within-class scatter; skipped";
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CovariateTable read_covariates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ConfigError, "empty covariate file " + path.string());
  const auto header = split_csv_line(line);
  const bool has_label = header.size() == 3 && header[2] == "label";
  if (header.size() < 2 || header[0] != "subject_id" || header[1] != "value" ||
      (header.size() == 3 && !has_label) || header.size() > 3) {
    throw Error(ErrorKind::ConfigError, "covariate header must be subject_id,value[,label]");
  }
  CovariateTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::ConfigError, path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(f[1], &used);
      if (used != f[1].size() || !std::isfinite(v)) throw std::invalid_argument("value");
      t.ids.push_back(f[0]);
      t.values.push_back(v);
      if (has_label) {
        const int l = std::stoi(f[2], &used);
        if (used != f[2].size()) throw std::invalid_argument("label");
        t.labels.push_back(l);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ConfigError, path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return t;
}

void write_covariates(const CovariateTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  const bool labels = !table.labels.empty();
  out << (labels ? "subject_id,value,label\n" : "subject_id,value\n");
  char buf[64];
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", table.values[i]);
    out << table.ids[i] << ',' << buf;
    if (labels) out << ',' << table.labels[i];
    out << '\n';
  }
}

LotEmbedding to_embedding(const GridSpec& grid, const Eigen::VectorXd& v) {
  return LotEmbedding(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace tbm
