#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "tbm/error.hpp"
#include "tbm/stats.hpp"

using namespace tbm;
namespace fs = std::filesystem;

namespace {

Cohort random_cohort(Eigen::Index d, Eigen::Index k, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Cohort c;
  c.X.resize(d, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < d; ++i) c.X(i, j) = n01(rng) * (1.0 + static_cast<double>(i));
  for (Eigen::Index j = 0; j < k; ++j) c.ids.push_back("s" + std::to_string(j));
  return c;
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) { return x.colwise() - x.rowwise().mean(); }

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

}  // namespace

TEST_CASE("pca matches an eigendecomposition of the d x d covariance") {
  const Cohort c = random_cohort(6, 10, 1);
  const PcaModel m = pca(c);
  const Eigen::MatrixXd xc = centered(c.X);
  const Eigen::MatrixXd cov = xc * xc.transpose() / 10.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  REQUIRE(m.components.cols() == 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    CHECK(m.variances(j) == doctest::Approx(eig.eigenvalues()(5 - j)).epsilon(1e-9));
    CHECK(std::abs(m.components.col(j).dot(eig.eigenvectors().col(5 - j))) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(m.total_variance == doctest::Approx(cov.trace()));
  const Eigen::MatrixXd gram = m.components.transpose() * m.components;
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
  CHECK(m.explained_fraction(0) == doctest::Approx(eig.eigenvalues()(5) / cov.trace()));
}

TEST_CASE("reduce: scores reconstruct the centered data and rank is bounded") {
  const Cohort c = random_cohort(40, 8, 2);
  const Reduction red = reduce(c);
  CHECK(red.rank() == 7);
  CHECK((red.basis * red.scores - centered(c.X)).norm() < 1e-9 * c.X.norm());
  const Eigen::VectorXd x = c.X.col(3);
  CHECK((red.lift(red.project(x)) - x).norm() < 1e-9 * x.norm());
  CHECK(kind_of([&] { reduce(c, 8); }) == ErrorKind::RankTooLarge);
  Cohort one;
  one.X = Eigen::MatrixXd::Ones(3, 1);
  CHECK(kind_of([&] { reduce(one); }) == ErrorKind::EmptyCohort);
}

TEST_CASE("pearson against hand values") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 4, 6, 8};
  const std::vector<double> c{4, 3, 2, 1};
  const std::vector<double> d{1, 3, 2, 4};
  CHECK(pearson(a, b) == doctest::Approx(1.0));
  CHECK(pearson(a, c) == doctest::Approx(-1.0));
  // Deviation products sum to 4, squared deviations to 5 and 5.
  CHECK(pearson(a, d) == doctest::Approx(0.8));
}

TEST_CASE("correlation_direction is Xc vc normalized and maximizes correlation") {
  Cohort c = random_cohort(5, 12, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (Eigen::Index j = 0; j < 12; ++j) c.covariate.push_back(c.X(0, j) + 0.5 * n01(rng));
  const DirectionResult r = correlation_direction(c);
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(c.covariate.data(), 12);
  v.array() -= v.mean();
  const Eigen::VectorXd w = (centered(c.X) * v).normalized();
  CHECK(std::abs(r.direction.dot(w)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.direction.dot(w) > 0.0);

  const auto cov_of = [&](const Eigen::VectorXd& dir) { return (centered(c.X).transpose() * dir).dot(v); };
  const Eigen::VectorXd s = centered(c.X).transpose() * r.direction;
  CHECK(r.statistic == doctest::Approx(pearson(std::span<const double>(s.data(), 12), c.covariate)));
  // Unit-norm maximizer of the score-covariate covariance (Cauchy-Schwarz).
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd u(5);
    for (Eigen::Index i = 0; i < 5; ++i) u(i) = n01(rng);
    CHECK(cov_of(u.normalized()) <= cov_of(r.direction) + 1e-12);
  }

  Cohort flat = c;
  std::fill(flat.covariate.begin(), flat.covariate.end(), 2.0);
  CHECK(kind_of([&] { correlation_direction(flat); }) == ErrorKind::ConstantCovariate);
}

TEST_CASE("a feature equal to the covariate gives r = 1 on that feature") {
  Cohort c;
  c.X = Eigen::MatrixXd::Zero(4, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    c.covariate.push_back(0.5 * static_cast<double>(j * j));
    c.X(2, j) = c.covariate.back();
  }
  const DirectionResult r = correlation_direction(c);
  CHECK(r.statistic == doctest::Approx(1.0));
  CHECK(std::abs(r.direction(2)) == doctest::Approx(1.0));
  CHECK(r.direction(2) > 0.0);
}

TEST_CASE("permutation_test: p in [1/(T+1), 1], deterministic in the seed") {
  const auto identity_wins = [](std::span<const std::size_t> order) {
    double s = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) s += static_cast<double>(k * order[k]);
    return s;
  };
  // The identity maximizes sum k * order[k] (rearrangement inequality).
  const PermutationResult a = permutation_test(12, identity_wins, 200, 7);
  CHECK(a.p_value >= 1.0 / 201.0);
  CHECK(a.p_value <= 1.0);
  CHECK(a.p_value == doctest::Approx((1.0 + a.exceed) / 201.0));
  CHECK(a.exceed <= 1);
  const PermutationResult b = permutation_test(12, identity_wins, 200, 7);
  CHECK(a.exceed == b.exceed);

  const auto constant = [](std::span<const std::size_t>) { return 1.0; };
  CHECK(permutation_test(5, constant, 50, 1).p_value == 1.0);
  CHECK(kind_of([&] { permutation_test(5, constant, 0, 1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("correlation_test on a strong trend has a small p-value") {
  Cohort c = random_cohort(4, 20, 5);
  for (Eigen::Index j = 0; j < 20; ++j) {
    c.covariate.push_back(static_cast<double>(j));
    c.X(1, j) += 3.0 * static_cast<double>(j);
  }
  const DirectionResult r = correlation_test(c, 200, 9);
  REQUIRE(r.p_value.has_value());
  CHECK(*r.p_value == doctest::Approx(1.0 / 201.0));
  CHECK(r.statistic > 0.95);
}

TEST_CASE("plda matches the generalized eigenproblem S_T w = mu (S_W + alpha I) w") {
  Cohort c = random_cohort(3, 12, 6);
  for (Eigen::Index j = 0; j < 12; ++j) {
    const int l = j % 2;
    c.labels.push_back(l);
    c.X(0, j) += l == 1 ? 1.5 : -1.5;
    c.X(2, j) += l == 1 ? 0.8 : 0.0;
  }
  const double alpha = 0.3;
  const DirectionResult r = plda(c, alpha);

  // Independent scatter matrices in the full 3-space.
  const Eigen::MatrixXd xc = centered(c.X);
  const Eigen::MatrixXd st = xc * xc.transpose() / 12.0;
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(3, 3);
  for (int l : {0, 1}) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
    int n = 0;
    for (Eigen::Index j = 0; j < 12; ++j)
      if (c.labels[static_cast<std::size_t>(j)] == l) {
        mu += c.X.col(j);
        ++n;
      }
    mu /= n;
    for (Eigen::Index j = 0; j < 12; ++j)
      if (c.labels[static_cast<std::size_t>(j)] == l) sw += (c.X.col(j) - mu) * (c.X.col(j) - mu).transpose();
  }
  sw /= 12.0;
  const Eigen::MatrixXd pen = sw + alpha * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(st, pen);
  const Eigen::VectorXd w = ges.eigenvectors().col(2).normalized();
  CHECK(std::abs(r.direction.dot(w)) == doctest::Approx(1.0).epsilon(1e-9));

  // Orientation: class 1 projects above class 0 on average.
  double m0 = 0.0, m1 = 0.0;
  for (Eigen::Index j = 0; j < 12; ++j) (c.labels[static_cast<std::size_t>(j)] ? m1 : m0) += r.scores(j);
  CHECK(m1 > m0);

  // Fisher ratio of the scores, computed directly.
  double s[2] = {0, 0}, ss[2] = {0, 0};
  for (Eigen::Index j = 0; j < 12; ++j) {
    const int l = c.labels[static_cast<std::size_t>(j)];
    s[l] += r.scores(j);
    ss[l] += r.scores(j) * r.scores(j);
  }
  const double a0 = s[0] / 6, a1 = s[1] / 6;
  const double fisher = (a1 - a0) * (a1 - a0) / (ss[0] / 6 - a0 * a0 + ss[1] / 6 - a1 * a1);
  CHECK(r.statistic == doctest::Approx(fisher));

  const DirectionResult t = plda_test(c, alpha, 200, 3);
  REQUIRE(t.p_value.has_value());
  CHECK(*t.p_value < 0.05);
}

TEST_CASE("plda: large alpha tends to the mean difference, alpha 0 with d > K is singular") {
  Cohort c = random_cohort(3, 10, 8);
  for (Eigen::Index j = 0; j < 10; ++j) {
    c.labels.push_back(j < 5 ? 0 : 1);
    c.X(1, j) += j < 5 ? 0.0 : 2.0;
  }
  const DirectionResult big = plda(c, 1e9);
  // As alpha grows the criterion tends to w^T S_T w: the first principal axis.
  const PcaModel m = pca(c);
  CHECK(principal_angle(big.direction, m.components.col(0)) < 1e-4);

  Cohort wide = random_cohort(30, 6, 9);
  wide.labels = {0, 0, 0, 1, 1, 1};
  CHECK(kind_of([&] { plda(wide, 0.0); }) == ErrorKind::SingularPenalty);
  CHECK_NOTHROW(plda(wide, 0.5));

  Cohort one_class = c;
  std::fill(one_class.labels.begin(), one_class.labels.end(), 1);
  CHECK(kind_of([&] { plda(one_class, 1.0); }) == ErrorKind::DegenerateLabels);
  Cohort unlabeled = c;
  unlabeled.labels.clear();
  CHECK(kind_of([&] { plda(unlabeled, 1.0); }) == ErrorKind::DegenerateLabels);
}

TEST_CASE("alpha scan skips singular penalties and reports angles") {
  Cohort wide = random_cohort(30, 6, 10);
  wide.labels = {0, 0, 0, 1, 1, 1};
  const std::vector<double> alphas{0.0, 0.1, 1.0, 10.0};
  const auto rows = alpha_stability_scan(wide, alphas);
  REQUIRE(rows.size() == 4);
  CHECK_FALSE(rows[0].ok);
  CHECK(rows[1].ok);
  CHECK(rows[1].angle_to_previous == 0.0);
  for (std::size_t i = 2; i < 4; ++i) {
    CHECK(rows[i].angle_to_previous >= 0.0);
    CHECK(rows[i].angle_to_previous <= 0.5 * std::numbers::pi);
  }
}

TEST_CASE("principal_angle ignores sign and scale") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << -3, 3;
  CHECK(principal_angle(a, b) == doctest::Approx(std::numbers::pi / 4));
  CHECK(principal_angle(a, -2.0 * a) == doctest::Approx(0.0));
  b << 0, 5;
  CHECK(principal_angle(a, b) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("covariate CSV round trip and header checks") {
  const fs::path dir = fs::temp_directory_path() / "tbm_test_stats";
  fs::create_directories(dir);
  CovariateTable t;
  t.ids = {"a", "b", "c"};
  t.values = {0.5, -1.25, 3e-7};
  t.labels = {0, 1, 1};
  write_covariates(t, dir / "cov.csv");
  const CovariateTable back = read_covariates(dir / "cov.csv");
  CHECK(back.ids == t.ids);
  CHECK(back.values == t.values);
  CHECK(back.labels == t.labels);

  std::ofstream(dir / "bad.csv") << "id,age\na,1\n";
  CHECK(kind_of([&] { read_covariates(dir / "bad.csv"); }) == ErrorKind::ConfigError);
  std::ofstream(dir / "nan.csv") << "subject_id,value\na,xyz\n";
  CHECK(kind_of([&] { read_covariates(dir / "nan.csv"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { read_covariates(dir / "missing.csv"); }) == ErrorKind::IoError);
}
