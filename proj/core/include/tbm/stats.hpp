#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbm/lot.hpp"

namespace tbm {

/// K subjects as the columns of a d x K data matrix.
struct Cohort {
  std::vector<std::string> ids;
  Eigen::MatrixXd X;
  std::vector<double> covariate;
  std::vector<int> labels;  // empty when unlabeled

  static Cohort from_embeddings(std::span<const LotEmbedding> embeddings,
                                std::vector<std::string> ids = {},
                                std::vector<double> covariate = {}, std::vector<int> labels = {});

  Eigen::Index dimension() const { return X.rows(); }
  Eigen::Index size() const { return X.cols(); }
};

/// Orthonormal basis of the centered columns built from the K x K Gram
/// matrix, so the d x d covariance is never formed.
struct Reduction {
  Eigen::VectorXd mean;       // d
  Eigen::MatrixXd basis;      // d x r, orthonormal columns
  Eigen::VectorXd variances;  // r, eigenvalues of (1/K) Xc Xc^T, descending
  Eigen::MatrixXd scores;     // r x K coordinates of the centered columns

  Eigen::Index rank() const { return basis.cols(); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;  // d -> r, centered
  Eigen::VectorXd lift(const Eigen::VectorXd& z) const;     // r -> d, mean added
};

/// r = 0 selects K - 1. Directions with numerically zero variance are
/// dropped, so the result may have fewer than r columns.
Reduction reduce(const Cohort& cohort, Eigen::Index r = 0);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // d x r
  Eigen::VectorXd variances;   // descending
  double total_variance = 0.0; // trace of the covariance

  double explained_fraction(Eigen::Index k) const;
};

PcaModel pca(const Cohort& cohort, Eigen::Index r = 0);

struct DirectionResult {
  Eigen::VectorXd direction;  // unit length in the full space
  Eigen::VectorXd scores;     // projection of each centered subject
  double statistic = 0.0;
  std::optional<double> p_value;
};

double pearson(std::span<const double> a, std::span<const double> b);

/// Direction maximizing correlation of the projections with the covariate:
/// w = Xc vc / |Xc vc|. Statistic is Pearson r of the scores with v.
DirectionResult correlation_direction(const Cohort& cohort, Eigen::Index r = 0);

struct PermutationResult {
  double observed = 0.0;
  double p_value = 1.0;
  int exceed = 0;
  int trials = 0;
};

/// Statistic evaluated on a permutation of the subject order (order[k] is
/// the subject whose covariate/label is assigned to subject k).
using PermutationStatistic = std::function<double(std::span<const std::size_t> order)>;

/// p = (1 + #{permuted >= observed}) / (T + 1). Trial t draws its
/// permutation from a generator seeded by (seed, t), so results do not
/// depend on evaluation order.
PermutationResult permutation_test(std::size_t subjects, const PermutationStatistic& statistic,
                                   int trials, std::uint64_t seed);

/// correlation_direction with its covariate-permutation p-value.
DirectionResult correlation_test(const Cohort& cohort, int trials, std::uint64_t seed,
                                 Eigen::Index r = 0);

/// Maximizes w^T S_T w / w^T (S_W + alpha I) w in the reduced space.
/// Statistic is the Fisher ratio of the training scores,
/// (m1 - m0)^2 / (s0^2 + s1^2), for the first two classes (ascending id).
DirectionResult plda(const Cohort& cohort, double alpha, Eigen::Index r = 0);

/// plda with a label-permutation p-value.
DirectionResult plda_test(const Cohort& cohort, double alpha, int trials, std::uint64_t seed,
                          Eigen::Index r = 0);

struct AlphaScanRow {
  double alpha = 0.0;
  bool ok = true;
  std::string note;
  double angle_to_previous = 0.0;  // radians; 0 for the first usable alpha
};

/// Angle between plda directions at consecutive usable alphas. Alphas whose
/// penalty matrix is singular are reported with ok = false and skipped.
std::vector<AlphaScanRow> alpha_stability_scan(const Cohort& cohort,
                                               std::span<const double> alphas,
                                               Eigen::Index r = 0);

/// Angle in [0, pi/2] between two directions, ignoring sign.
double principal_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct CovariateTable {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;  // empty unless a label column is present
};

/// CSV with header subject_id,value[,label].
CovariateTable read_covariates(const std::filesystem::path& path);
void write_covariates(const CovariateTable& table, const std::filesystem::path& path);

LotEmbedding to_embedding(const GridSpec& grid, const Eigen::VectorXd& v);

}  // namespace tbm
