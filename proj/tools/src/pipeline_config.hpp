#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbm/phantoms.hpp"
#include "tbm/solver.hpp"

namespace tbm::cli {

enum class ModelKind { Pca, Regress, Plda };

std::string to_string(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::Pca;
  long rank = 0;  // 0 = K - 1
  // plda penalty: alpha when set, else alpha_fraction * total variance.
  std::optional<double> alpha;
  double alpha_fraction = 0.1;
  std::vector<double> alpha_scan;  // fractions of total variance
  int permutations = 1000;
};

struct SliceSpec {
  int axis = 2;
  std::size_t index = 0;
};

struct SynthesisSpec {
  std::vector<double> nus{-1.0, 0.0, 1.0};
  int component = 0;           // pca component; ignored for single-direction models
  bool scale_by_sd = true;     // nu in units of the score standard deviation
  std::filesystem::path direction;  // optional override of the model direction
  std::vector<SliceSpec> slices;    // empty: middle slice along the last axis
};

struct PipelineConfig {
  SolverConfig solver;
  std::vector<std::filesystem::path> volumes;
  std::filesystem::path volume_dir;
  std::filesystem::path template_path;
  std::filesystem::path covariates;
  ModelSpec model;
  SynthesisSpec synthesis;
  PhantomSpec phantom;
  std::filesystem::path out = "tbm_out";
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Rejects unknown keys and wrong types with ConfigError. Relative paths are
/// resolved against base.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical form recorded in manifests (all keys, defaults filled in).
nlohmann::json to_json(const PipelineConfig& cfg);

/// Input volume paths: explicit list first, then *.tbmv / *.nii in
/// volume_dir in lexicographic order.
std::vector<std::filesystem::path> input_volumes(const PipelineConfig& cfg);

}  // namespace tbm::cli
