#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tbm/oracles.hpp"

namespace tbm {

struct ValidationOptions {
  std::uint64_t seed = 1;
  // Replaces el_gradient in the gradient row (negative controls).
  GradientFn gradient;
  // Criterion ids to run (1..11); empty runs all.
  std::vector<int> criteria;
  // Wall-clock per criterion goes here, never into the report.
  std::ostream* timings = nullptr;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;
};

struct ValidationReport {
  std::vector<CriterionResult> rows;

  bool passed() const;
  /// One line per row plus a summary line; depends only on measured values.
  std::string to_text() const;
};

inline constexpr int kCriterionCount = 11;

std::string criterion_name(int id);

/// Runs one of criteria 1..10.
CriterionResult run_criterion(int id, const ValidationOptions& opts);

/// Runs the selected criteria. Criterion 11 reruns the selected rows 1..10
/// (all of them when none are selected) and compares the two reports byte
/// for byte.
ValidationReport run_validation(const ValidationOptions& opts = {});

}  // namespace tbm
