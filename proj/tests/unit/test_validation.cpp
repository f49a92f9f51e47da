#include <doctest.h>

#include <sstream>

#include "tbm/solver.hpp"
#include "tbm/validation.hpp"

using namespace tbm;

TEST_CASE("every criterion has a name") {
  for (int id = 1; id <= kCriterionCount; ++id) CHECK_FALSE(criterion_name(id).empty());
}

TEST_CASE("the gradient row passes with the real gradient") {
  const CriterionResult r = run_criterion(1, ValidationOptions{});
  CHECK(r.id == 1);
  CHECK(r.passed);
}

TEST_CASE("a 1% gradient error fails the gradient row") {
  ValidationOptions opts;
  opts.gradient = [](const VectorField& f, const DensityVolume& a, const DensityVolume& b, const SolverConfig& c) {
    VectorField g = el_gradient(f, a, b, c);
    for (auto& comp : g.comp)
      for (double& v : comp) v *= 1.01;
    return g;
  };
  CHECK_FALSE(run_criterion(1, opts).passed);
}

TEST_CASE("determinism row reruns the selection and the report format is stable") {
  ValidationOptions opts;
  opts.criteria = {1, 11};
  std::ostringstream timings;
  opts.timings = &timings;
  const ValidationReport rep = run_validation(opts);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].id == 1);
  CHECK(rep.rows[1].id == 11);
  CHECK(rep.passed());
  const std::string text = rep.to_text();
  CHECK(text.rfind("PASS   1  ", 0) == 0);
  CHECK(text.find("2/2 criteria passed") != std::string::npos);
  CHECK_FALSE(timings.str().empty());
  CHECK(text.find(timings.str()) == std::string::npos);
}

TEST_CASE("unknown criteria are rejected") {
  CHECK_THROWS(run_criterion(0, ValidationOptions{}));
  CHECK_THROWS(run_criterion(12, ValidationOptions{}));
}
