#pragma once

#include <iosfwd>
#include <vector>

#include "pipeline_config.hpp"
#include "tbm/error.hpp"

namespace tbm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModel = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

int exit_code(ErrorKind kind);

// Each command writes under cfg.out, records its files in the manifest and
// returns an exit code. Errors that stop a command are thrown as tbm::Error.
//
//   transform   template.tbmv, embeddings/<id>.tbmv, traces/<id>.csv, transform.csv
//   model       model/{model.json, mean.tbmv, <direction>.tbmv, scores.csv, results.csv, summary.txt}
//   synthesize  series/{nu_<k>.tbmv, slice_a<axis>_i<index>_nu_<k>.pgm, series.json}
//   validate    validation.txt (also printed to report)
//   phantom     phantoms/<id>.tbmv, phantoms/covariates.csv
int cmd_transform(const PipelineConfig& cfg, std::ostream& log);
int cmd_model(const PipelineConfig& cfg, std::ostream& log);
int cmd_synthesize(const PipelineConfig& cfg, std::ostream& log);
int cmd_validate(const PipelineConfig& cfg, const std::vector<int>& criteria, std::ostream& report,
                 std::ostream& log);
int cmd_phantom(const PipelineConfig& cfg, std::ostream& log);

}  // namespace tbm::cli
