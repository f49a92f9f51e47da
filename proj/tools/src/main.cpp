#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace tbm::cli;

  CLI::App app{"Transport-based morphometry: transport maps, LOT embeddings, statistics and synthesis"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--jobs", jobs, "concurrent subject solves")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for phantoms, permutations and validation");
  app.add_option("--out", out_dir, "output directory");

  auto* transform = app.add_subcommand("transform", "solve template -> subject maps and write LOT embeddings");
  auto* model = app.add_subcommand("model", "fit pca / regress / plda on the embeddings");
  auto* synth = app.add_subcommand("synthesize", "images along a model direction");
  auto* validate = app.add_subcommand("validate", "run the acceptance suite on generated instances");
  auto* phantom = app.add_subcommand("phantom", "write a synthetic cohort with covariates");
  std::vector<int> criteria;
  validate->add_option("--criterion", criteria, "run only these rows (1-11); repeatable")
      ->check(CLI::Range(1, 11));
  for (auto* sub : {transform, model, synth, validate, phantom}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    PipelineConfig cfg = config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(config_path);
    if (jobs) cfg.jobs = *jobs;
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    cfg.phantom.seed = cfg.seed;

    if (transform->parsed()) return cmd_transform(cfg, std::cerr);
    if (model->parsed()) return cmd_model(cfg, std::cerr);
    if (synth->parsed()) return cmd_synthesize(cfg, std::cerr);
    if (validate->parsed()) return cmd_validate(cfg, criteria, std::cout, std::cerr);
    return cmd_phantom(cfg, std::cerr);
  } catch (const tbm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
