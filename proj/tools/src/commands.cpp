#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "manifest.hpp"
#include "slices.hpp"
#include "tbm/lot.hpp"
#include "tbm/stats.hpp"
#include "tbm/validation.hpp"
#include "tbm/volume_io.hpp"

namespace tbm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyCohort:
    case ErrorKind::NonDiffeomorphicMap:
    case ErrorKind::RankTooLarge:
    case ErrorKind::ConstantCovariate:
    case ErrorKind::SingularPenalty:
    case ErrorKind::DegenerateLabels:
    case ErrorKind::Infeasible:
      return kExitModel;
    default:
      return kExitConfig;
  }
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + p.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + p.string());
  return out;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::IoError, p.string() + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

DensityVolume load_input(const fs::path& p) {
  DensityVolume v = p.extension() == ".nii" ? read_nifti1(p) : read_volume(p);
  return normalize_density(v);
}

fs::path embedding_path(const fs::path& out, const std::string& id) {
  return out / "embeddings" / (id + ".tbmv");
}

struct SubjectOutcome {
  std::optional<Analysis> analysis;
  std::string error;
};

std::vector<SubjectOutcome> run_subjects(const Template& t, const std::vector<DensityVolume>& subjects,
                                         const std::vector<std::string>& ids, const SolverConfig& cfg,
                                         int jobs, std::ostream& log) {
  std::vector<SubjectOutcome> outcomes(subjects.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < subjects.size(); k = next++) {
      try {
        outcomes[k].analysis = analyze(t, subjects[k], cfg);
      } catch (const std::exception& e) {
        outcomes[k].error = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "  " << ids[k] << ": ";
      if (outcomes[k].analysis) {
        const auto& m = outcomes[k].analysis->solve.final_metrics;
        log << (outcomes[k].analysis->solve.converged ? "converged" : "NOT converged")
            << ", rel MSE " << m.rel_mse << ", mean curl " << m.mean_curl << '\n';
      } else {
        log << "failed: " << outcomes[k].error << '\n';
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(subjects.size())));
  std::vector<std::jthread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  return outcomes;
}

std::vector<std::string> transformed_subjects(const fs::path& out) {
  const fs::path table = out / "transform.csv";
  std::ifstream in(table);
  if (!in) throw Error(ErrorKind::IoError, "no transform results at " + table.string() + "; run transform first");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 2) throw Error(ErrorKind::IoError, "malformed row in " + table.string());
    if (cells[1] != "error") ids.push_back(cells[0]);
  }
  return ids;
}

double population_sd(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().mean());
}

}  // namespace

int cmd_transform(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = input_volumes(cfg);
  if (paths.empty()) throw Error(ErrorKind::ConfigError, "transform: no input volumes configured");
  std::vector<DensityVolume> subjects;
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    const std::string id = p.stem().string();
    if (id.find(',') != std::string::npos) throw Error(ErrorKind::ConfigError, "subject id contains a comma: " + id);
    if (!seen.insert(id).second) throw Error(ErrorKind::ConfigError, "duplicate subject id " + id);
    subjects.push_back(load_input(p));
    require_same_grid(subjects.front().grid(), subjects.back().grid(),
                      ("input " + p.string() + " does not share the first input's grid").c_str());
    ids.push_back(id);
  }
  Template t;
  if (cfg.template_path.empty()) {
    t = build_template(subjects, ids);
  } else {
    t.density = normalize_density(load_input(cfg.template_path));
    t.provenance = {cfg.template_path.generic_string()};
    require_same_grid(t.density.grid(), subjects.front().grid(), "template and inputs do not share a grid");
  }

  log << "transform: " << subjects.size() << " subjects, " << cfg.jobs << " job(s)\n";
  const auto outcomes = run_subjects(t, subjects, ids, cfg.solver, cfg.jobs, log);

  ensure_dir(cfg.out / "embeddings");
  ensure_dir(cfg.out / "traces");
  Manifest manifest(cfg.out);
  manifest.begin_stage("transform", to_json(cfg));
  const fs::path template_file = cfg.out / "template.tbmv";
  write_volume(t.density, template_file);
  manifest.record(template_file);

  std::ostringstream table;
  table << "subject_id,status,rel_mse,mean_curl,normalized_cost,min_det,iterations,rejected_steps\n";
  int failures = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& o = outcomes[k];
    if (!o.analysis) {
      ++failures;
      table << ids[k] << ",error,,,,,,\n";
      continue;
    }
    const SolveResult& s = o.analysis->solve;
    if (!s.converged) ++failures;
    const fs::path emb = embedding_path(cfg.out, ids[k]);
    write_embedding(o.analysis->embedding, emb);
    manifest.record(emb);
    const fs::path trace = cfg.out / "traces" / (ids[k] + ".csv");
    s.trace.write_csv(trace);
    manifest.record(trace);
    const auto& m = s.final_metrics;
    table << ids[k] << ',' << (s.converged ? "converged" : "unconverged") << ',' << num(m.rel_mse) << ','
          << num(m.mean_curl) << ',' << num(m.normalized_cost) << ',' << num(m.min_det) << ','
          << s.trace.rows.size() << ',' << s.trace.rejected_steps << '\n';
  }
  const fs::path table_file = cfg.out / "transform.csv";
  open_out(table_file) << table.str();
  manifest.record(table_file);
  manifest.write();
  if (failures > 0) {
    log << "transform: " << failures << " subject(s) failed or did not converge\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_model(const PipelineConfig& cfg, std::ostream& log) {
  const auto ids = transformed_subjects(cfg.out);
  std::vector<LotEmbedding> embeddings;
  for (const auto& id : ids) embeddings.push_back(read_embedding(embedding_path(cfg.out, id)));
  if (embeddings.empty()) throw Error(ErrorKind::EmptyCohort, "model: no transformed subjects");

  const ModelSpec& spec = cfg.model;
  std::vector<double> covariate;
  std::vector<int> labels;
  if (spec.kind != ModelKind::Pca) {
    if (cfg.covariates.empty()) {
      throw Error(ErrorKind::ConfigError, "model." + to_string(spec.kind) + " needs inputs.covariates");
    }
    const CovariateTable table = read_covariates(cfg.covariates);
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < table.ids.size(); ++i) row[table.ids[i]] = i;
    if (spec.kind == ModelKind::Plda && table.labels.empty()) {
      throw Error(ErrorKind::ConfigError, "model.plda needs a label column in " + cfg.covariates.string());
    }
    for (const auto& id : ids) {
      const auto it = row.find(id);
      if (it == row.end()) throw Error(ErrorKind::ConfigError, "no covariate row for subject " + id);
      covariate.push_back(table.values[it->second]);
      if (!table.labels.empty()) labels.push_back(table.labels[it->second]);
    }
  }
  const Cohort cohort = Cohort::from_embeddings(embeddings, ids, covariate, labels);
  const GridSpec grid = embeddings.front().grid;
  const fs::path dir = cfg.out / "model";
  ensure_dir(dir);
  Manifest manifest(cfg.out);
  manifest.begin_stage("model", to_json(cfg));
  auto save = [&](const fs::path& file, const std::string& text) {
    open_out(file) << text;
    manifest.record(file);
  };
  auto save_embedding = [&](const fs::path& file, const Eigen::VectorXd& v) {
    write_embedding(to_embedding(grid, v), file);
    manifest.record(file);
  };

  const Eigen::VectorXd mean = cohort.X.rowwise().mean();
  save_embedding(dir / "mean.tbmv", mean);
  json model = {{"kind", to_string(spec.kind)}, {"subjects", ids.size()}};
  std::ostringstream scores;
  std::ostringstream results;
  std::ostringstream summary;
  summary << "model: " << to_string(spec.kind) << " on " << ids.size() << " subjects\n";

  if (spec.kind == ModelKind::Pca) {
    const PcaModel p = pca(cohort, spec.rank);
    const Eigen::MatrixXd z = p.components.transpose() * (cohort.X.colwise() - p.mean);
    json directions = json::array();
    json sds = json::array();
    scores << "subject_id";
    results << "component,variance,explained_fraction\n";
    for (Eigen::Index c = 0; c < p.components.cols(); ++c) {
      const std::string name = "component_" + std::to_string(c + 1) + ".tbmv";
      save_embedding(dir / name, p.components.col(c));
      directions.push_back(name);
      sds.push_back(population_sd(z.row(c).transpose()));
      scores << ",pc" << c + 1;
      results << c + 1 << ',' << num(p.variances(c)) << ',' << num(p.explained_fraction(c)) << '\n';
      if (c < 10) {
        summary << "  PC" << c + 1 << " variance share " << p.explained_fraction(c) << '\n';
      }
    }
    scores << '\n';
    for (Eigen::Index k = 0; k < cohort.size(); ++k) {
      scores << ids[static_cast<std::size_t>(k)];
      for (Eigen::Index c = 0; c < z.rows(); ++c) scores << ',' << num(z(c, k));
      scores << '\n';
    }
    model["directions"] = directions;
    model["score_sd"] = sds;
  } else {
    DirectionResult d;
    std::optional<double> alpha;
    if (spec.kind == ModelKind::Regress) {
      d = spec.permutations > 0 ? correlation_test(cohort, spec.permutations, cfg.seed, spec.rank)
                                : correlation_direction(cohort, spec.rank);
      summary << "  Pearson r " << d.statistic << '\n';
    } else {
      const double total = pca(cohort, spec.rank).total_variance;
      alpha = spec.alpha ? *spec.alpha : spec.alpha_fraction * total;
      d = spec.permutations > 0 ? plda_test(cohort, *alpha, spec.permutations, cfg.seed, spec.rank)
                                : plda(cohort, *alpha, spec.rank);
      summary << "  alpha " << *alpha << ", Fisher ratio " << d.statistic << '\n';
      double max0 = -HUGE_VAL;
      double min1 = HUGE_VAL;
      for (Eigen::Index k = 0; k < cohort.size(); ++k) {
        const int lab = cohort.labels[static_cast<std::size_t>(k)];
        if (lab == *std::min_element(cohort.labels.begin(), cohort.labels.end())) {
          max0 = std::max(max0, d.scores(k));
        } else {
          min1 = std::min(min1, d.scores(k));
        }
      }
      summary << "  training projections " << (min1 > max0 ? "separated" : "overlap") << " (gap "
              << min1 - max0 << ")\n";
      if (!spec.alpha_scan.empty()) {
        std::vector<double> alphas;
        for (double f : spec.alpha_scan) alphas.push_back(f * total);
        std::ostringstream scan;
        scan << "alpha,ok,angle_to_previous,note\n";
        for (const auto& row : alpha_stability_scan(cohort, alphas, spec.rank)) {
          scan << num(row.alpha) << ',' << (row.ok ? 1 : 0) << ',' << num(row.angle_to_previous) << ','
               << row.note << '\n';
        }
        save(dir / "alpha_scan.csv", scan.str());
      }
    }
    if (d.p_value) summary << "  permutation p " << *d.p_value << " (T=" << spec.permutations << ")\n";
    save_embedding(dir / "direction.tbmv", d.direction);
    model["directions"] = json::array({"direction.tbmv"});
    model["score_sd"] = json::array({population_sd(d.scores)});
    model["statistic"] = d.statistic;
    if (d.p_value) model["p_value"] = *d.p_value;
    if (alpha) model["alpha"] = *alpha;
    const bool regress = spec.kind == ModelKind::Regress;
    scores << "subject_id," << (regress ? "covariate" : "label") << ",score\n";
    for (Eigen::Index k = 0; k < cohort.size(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      scores << ids[i] << ',' << (regress ? num(covariate[i]) : std::to_string(labels[i])) << ','
             << num(d.scores(k)) << '\n';
    }
    results << "kind,statistic,p_value,permutations,alpha\n"
            << to_string(spec.kind) << ',' << num(d.statistic) << ','
            << (d.p_value ? num(*d.p_value) : "") << ',' << spec.permutations << ','
            << (alpha ? num(*alpha) : "") << '\n';
  }
  save(dir / "scores.csv", scores.str());
  save(dir / "results.csv", results.str());
  save(dir / "summary.txt", summary.str());
  save(dir / "model.json", model.dump(2) + "\n");
  manifest.write();
  log << summary.str();
  return kExitOk;
}

int cmd_synthesize(const PipelineConfig& cfg, std::ostream& log) {
  const SynthesisSpec& spec = cfg.synthesis;
  Template t;
  t.density = read_volume(cfg.out / "template.tbmv");
  const GridSpec& g = t.density.grid();
  const fs::path model_dir = cfg.out / "model";
  const json model = read_json(model_dir / "model.json");
  const LotEmbedding mean = read_embedding(model_dir / "mean.tbmv");

  LotEmbedding direction;
  double scale = 1.0;
  std::string direction_name;
  if (!spec.direction.empty()) {
    direction = read_embedding(spec.direction);
    direction_name = spec.direction.generic_string();
  } else {
    const auto& dirs = model.at("directions");
    const auto c = static_cast<std::size_t>(spec.component);
    if (c >= dirs.size()) {
      throw Error(ErrorKind::ConfigError, "synthesis.component " + std::to_string(c) + " but the model has " +
                                              std::to_string(dirs.size()) + " direction(s)");
    }
    direction_name = dirs[c].get<std::string>();
    direction = read_embedding(model_dir / direction_name);
    if (spec.scale_by_sd) scale = model.at("score_sd")[c].get<double>();
  }
  require_same_grid(mean.grid, g, "model and template grids differ");
  require_same_grid(direction.grid, g, "direction and template grids differ");

  std::vector<SliceSpec> slices = spec.slices;
  if (slices.empty()) slices.push_back({2, g.rank() == 3 ? g.dim(2) / 2 : 0});
  for (const auto& s : slices) {
    if (s.index >= g.dim(s.axis)) {
      throw Error(ErrorKind::ConfigError, "slice index " + std::to_string(s.index) + " outside axis " +
                                              std::to_string(s.axis));
    }
  }

  const fs::path dir = cfg.out / "series";
  ensure_dir(dir);
  Manifest manifest(cfg.out);
  manifest.begin_stage("synthesize", to_json(cfg));
  json sidecar = {{"direction", direction_name}, {"nu_scale", scale}, {"nus", spec.nus}};
  json failures = json::array();
  std::vector<std::optional<DensityVolume>> images(spec.nus.size());
  for (std::size_t k = 0; k < spec.nus.size(); ++k) {
    const double nu = spec.nus[k];
    try {
      images[k] = synthesize(t, mean + (nu * scale) * direction);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonDiffeomorphicMap) throw;
      failures.push_back({{"index", k}, {"nu", nu}, {"error", e.what()}});
      log << "  nu " << nu << ": " << e.what() << '\n';
      continue;
    }
    const fs::path file = dir / ("nu_" + std::to_string(k) + ".tbmv");
    write_volume(*images[k], file);
    manifest.record(file);
  }

  json slice_info = json::array();
  for (const auto& s : slices) {
    std::vector<std::optional<Slice>> planes(images.size());
    double lo = HUGE_VAL;
    double hi = -HUGE_VAL;
    for (std::size_t k = 0; k < images.size(); ++k) {
      if (!images[k]) continue;
      planes[k] = extract_slice(images[k]->as_field(), s.axis, s.index);
      for (double v : planes[k]->values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    json files = json::array();
    for (std::size_t k = 0; k < planes.size(); ++k) {
      if (!planes[k]) continue;
      const std::string name = "slice_a" + std::to_string(s.axis) + "_i" + std::to_string(s.index) + "_nu_" +
                               std::to_string(k) + ".pgm";
      write_pgm(dir / name, *planes[k], lo, hi);
      manifest.record(dir / name);
      files.push_back(name);
    }
    json entry = {{"axis", s.axis}, {"index", s.index}, {"files", files}};
    if (lo <= hi) {
      entry["min"] = lo;
      entry["max"] = hi;
    }
    slice_info.push_back(entry);
  }
  sidecar["slices"] = slice_info;
  sidecar["failures"] = failures;
  const fs::path side = dir / "series.json";
  open_out(side) << sidecar.dump(2) << '\n';
  manifest.record(side);
  manifest.write();
  log << "synthesize: " << spec.nus.size() - failures.size() << " of " << spec.nus.size() << " images\n";
  return failures.empty() ? kExitOk : kExitModel;
}

int cmd_validate(const PipelineConfig& cfg, const std::vector<int>& criteria, std::ostream& report,
                 std::ostream& log) {
  ValidationOptions opts;
  opts.seed = cfg.seed;
  opts.criteria = criteria;
  opts.timings = &log;
  const ValidationReport rep = run_validation(opts);
  const std::string text = rep.to_text();
  report << text;
  ensure_dir(cfg.out);
  Manifest manifest(cfg.out);
  manifest.begin_stage("validate", to_json(cfg));
  const fs::path file = cfg.out / "validation.txt";
  open_out(file) << text;
  manifest.record(file);
  manifest.write();
  return rep.passed() ? kExitOk : kExitModel;
}

int cmd_phantom(const PipelineConfig& cfg, std::ostream& log) {
  const PhantomCohort c = make_phantom_cohort(cfg.phantom);
  const fs::path dir = cfg.out / "phantoms";
  ensure_dir(dir);
  Manifest manifest(cfg.out);
  manifest.begin_stage("phantom", to_json(cfg));
  for (std::size_t k = 0; k < c.volumes.size(); ++k) {
    const fs::path file = dir / (c.ids[k] + ".tbmv");
    write_volume(c.volumes[k], file);
    manifest.record(file);
  }
  CovariateTable table{c.ids, c.covariate, c.labels};
  const fs::path cov = dir / "covariates.csv";
  write_covariates(table, cov);
  manifest.record(cov);
  manifest.write();
  log << "phantom: " << c.volumes.size() << ' ' << to_string(cfg.phantom.family) << " volumes in "
      << dir.string() << '\n';
  return kExitOk;
}

}  // namespace tbm::cli
