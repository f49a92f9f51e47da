#include "pipeline_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "tbm/error.hpp"

namespace tbm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

void require_object(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
  }
}

double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) fail("'" + key + "' must be a number");
  return j.get<double>();
}

long get_integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) fail("'" + key + "' must be an integer");
  return j.get<long>();
}

std::uint64_t get_unsigned(const json& j, const std::string& key) {
  if (!j.is_number_unsigned()) fail("'" + key + "' must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) fail("'" + key + "' must be a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) fail("'" + key + "' must be true or false");
  return j.get<bool>();
}

std::vector<double> get_numbers(const json& j, const std::string& key) {
  if (!j.is_array()) fail("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(get_number(v, key));
  return out;
}

fs::path get_path(const json& j, const std::string& key, const fs::path& base) {
  fs::path p = get_string(j, key);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void parse_solver(const json& j, SolverConfig& s) {
  require_object(j, "solver",
                 {"lambda", "gamma", "gamma_activation_fraction", "scales", "max_step_voxels",
                  "mse_termination", "max_iters", "diffeo_min_det", "stagnation_window",
                  "stagnation_tolerance", "settle_tolerance", "precondition_voxels"});
  for (const auto& [k, v] : j.items()) {
    if (k == "lambda") s.lambda = get_number(v, k);
    else if (k == "gamma") s.gamma = get_number(v, k);
    else if (k == "gamma_activation_fraction") s.gamma_activation_fraction = get_number(v, k);
    else if (k == "scales") s.scales = static_cast<int>(get_integer(v, k));
    else if (k == "max_step_voxels") s.max_step_voxels = get_number(v, k);
    else if (k == "mse_termination") s.mse_termination = get_number(v, k);
    else if (k == "max_iters") s.max_iters = static_cast<int>(get_integer(v, k));
    else if (k == "diffeo_min_det") s.diffeo_min_det = get_number(v, k);
    else if (k == "stagnation_window") s.stagnation_window = static_cast<int>(get_integer(v, k));
    else if (k == "stagnation_tolerance") s.stagnation_tolerance = get_number(v, k);
    else if (k == "settle_tolerance") s.settle_tolerance = get_number(v, k);
    else if (k == "precondition_voxels") s.precondition_voxels = get_number(v, k);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    fail(std::string("solver: ") + e.what());
  }
}

void parse_inputs(const json& j, PipelineConfig& c, const fs::path& base) {
  require_object(j, "inputs", {"volumes", "directory", "template", "covariates"});
  for (const auto& [k, v] : j.items()) {
    if (k == "volumes") {
      if (!v.is_array()) fail("'volumes' must be an array of paths");
      for (const auto& p : v) c.volumes.push_back(get_path(p, k, base));
    } else if (k == "directory") {
      c.volume_dir = get_path(v, k, base);
    } else if (k == "template") {
      c.template_path = get_path(v, k, base);
    } else if (k == "covariates") {
      c.covariates = get_path(v, k, base);
    }
  }
}

void parse_model(const json& j, ModelSpec& m) {
  require_object(j, "model", {"kind", "rank", "alpha", "alpha_fraction", "alpha_scan", "permutations"});
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") {
      const std::string s = get_string(v, k);
      if (s == "pca") m.kind = ModelKind::Pca;
      else if (s == "regress") m.kind = ModelKind::Regress;
      else if (s == "plda") m.kind = ModelKind::Plda;
      else fail("model.kind must be pca, regress or plda");
    } else if (k == "rank") {
      m.rank = get_integer(v, k);
      if (m.rank < 0) fail("model.rank must be >= 0");
    } else if (k == "alpha") {
      m.alpha = get_number(v, k);
      if (!(*m.alpha >= 0.0)) fail("model.alpha must be >= 0");
    } else if (k == "alpha_fraction") {
      m.alpha_fraction = get_number(v, k);
      if (!(m.alpha_fraction >= 0.0)) fail("model.alpha_fraction must be >= 0");
    } else if (k == "alpha_scan") {
      m.alpha_scan = get_numbers(v, k);
    } else if (k == "permutations") {
      m.permutations = static_cast<int>(get_integer(v, k));
      if (m.permutations < 0) fail("model.permutations must be >= 0");
    }
  }
}

void parse_synthesis(const json& j, SynthesisSpec& s, const fs::path& base) {
  require_object(j, "synthesis", {"nus", "component", "scale_by_sd", "direction", "slices"});
  for (const auto& [k, v] : j.items()) {
    if (k == "nus") {
      s.nus = get_numbers(v, k);
      if (s.nus.empty()) fail("synthesis.nus must not be empty");
    } else if (k == "component") {
      s.component = static_cast<int>(get_integer(v, k));
      if (s.component < 0) fail("synthesis.component must be >= 0");
    } else if (k == "scale_by_sd") {
      s.scale_by_sd = get_bool(v, k);
    } else if (k == "direction") {
      s.direction = get_path(v, k, base);
    } else if (k == "slices") {
      if (!v.is_array()) fail("synthesis.slices must be an array");
      for (const auto& e : v) {
        require_object(e, "synthesis.slices[]", {"axis", "index"});
        SliceSpec sl;
        if (e.contains("axis")) sl.axis = static_cast<int>(get_integer(e["axis"], "axis"));
        if (e.contains("index")) sl.index = get_unsigned(e["index"], "index");
        if (sl.axis < 0 || sl.axis > 2) fail("slice axis must be 0, 1 or 2");
        s.slices.push_back(sl);
      }
    }
  }
}

void parse_phantom(const json& j, PhantomSpec& p) {
  require_object(j, "phantom",
                 {"family", "dims", "count", "shift_step", "bump_sigma", "class_shift", "jitter",
                  "covariate_noise"});
  for (const auto& [k, v] : j.items()) {
    if (k == "family") {
      try {
        p.family = phantom_family_from_string(get_string(v, k));
      } catch (const Error& e) {
        fail(e.what());
      }
    } else if (k == "dims") {
      if (!v.is_array() || v.size() < 2 || v.size() > 3) fail("phantom.dims must have 2 or 3 entries");
      p.dims.clear();
      for (const auto& d : v) p.dims.push_back(get_unsigned(d, k));
    } else if (k == "count") {
      p.count = get_unsigned(v, k);
      if (p.count == 0) fail("phantom.count must be >= 1");
    } else if (k == "shift_step") {
      p.shift_step = get_number(v, k);
    } else if (k == "bump_sigma") {
      p.bump_sigma = get_number(v, k);
    } else if (k == "class_shift") {
      p.class_shift = get_number(v, k);
    } else if (k == "jitter") {
      p.jitter = get_number(v, k);
    } else if (k == "covariate_noise") {
      p.covariate_noise = get_number(v, k);
    }
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Pca: return "pca";
    case ModelKind::Regress: return "regress";
    case ModelKind::Plda: return "plda";
  }
  return "pca";
}

PipelineConfig parse_config(const json& j, const fs::path& base) {
  require_object(j, "config",
                 {"solver", "inputs", "model", "synthesis", "phantom", "out", "seed", "jobs"});
  PipelineConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "solver") parse_solver(v, c.solver);
    else if (k == "inputs") parse_inputs(v, c, base);
    else if (k == "model") parse_model(v, c.model);
    else if (k == "synthesis") parse_synthesis(v, c.synthesis, base);
    else if (k == "phantom") parse_phantom(v, c.phantom);
    else if (k == "out") c.out = get_path(v, k, base);
    else if (k == "seed") c.seed = get_unsigned(v, k);
    else if (k == "jobs") {
      c.jobs = static_cast<int>(get_integer(v, k));
      if (c.jobs < 1) fail("jobs must be >= 1");
    }
  }
  c.phantom.seed = c.seed;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  const SolverConfig& s = c.solver;
  json slices = json::array();
  for (const auto& sl : c.synthesis.slices) slices.push_back({{"axis", sl.axis}, {"index", sl.index}});
  json volumes = json::array();
  for (const auto& v : c.volumes) volumes.push_back(v.generic_string());
  json model = {{"kind", to_string(c.model.kind)},
                {"rank", c.model.rank},
                {"alpha_fraction", c.model.alpha_fraction},
                {"alpha_scan", c.model.alpha_scan},
                {"permutations", c.model.permutations}};
  if (c.model.alpha) model["alpha"] = *c.model.alpha;
  return {
      {"solver",
       {{"lambda", s.lambda},
        {"gamma", s.gamma},
        {"gamma_activation_fraction", s.gamma_activation_fraction},
        {"scales", s.scales},
        {"max_step_voxels", s.max_step_voxels},
        {"mse_termination", s.mse_termination},
        {"max_iters", s.max_iters},
        {"diffeo_min_det", s.diffeo_min_det},
        {"stagnation_window", s.stagnation_window},
        {"stagnation_tolerance", s.stagnation_tolerance},
        {"settle_tolerance", s.settle_tolerance},
        {"precondition_voxels", s.precondition_voxels}}},
      {"inputs",
       {{"volumes", volumes},
        {"directory", c.volume_dir.generic_string()},
        {"template", c.template_path.generic_string()},
        {"covariates", c.covariates.generic_string()}}},
      {"model", model},
      {"synthesis",
       {{"nus", c.synthesis.nus},
        {"component", c.synthesis.component},
        {"scale_by_sd", c.synthesis.scale_by_sd},
        {"direction", c.synthesis.direction.generic_string()},
        {"slices", slices}}},
      {"phantom",
       {{"family", to_string(c.phantom.family)},
        {"dims", c.phantom.dims},
        {"count", c.phantom.count},
        {"shift_step", c.phantom.shift_step},
        {"bump_sigma", c.phantom.bump_sigma},
        {"class_shift", c.phantom.class_shift},
        {"jitter", c.phantom.jitter},
        {"covariate_noise", c.phantom.covariate_noise}}},
      {"out", c.out.generic_string()},
      {"seed", c.seed},
      {"jobs", c.jobs},
  };
}

std::vector<fs::path> input_volumes(const PipelineConfig& cfg) {
  std::vector<fs::path> out = cfg.volumes;
  if (!cfg.volume_dir.empty()) {
    if (!fs::is_directory(cfg.volume_dir)) {
      throw Error(ErrorKind::IoError, "input directory not found: " + cfg.volume_dir.string());
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(cfg.volume_dir)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".tbmv" || ext == ".nii")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

}  // namespace tbm::cli
