#ifndef AVFLOW_CONFIG_HPP
#define AVFLOW_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avflow/common.hpp"
#include "avflow/fem.hpp"
#include "avflow/gmsh.hpp"
#include "avflow/inflow.hpp"
#include "avflow/mesh.hpp"
#include "avflow/mesh_generate.hpp"

namespace avflow {

using json = nlohmann::json;

struct MeshSource {
  std::string file;       // MSH path (exclusive with generator)
  std::string generator;  // "tube" | "box" | "junction"
  std::map<std::string, double> params;
  std::map<std::string, PatchLabel> labels = default_patch_names();
};

struct OutputConfig {
  std::string dir = "out";
  int every_steps = 25;  // snapshot/WSS cadence within the final period
  double wss_threshold_pa = 1.0;
};

struct SlicePlaneConfig {
  Vec3 origin, normal;
  int resolution = 20;
};

/// Whole-run configuration, loaded from a single JSON document. Relative
/// paths are resolved against the config file's directory.
struct RunConfig {
  MeshSource mesh;
  std::string waveform_csv;
  double period_s = 0.0;  // > 0 overrides the period declared/inferred by the CSV
  MaterialProps material;
  TimeScheme scheme;
  int n_periods = 3;
  StabilizationConfig stabilization;
  SolverConfig solver;
  PicardConfig picard;
  InflowKind inflow = InflowKind::Poisson;
  OutputConfig output;
  std::vector<SlicePlaneConfig> slices;
  int threads = 1;
  std::string restart_from;  // checkpoint path, empty = cold start
  bool checkpoint_every_period = true;

  std::uint64_t config_hash = 0;  // FNV-1a of the raw config document
};

namespace cfgio {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw InputError("config: " + path + ": " + msg);
}

inline void require_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
}

inline double get_number(const json& obj, const std::string& path, const std::string& key,
                         double fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) fail(path + "." + key, "missing required value");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

inline int get_int(const json& obj, const std::string& path, const std::string& key,
                   int fallback, bool required = false) {
  const double v = get_number(obj, path, key, fallback, required);
  if (v != std::floor(v)) fail(path + "." + key, "expected an integer");
  return static_cast<int>(v);
}

inline bool get_bool(const json& obj, const std::string& path, const std::string& key,
                     bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected true or false");
  return v.get<bool>();
}

inline std::string get_string(const json& obj, const std::string& path, const std::string& key,
                              const std::string& fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) fail(path + "." + key, "missing required value");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline Vec3 get_vec3(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required value");
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number())
    fail(path + "." + key, "expected [x, y, z]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path fp(p);
  return fp.is_absolute() ? fp.string() : (base / fp).string();
}

}  // namespace cfgio

/// Parse and validate a run configuration document.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw InputError("config: '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw InputError("config: '" + path + "': expected a JSON object");

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  RunConfig cfg;
  cfg.config_hash = fnv1a64(raw.data(), raw.size());

  cfgio::require_keys(doc, "",
                      {"mesh", "waveform_csv", "period_s", "material", "time", "stabilization",
                       "solver", "picard", "inflow_profile", "output", "slices", "threads",
                       "restart_from", "checkpoint_every_period"});

  // mesh
  if (!doc.contains("mesh") || !doc.at("mesh").is_object())
    cfgio::fail("mesh", "missing required object");
  {
    const json& m = doc.at("mesh");
    cfgio::require_keys(m, "mesh", {"file", "generator", "params", "labels"});
    cfg.mesh.file = cfgio::get_string(m, "mesh", "file", "");
    cfg.mesh.generator = cfgio::get_string(m, "mesh", "generator", "");
    if (cfg.mesh.file.empty() == cfg.mesh.generator.empty())
      cfgio::fail("mesh", "provide exactly one of 'file' or 'generator'");
    if (!cfg.mesh.file.empty()) {
      cfg.mesh.file = cfgio::resolve(base, cfg.mesh.file);
      if (!std::filesystem::exists(cfg.mesh.file))
        cfgio::fail("mesh.file", "'" + cfg.mesh.file + "' does not exist");
    } else if (cfg.mesh.generator != "tube" && cfg.mesh.generator != "box" &&
               cfg.mesh.generator != "junction") {
      cfgio::fail("mesh.generator", "expected 'tube', 'box', or 'junction'");
    }
    if (m.contains("params")) {
      if (!m.at("params").is_object()) cfgio::fail("mesh.params", "expected an object");
      for (const auto& [key, v] : m.at("params").items()) {
        if (!v.is_number()) cfgio::fail("mesh.params." + key, "expected a number");
        cfg.mesh.params[key] = v.get<double>();
      }
    }
    if (m.contains("labels")) {
      if (!m.at("labels").is_object()) cfgio::fail("mesh.labels", "expected an object");
      cfg.mesh.labels.clear();
      for (const auto& [key, v] : m.at("labels").items()) {
        if (!v.is_string()) cfgio::fail("mesh.labels." + key, "expected a patch label string");
        const auto lbl = patch_label_from_string(v.get<std::string>());
        if (!lbl) cfgio::fail("mesh.labels." + key, "expected one of PA, DA, FV, WALL");
        cfg.mesh.labels[key] = *lbl;
      }
    }
  }

  // waveform
  cfg.waveform_csv = cfgio::get_string(doc, "", "waveform_csv", "", true);
  cfg.waveform_csv = cfgio::resolve(base, cfg.waveform_csv);
  if (!std::filesystem::exists(cfg.waveform_csv))
    cfgio::fail("waveform_csv", "'" + cfg.waveform_csv + "' does not exist");
  cfg.period_s = cfgio::get_number(doc, "", "period_s", 0.0);
  if (doc.contains("period_s") && !(cfg.period_s > 0.0))
    cfgio::fail("period_s", "must be positive");

  // material
  if (doc.contains("material")) {
    const json& m = doc.at("material");
    if (!m.is_object()) cfgio::fail("material", "expected an object");
    cfgio::require_keys(m, "material", {"rho", "mu"});
    cfg.material.rho = cfgio::get_number(m, "material", "rho", cfg.material.rho);
    cfg.material.mu = cfgio::get_number(m, "material", "mu", cfg.material.mu);
    if (!(cfg.material.rho > 0.0)) cfgio::fail("material.rho", "must be positive");
    if (!(cfg.material.mu > 0.0)) cfgio::fail("material.mu", "must be positive");
  }

  // time
  if (doc.contains("time")) {
    const json& m = doc.at("time");
    if (!m.is_object()) cfgio::fail("time", "expected an object");
    cfgio::require_keys(m, "time", {"dt", "theta", "n_periods", "convective"});
    cfg.scheme.dt = cfgio::get_number(m, "time", "dt", cfg.scheme.dt);
    cfg.scheme.theta = cfgio::get_number(m, "time", "theta", cfg.scheme.theta);
    cfg.scheme.convective = cfgio::get_bool(m, "time", "convective", true);
    cfg.n_periods = cfgio::get_int(m, "time", "n_periods", cfg.n_periods);
    if (!(cfg.scheme.dt > 0.0)) cfgio::fail("time.dt", "must be positive");
    if (cfg.scheme.theta < 0.5 || cfg.scheme.theta > 1.0)
      cfgio::fail("time.theta", "must lie in [0.5, 1]");
    if (cfg.n_periods < 1) cfgio::fail("time.n_periods", "must be at least 1");
  }

  // stabilization
  if (doc.contains("stabilization")) {
    const json& m = doc.at("stabilization");
    if (!m.is_object()) cfgio::fail("stabilization", "expected an object");
    cfgio::require_keys(m, "stabilization", {"supg", "pspg", "lsic"});
    cfg.stabilization.supg = cfgio::get_bool(m, "stabilization", "supg", true);
    cfg.stabilization.pspg = cfgio::get_bool(m, "stabilization", "pspg", true);
    cfg.stabilization.lsic = cfgio::get_bool(m, "stabilization", "lsic", true);
  }

  // solver
  if (doc.contains("solver")) {
    const json& m = doc.at("solver");
    if (!m.is_object()) cfgio::fail("solver", "expected an object");
    cfgio::require_keys(m, "solver", {"tol", "max_iter", "preconditioner"});
    cfg.solver.tol = cfgio::get_number(m, "solver", "tol", cfg.solver.tol);
    cfg.solver.max_iter = cfgio::get_int(m, "solver", "max_iter", cfg.solver.max_iter);
    const std::string pc = cfgio::get_string(m, "solver", "preconditioner", "jacobi");
    if (pc == "jacobi")
      cfg.solver.precond = Precond::Jacobi;
    else if (pc == "none")
      cfg.solver.precond = Precond::None;
    else
      cfgio::fail("solver.preconditioner", "expected 'jacobi' or 'none'");
    if (!(cfg.solver.tol > 0.0)) cfgio::fail("solver.tol", "must be positive");
    if (cfg.solver.max_iter < 1) cfgio::fail("solver.max_iter", "must be at least 1");
  }

  // picard
  if (doc.contains("picard")) {
    const json& m = doc.at("picard");
    if (!m.is_object()) cfgio::fail("picard", "expected an object");
    cfgio::require_keys(m, "picard", {"max_iterations", "tolerance"});
    cfg.picard.max_iterations =
        cfgio::get_int(m, "picard", "max_iterations", cfg.picard.max_iterations);
    cfg.picard.tolerance = cfgio::get_number(m, "picard", "tolerance", cfg.picard.tolerance);
    if (cfg.picard.max_iterations < 1) cfgio::fail("picard.max_iterations", "must be at least 1");
    if (!(cfg.picard.tolerance > 0.0)) cfgio::fail("picard.tolerance", "must be positive");
  }

  // inflow profile
  {
    const std::string kind = cfgio::get_string(doc, "", "inflow_profile", "poisson");
    if (kind == "poisson")
      cfg.inflow = InflowKind::Poisson;
    else if (kind == "flat")
      cfg.inflow = InflowKind::Flat;
    else
      cfgio::fail("inflow_profile", "expected 'poisson' or 'flat'");
  }

  // output
  if (doc.contains("output")) {
    const json& m = doc.at("output");
    if (!m.is_object()) cfgio::fail("output", "expected an object");
    cfgio::require_keys(m, "output", {"dir", "every_steps", "wss_threshold_pa"});
    cfg.output.dir = cfgio::get_string(m, "output", "dir", cfg.output.dir);
    cfg.output.every_steps = cfgio::get_int(m, "output", "every_steps", cfg.output.every_steps);
    cfg.output.wss_threshold_pa =
        cfgio::get_number(m, "output", "wss_threshold_pa", cfg.output.wss_threshold_pa);
    if (cfg.output.every_steps < 1) cfgio::fail("output.every_steps", "must be at least 1");
    if (!(cfg.output.wss_threshold_pa >= 0.0))
      cfgio::fail("output.wss_threshold_pa", "must be nonnegative");
  }
  cfg.output.dir = cfgio::resolve(base, cfg.output.dir);

  // slices
  if (doc.contains("slices")) {
    const json& arr = doc.at("slices");
    if (!arr.is_array()) cfgio::fail("slices", "expected an array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string p = "slices[" + std::to_string(k) + "]";
      const json& s = arr[k];
      if (!s.is_object()) cfgio::fail(p, "expected an object");
      cfgio::require_keys(s, p, {"origin", "normal", "resolution"});
      SlicePlaneConfig sp;
      sp.origin = cfgio::get_vec3(s, p, "origin");
      sp.normal = cfgio::get_vec3(s, p, "normal");
      sp.resolution = cfgio::get_int(s, p, "resolution", sp.resolution);
      if (sp.resolution < 2) cfgio::fail(p + ".resolution", "must be at least 2");
      if (!(norm(sp.normal) > 0.0)) cfgio::fail(p + ".normal", "must be nonzero");
      cfg.slices.push_back(sp);
    }
  }

  cfg.threads = cfgio::get_int(doc, "", "threads", 1);
  if (cfg.threads < 1) cfgio::fail("threads", "must be at least 1");

  cfg.restart_from = cfgio::get_string(doc, "", "restart_from", "");
  if (!cfg.restart_from.empty()) {
    cfg.restart_from = cfgio::resolve(base, cfg.restart_from);
    if (!std::filesystem::exists(cfg.restart_from))
      cfgio::fail("restart_from", "'" + cfg.restart_from + "' does not exist");
  }
  cfg.checkpoint_every_period = cfgio::get_bool(doc, "", "checkpoint_every_period", true);

  return cfg;
}

/// Instantiate the mesh named by the config (generator or MSH file).
inline Mesh build_mesh(const MeshSource& src) {
  if (!src.file.empty()) return load_gmsh(src.file, src.labels);

  auto need = [&](const char* key) {
    const auto it = src.params.find(key);
    if (it == src.params.end())
      cfgio::fail(std::string("mesh.params.") + key, "missing required value");
    return it->second;
  };
  auto need_int = [&](const char* key) {
    const double v = need(key);
    if (v != std::floor(v)) cfgio::fail(std::string("mesh.params.") + key, "expected an integer");
    return static_cast<int>(v);
  };

  if (src.generator == "tube")
    return generate_tube(need("radius"), need("length"), need_int("n_axial"),
                         need_int("n_ring"));
  if (src.generator == "box")
    return generate_box(need("lx"), need("ly"), need("lz"), need_int("nx"), need_int("ny"),
                        need_int("nz"));
  if (src.generator == "junction")
    return generate_junction(need("radius_a"), need("radius_v"), need("length_a"),
                             need("length_v"), need("angle_rad"), need_int("n_axial"),
                             need_int("n_ring"), need_int("n_vein"));
  throw InputError("config: mesh.generator: unknown generator '" + src.generator + "'");
}

}  // namespace avflow

#endif  // AVFLOW_CONFIG_HPP
