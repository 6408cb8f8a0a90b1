#ifndef AVFLOW_PIPELINE_HPP
#define AVFLOW_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "avflow/config.hpp"
#include "avflow/post.hpp"
#include "avflow/timeloop.hpp"
#include "avflow/vtk.hpp"
#include "avflow/waveform.hpp"

namespace avflow {

inline constexpr char kVersionString[] = "0.1.0";

// -------------------------------------------------------------- logging

/// Line-oriented logger: plain text by default, one JSON object per line
/// with --json-logs (keys sorted, so identical runs log identically).
class Logger {
public:
  Logger(std::ostream& out, bool as_json) : out_(&out), json_(as_json) {}

  void event(const std::string& name, const json& fields) const {
    if (json_) {
      json doc = fields;
      doc["event"] = name;
      (*out_) << doc.dump() << '\n';
    } else {
      (*out_) << name;
      for (const auto& [key, v] : fields.items()) {
        (*out_) << ' ' << key << '=';
        if (v.is_string())
          (*out_) << v.get<std::string>();
        else
          (*out_) << v.dump();
      }
      (*out_) << '\n';
    }
  }

private:
  std::ostream* out_;
  bool json_;
};

namespace pipe {

inline std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Hash of everything that determines the trajectory (checkpoint
/// compatibility): mesh source, waveforms, physics, and numerics — but not
/// output settings or the restart path itself.
inline std::uint64_t physics_hash(const RunConfig& cfg, const WaveformCsv& wave) {
  std::string s;
  s += "mesh=" + cfg.mesh.file + "|" + cfg.mesh.generator + ";";
  for (const auto& [key, v] : cfg.mesh.params) s += key + "=" + format_shortest(v) + ";";
  for (const auto& [key, v] : cfg.mesh.labels) s += key + ">" + to_string(v) + ";";
  for (std::size_t i = 0; i < wave.t.size(); ++i) {
    s += format_shortest(wave.t[i]) + "," + format_shortest(wave.pa[i]) + "," +
         format_shortest(wave.da[i]) + "," + format_shortest(wave.fv[i]) + ";";
  }
  s += "T=" + format_shortest(wave.period) + ";";
  s += "rho=" + format_shortest(cfg.material.rho) + ";mu=" + format_shortest(cfg.material.mu) +
       ";dt=" + format_shortest(cfg.scheme.dt) + ";theta=" + format_shortest(cfg.scheme.theta) +
       ";conv=" + std::to_string(cfg.scheme.convective) +
       ";supg=" + std::to_string(cfg.stabilization.supg) +
       ";pspg=" + std::to_string(cfg.stabilization.pspg) +
       ";lsic=" + std::to_string(cfg.stabilization.lsic) +
       ";tol=" + format_shortest(cfg.solver.tol) +
       ";maxit=" + std::to_string(cfg.solver.max_iter) +
       ";pc=" + std::to_string(static_cast<int>(cfg.solver.precond)) +
       ";picard=" + std::to_string(cfg.picard.max_iterations) + "," +
       format_shortest(cfg.picard.tolerance) +
       ";inflow=" + std::to_string(static_cast<int>(cfg.inflow)) +
       ";threads=" + std::to_string(cfg.threads);
  return fnv1a64(s.data(), s.size());
}

inline void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw InputError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw InputError("cannot move '" + tmp + "' into place");
}

inline void write_slice_csv(const std::string& path, const SliceSample& s) {
  std::string out = "u_m,v_m,x_m,y_m,z_m,ux_m_s,uy_m_s,uz_m_s,p_Pa,inside\n";
  const int res = s.resolution;
  for (int iv = 0; iv < res; ++iv)
    for (int iu = 0; iu < res; ++iu) {
      const std::size_t at = static_cast<std::size_t>(iv) * res + iu;
      const Vec3 d = s.points[at] - s.origin;
      out += format_shortest(dot(d, s.e1)) + ',' + format_shortest(dot(d, s.e2)) + ',' +
             format_shortest(s.points[at].x) + ',' + format_shortest(s.points[at].y) + ',' +
             format_shortest(s.points[at].z) + ',' + format_shortest(s.velocity[at].x) + ',' +
             format_shortest(s.velocity[at].y) + ',' + format_shortest(s.velocity[at].z) + ',' +
             format_shortest(s.pressure[at]) + ',' + std::to_string(int(s.inside[at])) + '\n';
    }
  write_text_atomic(path, out);
}

}  // namespace pipe

// -------------------------------------------------------------- rectify/classify

struct ClassificationReport {
  FlowType type = FlowType::OneWay;
  double mean_qda_rel = 0.0;  // mean Q_DA / mean |Q_PA|
  int n_samples = 0;
  double period = 0.0;
};

inline ClassificationReport classification_report(const WaveformSet& set) {
  ClassificationReport r;
  r.type = classify(set);
  r.mean_qda_rel = mean_qda_rel(set);
  r.n_samples = set.pa.n_samples();
  r.period = set.period();
  return r;
}

inline void print_classification(const Logger& log, const ClassificationReport& r) {
  log.event("classification", {{"type", to_string(r.type)},
                               {"mean_qda_rel", r.mean_qda_rel},
                               {"samples", r.n_samples},
                               {"period_s", r.period}});
  // The one-line contract consumed by scripts:
  log.event("type=" + std::string(to_string(r.type)), json::object());
}

/// `classify`: report the flow configuration of a waveform CSV.
inline ClassificationReport cmd_classify(const std::string& csv_path, const Logger& log) {
  const WaveformSet set = parse_waveform_csv_raw(csv_path).to_set();
  const ClassificationReport r = classification_report(set);
  print_classification(log, r);
  return r;
}

/// `rectify`: enforce mass conservation onto the DA column and classify the
/// rectified set. PA/FV columns pass through byte-for-byte.
inline ClassificationReport cmd_rectify(const std::string& input_csv,
                                        const std::string& output_csv, const Logger& log) {
  const WaveformCsv raw = parse_waveform_csv_raw(input_csv);
  write_rectified_csv(raw, output_csv);
  const ClassificationReport r = classification_report(rectify(raw.to_set()));
  print_classification(log, r);
  return r;
}

// -------------------------------------------------------------- mesh info

inline json mesh_info_json(const Mesh& mesh) {
  json labels = json::object();
  for (PatchLabel l : {PatchLabel::PA, PatchLabel::DA, PatchLabel::FV, PatchLabel::WALL}) {
    if (!mesh.has_label(l)) continue;
    labels[to_string(l)] = {{"facets", mesh.facet_count(l)},
                            {"area_m2", mesh.patch_area(l)},
                            {"nodes", mesh.patch_nodes(l).size()}};
  }
  double hmin = 0.0, hmax = 0.0, hsum = 0.0;
  for (int e = 0; e < mesh.n_tets(); ++e) {
    const double h = mesh.characteristic_length(e);
    if (e == 0) hmin = hmax = h;
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, h);
    hsum += h;
  }
  const Vec3 lo = mesh.bbox_min();
  const Vec3 hi = mesh.bbox_max();
  return {{"nodes", mesh.n_nodes()},
          {"tets", mesh.n_tets()},
          {"boundary_facets", mesh.n_boundary_facets()},
          {"volume_m3", mesh.total_volume()},
          {"h_e_min_m", hmin},
          {"h_e_max_m", hmax},
          {"h_e_mean_m", mesh.n_tets() ? hsum / mesh.n_tets() : 0.0},
          {"bbox_lo_m", {lo.x, lo.y, lo.z}},
          {"bbox_hi_m", {hi.x, hi.y, hi.z}},
          {"patches", labels}};
}

/// `mesh-info`: structural report for an MSH file (human-readable lines, or
/// a single JSON document with --json-logs).
inline json cmd_mesh_info(const std::string& mesh_path, const Logger& log, bool as_json) {
  const Mesh mesh = load_gmsh(mesh_path);
  const json info = mesh_info_json(mesh);
  if (as_json) {
    std::cout << info.dump(2) << '\n';
  } else {
    log.event("mesh", {{"file", mesh_path},
                       {"nodes", info["nodes"]},
                       {"tets", info["tets"]},
                       {"boundary_facets", info["boundary_facets"]},
                       {"volume_m3", info["volume_m3"]}});
    log.event("mesh.h_e", {{"min_m", info["h_e_min_m"]},
                           {"max_m", info["h_e_max_m"]},
                           {"mean_m", info["h_e_mean_m"]}});
    for (const auto& [name, p] : info["patches"].items())
      log.event("mesh.patch." + name,
                {{"facets", p["facets"]}, {"area_m2", p["area_m2"]}, {"nodes", p["nodes"]}});
  }
  return info;
}

// -------------------------------------------------------------- run

struct PeriodStats {
  int period = 0;
  long long linear_iterations = 0;
  long long picard_iterations = 0;
  int steps = 0;
  double max_mass_residual = 0.0;
};

struct RunResult {
  SimulationState final_state;
  PressureTrace trace;                  // final period, every step
  std::vector<PeriodStats> period_stats;
  std::vector<std::string> emitted;     // paths relative to output dir
  ClassificationReport classification;
  int steps_per_period = 0;
  double peak_inflow = 0.0;             // max |Q_PA| over the sample grid (m^3/s)
  double max_recorded_mass_residual = 0.0;
  std::string manifest_path;
};

/// `run`: full simulation lifecycle — mesh, rectified waveforms, time loop
/// with per-step logging, final-period recording, checkpoints, manifest.
inline RunResult cmd_run(const RunConfig& cfg, const Logger& log) {
  const std::string started = pipe::iso_timestamp();

  const Mesh mesh = build_mesh(cfg.mesh);
  WaveformCsv raw = parse_waveform_csv_raw(cfg.waveform_csv);
  if (cfg.period_s > 0.0) {
    if (cfg.period_s <= raw.t.back())
      throw InputError("config: period_s: must exceed the last waveform sample time " +
                       format_shortest(raw.t.back()));
    raw.period = cfg.period_s;
    raw.period_tok.clear();
  }
  const WaveformSet waveforms = rectify(raw.to_set());
  RunResult res;
  res.classification = classification_report(waveforms);

  const double T = waveforms.period();
  const double dt = cfg.scheme.dt;
  const auto spp = static_cast<int>(std::llround(T / dt));
  if (spp < 1 || std::abs(spp * dt - T) > 1e-9 * T)
    throw InputError("config: time.dt: period " + format_shortest(T) +
                     " s is not an integer multiple of dt = " + format_shortest(dt) + " s");
  res.steps_per_period = spp;
  const long long total_steps = static_cast<long long>(spp) * cfg.n_periods;

  for (double q : waveforms.pa.values()) res.peak_inflow = std::max(res.peak_inflow, std::abs(q));
  if (!(res.peak_inflow > 0.0))
    throw InputError("waveform: no proximal inflow (all Q_PA samples are zero)");

  std::filesystem::create_directories(cfg.output.dir);
  const std::filesystem::path outdir(cfg.output.dir);

  const std::uint64_t traj_hash = pipe::physics_hash(cfg, raw);
  Simulator sim(mesh, cfg.material, cfg.scheme, cfg.stabilization, cfg.picard, cfg.solver,
                cfg.inflow, cfg.threads);

  SimulationState state = SimulationState::zero(mesh.n_nodes());
  if (!cfg.restart_from.empty()) {
    state = checkpoint::read(cfg.restart_from, traj_hash, mesh.n_nodes());
    if (state.step % spp != 0)
      throw InputError("checkpoint: '" + cfg.restart_from +
                       "' does not sit on a period boundary (step " +
                       std::to_string(state.step) + ", " + std::to_string(spp) +
                       " steps per period)");
    if (state.step >= total_steps)
      throw InputError("checkpoint: '" + cfg.restart_from + "' is already at or past step " +
                       std::to_string(total_steps));
  }

  print_classification(log, res.classification);
  log.event("run.start", {{"nodes", mesh.n_nodes()},
                          {"tets", mesh.n_tets()},
                          {"steps_per_period", spp},
                          {"n_periods", cfg.n_periods},
                          {"from_step", state.step},
                          {"threads", cfg.threads},
                          {"config_hash", hex64(cfg.config_hash)}});

  // WSS summary CSV accumulates rows at snapshot cadence in the final period.
  std::string wss_csv = "t_s,wss_max_Pa,wss_mean_Pa,wss_area_gt_threshold_m2\n";

  res.period_stats.resize(cfg.n_periods);
  for (int p = 0; p < cfg.n_periods; ++p) res.period_stats[p].period = p + 1;

  const long long first_final_step = static_cast<long long>(spp) * (cfg.n_periods - 1);
  while (state.step < total_steps) {
    auto [next, rep] = sim.advance(state, waveforms);
    next.period = (next.step - 1) / spp + 1;
    state = std::move(next);

    const double mass = mass_balance_residual(mesh, state, res.peak_inflow);
    PeriodStats& ps = res.period_stats[state.period - 1];
    ps.steps += 1;
    ps.linear_iterations += rep.linear_iterations;
    ps.picard_iterations += rep.picard_iterations;
    ps.max_mass_residual = std::max(ps.max_mass_residual, mass);

    log.event("step", {{"step", state.step},
                       {"total", total_steps},
                       {"t_s", state.t},
                       {"period", state.period},
                       {"picard", rep.picard_iterations},
                       {"linear_iterations", rep.linear_iterations},
                       {"residual", rep.linear_residual},
                       {"mass_residual", mass}});

    const bool in_final = state.step > first_final_step;
    if (in_final) {
      res.trace.append(state.t, mesh, state);
      res.max_recorded_mass_residual = std::max(res.max_recorded_mass_residual, mass);
      const long long s1 = state.step - first_final_step;  // 1..spp within final period
      if (s1 % cfg.output.every_steps == 0 || s1 == spp) {
        const std::string stem = "snapshot_" + std::to_string(state.step);
        write_vtk(mesh, state, (outdir / (stem + ".vtk")).string());
        res.emitted.push_back(stem + ".vtk");
        const WallShearField field = wss(mesh, state, cfg.material);
        write_wall_vtk(mesh, field, (outdir / (stem + "_wall.vtk")).string());
        res.emitted.push_back(stem + "_wall.vtk");
        wss_csv += format_shortest(state.t) + ',' + format_shortest(field.max_magnitude()) +
                   ',' + format_shortest(wss_mean(mesh, field)) + ',' +
                   format_shortest(wss_area_above(mesh, field, cfg.output.wss_threshold_pa)) +
                   '\n';
      }
    }

    if (cfg.checkpoint_every_period && state.step % spp == 0) {
      const std::string name = "checkpoint_period" + std::to_string(state.period) + ".ckpt";
      checkpoint::write((outdir / name).string(), state, traj_hash);
      res.emitted.push_back(name);
      log.event("checkpoint", {{"file", name}, {"step", state.step}});
    }
  }

  // Trace CSV (every final-period step) and WSS summary.
  {
    std::string csv = "t_s,p_PA_Pa,p_DA_Pa,p_FV_Pa\n";
    for (std::size_t k = 0; k < res.trace.t.size(); ++k)
      csv += format_shortest(res.trace.t[k]) + ',' + format_shortest(res.trace.p_pa[k]) + ',' +
             format_shortest(res.trace.p_da[k]) + ',' + format_shortest(res.trace.p_fv[k]) +
             '\n';
    pipe::write_text_atomic((outdir / "trace.csv").string(), csv);
    res.emitted.push_back("trace.csv");
    pipe::write_text_atomic((outdir / "wss.csv").string(), wss_csv);
    res.emitted.push_back("wss.csv");
  }

  // Slices from the final state.
  for (std::size_t k = 0; k < cfg.slices.size(); ++k) {
    const auto& sp = cfg.slices[k];
    const SliceSample s = slice_velocity(mesh, state, sp.origin, sp.normal, sp.resolution);
    const std::string name = "slice_" + std::to_string(k) + ".csv";
    pipe::write_slice_csv((outdir / name).string(), s);
    res.emitted.push_back(name);
  }

  // Manifest (atomic; differs between identical runs only in timestamps).
  {
    json periods = json::array();
    for (const auto& ps : res.period_stats)
      periods.push_back({{"period", ps.period},
                         {"steps", ps.steps},
                         {"picard_iterations", ps.picard_iterations},
                         {"linear_iterations", ps.linear_iterations},
                         {"max_mass_residual", ps.max_mass_residual}});
    const json manifest = {{"version", kVersionString},
                           {"config_hash", hex64(cfg.config_hash)},
                           {"trajectory_hash", hex64(traj_hash)},
                           {"started", started},
                           {"finished", pipe::iso_timestamp()},
                           {"threads", cfg.threads},
                           {"classification", to_string(res.classification.type)},
                           {"steps_per_period", spp},
                           {"n_periods", cfg.n_periods},
                           {"peak_inflow_m3_s", res.peak_inflow},
                           {"periods", periods},
                           {"emitted", res.emitted}};
    res.manifest_path = (outdir / "manifest.json").string();
    pipe::write_text_atomic(res.manifest_path, manifest.dump(2) + "\n");
  }

  log.event("run.done", {{"steps", total_steps},
                         {"max_recorded_mass_residual", res.max_recorded_mass_residual},
                         {"manifest", res.manifest_path}});
  res.final_state = std::move(state);
  return res;
}

// -------------------------------------------------------------- post

/// `post`: re-derive postprocessing outputs from a checkpoint written by
/// `run` (same config document). Emits a snapshot pair, a one-row WSS
/// summary, slice samples, and logs patch pressures and fluxes.
inline std::vector<std::string> cmd_post(const RunConfig& cfg, const std::string& checkpoint_path,
                                         const Logger& log) {
  const Mesh mesh = build_mesh(cfg.mesh);
  WaveformCsv raw = parse_waveform_csv_raw(cfg.waveform_csv);
  if (cfg.period_s > 0.0) {
    raw.period = cfg.period_s;
    raw.period_tok.clear();
  }
  const std::uint64_t traj_hash = pipe::physics_hash(cfg, raw);
  const SimulationState state = checkpoint::read(checkpoint_path, traj_hash, mesh.n_nodes());

  std::filesystem::create_directories(cfg.output.dir);
  const std::filesystem::path outdir(cfg.output.dir);
  std::vector<std::string> emitted;

  const std::string stem = "post_step" + std::to_string(state.step);
  write_vtk(mesh, state, (outdir / (stem + ".vtk")).string());
  emitted.push_back(stem + ".vtk");
  const WallShearField field = wss(mesh, state, cfg.material);
  write_wall_vtk(mesh, field, (outdir / (stem + "_wall.vtk")).string());
  emitted.push_back(stem + "_wall.vtk");

  std::string wss_csv = "t_s,wss_max_Pa,wss_mean_Pa,wss_area_gt_threshold_m2\n";
  wss_csv += format_shortest(state.t) + ',' + format_shortest(field.max_magnitude()) + ',' +
             format_shortest(wss_mean(mesh, field)) + ',' +
             format_shortest(wss_area_above(mesh, field, cfg.output.wss_threshold_pa)) + '\n';
  pipe::write_text_atomic((outdir / (stem + "_wss.csv")).string(), wss_csv);
  emitted.push_back(stem + "_wss.csv");

  for (std::size_t k = 0; k < cfg.slices.size(); ++k) {
    const auto& sp = cfg.slices[k];
    const SliceSample s = slice_velocity(mesh, state, sp.origin, sp.normal, sp.resolution);
    const std::string name = stem + "_slice_" + std::to_string(k) + ".csv";
    pipe::write_slice_csv((outdir / name).string(), s);
    emitted.push_back(name);
  }

  for (PatchLabel l : {PatchLabel::PA, PatchLabel::DA, PatchLabel::FV}) {
    if (!mesh.has_label(l)) continue;
    log.event("post.patch", {{"patch", to_string(l)},
                             {"avg_pressure_Pa", avg_pressure(mesh, state, l)},
                             {"flux_m3_s", boundary_flux(mesh, state, l)}});
  }
  log.event("post.done", {{"step", state.step}, {"t_s", state.t}, {"files", emitted.size()}});
  return emitted;
}

}  // namespace avflow

#endif  // AVFLOW_PIPELINE_HPP
