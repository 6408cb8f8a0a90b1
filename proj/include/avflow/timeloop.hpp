#ifndef AVFLOW_TIMELOOP_HPP
#define AVFLOW_TIMELOOP_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/fem.hpp"
#include "avflow/inflow.hpp"
#include "avflow/krylov.hpp"
#include "avflow/mesh.hpp"
#include "avflow/waveform.hpp"

namespace avflow {

struct StepReport {
  int picard_iterations = 0;
  int linear_iterations = 0;   // summed over Picard sweeps
  double linear_residual = 0.0;  // last solve
  double picard_change = 0.0;    // last relative iterate change
};

/// One-step integrator. Velocity Dirichlet data comes from the waveform set
/// at t^{n+1}: the PA patch always, the DA patch when the mesh has one; the
/// FV patch is left traction-free. Inflow shapes are solved once at
/// construction and rescaled per step, so each step costs assembly + Picard
/// solves only.
class Simulator {
public:
  Simulator(const Mesh& mesh, MaterialProps props, TimeScheme scheme,
            StabilizationConfig stab = {}, PicardConfig picard = {}, SolverConfig solver = {},
            InflowKind inflow = InflowKind::Poisson, int threads = 1)
      : mesh_(mesh),
        props_(props),
        scheme_(scheme),
        picard_(picard),
        solver_(solver),
        threads_(threads),
        assembler_(mesh, stab, threads) {
    props_.validate();
    scheme_.validate();
    mesh_.require_simulation_patches();
    profiles_.emplace_back(mesh_, PatchLabel::PA, inflow);
    if (mesh_.has_label(PatchLabel::DA))
      profiles_.emplace_back(mesh_, PatchLabel::DA, inflow);
  }

  const Mesh& mesh() const { return mesh_; }
  const MaterialProps& props() const { return props_; }
  const TimeScheme& scheme() const { return scheme_; }

  /// Dirichlet set for time t (inflow patches from the waveforms, wall zero).
  DirichletSet dirichlet_at(const WaveformSet& waveforms, double t) const {
    std::vector<const InflowProfile*> profs;
    std::vector<double> rates;
    for (const auto& p : profiles_) {
      profs.push_back(&p);
      rates.push_back(waveforms[p.label()].sample(t));
    }
    return build_dirichlet(mesh_, profs, rates);
  }

  /// Advance one theta step with Picard linearization (at most
  /// `picard.max_iterations` sweeps, stopping early once the relative change
  /// of the iterate drops below `picard.tolerance`).
  std::pair<SimulationState, StepReport> advance(const SimulationState& state,
                                                 const WaveformSet& waveforms) const {
    const double t_new = (state.step + 1) * scheme_.dt;
    const DirichletSet bc = dirichlet_at(waveforms, t_new);

    StepReport rep;
    std::vector<Vec3> ustar = state.u;  // Picard iterate, seeded from u^n
    std::vector<double> x = assembler_.initial_guess(state, bc);
    const int sweeps = scheme_.convective ? picard_.max_iterations : 1;
    for (int it = 0; it < sweeps; ++it) {
      SparseSystem sys = assembler_.assemble(state, ustar, props_, scheme_, bc);
      auto [xs, srep] = gpbicg(sys.A, sys.b, x, solver_.tol, solver_.max_iter,
                               solver_.precond, threads_);
      if (!srep.converged)
        throw NumericalError(
            "step " + std::to_string(state.step + 1) + " (t=" + format_shortest(t_new) +
            " s): linear solve " + (srep.breakdown ? "broke down" : "did not converge") +
            " after " + std::to_string(srep.iterations) + " iterations (residual " +
            format_shortest(srep.residual) + ")");
      ++rep.picard_iterations;
      rep.linear_iterations += srep.iterations;
      rep.linear_residual = srep.residual;

      // Relative iterate change ||x_new - x_old|| / ||x_new||.
      double dn = 0.0, xn = 0.0;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double d = xs[k] - x[k];
        dn += d * d;
        xn += xs[k] * xs[k];
      }
      rep.picard_change = (xn > 0.0) ? std::sqrt(dn / xn) : 0.0;
      x = std::move(xs);
      for (int i = 0; i < mesh_.n_nodes(); ++i)
        ustar[i] = {x[4 * i + 0], x[4 * i + 1], x[4 * i + 2]};
      if (rep.picard_change <= picard_.tolerance) break;
    }

    SimulationState next;
    next.u = std::move(ustar);
    next.p.resize(mesh_.n_nodes());
    for (int i = 0; i < mesh_.n_nodes(); ++i) next.p[i] = x[4 * i + 3];
    next.t = t_new;
    next.step = state.step + 1;
    next.period = state.period;
    next.check_finite();
    return {std::move(next), rep};
  }

private:
  Mesh mesh_;
  MaterialProps props_;
  TimeScheme scheme_;
  PicardConfig picard_;
  SolverConfig solver_;
  int threads_;
  Assembler assembler_;
  std::vector<InflowProfile> profiles_;
};

/// Op-shaped convenience wrapper (tests build a fresh Simulator per call).
inline std::pair<SimulationState, StepReport> advance(
    const Mesh& mesh, const SimulationState& state, const WaveformSet& waveforms,
    const MaterialProps& props, const TimeScheme& scheme, StabilizationConfig stab = {},
    PicardConfig picard = {}, SolverConfig solver = {}) {
  return Simulator(mesh, props, scheme, stab, picard, solver).advance(state, waveforms);
}

// -------------------------------------------------------------- checkpoints

/// Binary checkpoint: magic, version, config hash, step/period counters and
/// the full double-precision state, closed by an FNV-1a checksum over the
/// payload. Restarting from it reproduces subsequent steps bit-identically.
namespace checkpoint {

inline constexpr char kMagic[8] = {'A', 'V', 'F', 'W', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

template <class T>
void put(std::string& buf, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& at, const std::string& path) {
  if (at + sizeof(T) > buf.size())
    throw InputError("checkpoint: '" + path + "' is truncated");
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}

}  // namespace detail

inline void write(const std::string& path, const SimulationState& state,
                  std::uint64_t config_hash) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  detail::put(buf, kVersion);
  detail::put(buf, config_hash);
  detail::put(buf, static_cast<std::int64_t>(state.step));
  detail::put(buf, static_cast<std::int64_t>(state.period));
  detail::put(buf, state.t);
  detail::put(buf, static_cast<std::int64_t>(state.u.size()));
  for (const Vec3& v : state.u) {
    detail::put(buf, v.x);
    detail::put(buf, v.y);
    detail::put(buf, v.z);
  }
  for (double v : state.p) detail::put(buf, v);
  const std::uint64_t sum = fnv1a64(buf.data(), buf.size());
  detail::put(buf, sum);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("checkpoint: cannot open '" + tmp + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw InputError("checkpoint: write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw InputError("checkpoint: cannot move '" + tmp + "' into place");
}

inline SimulationState read(const std::string& path, std::uint64_t expected_hash,
                            int expected_nodes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw InputError("checkpoint: '" + path + "' is truncated");

  const std::uint64_t stored = fnv1a64(buf.data(), buf.size() - sizeof(std::uint64_t));
  std::size_t tail = buf.size() - sizeof(std::uint64_t);
  if (detail::get<std::uint64_t>(buf, tail, path) != stored)
    throw InputError("checkpoint: '" + path + "' failed its checksum");

  std::size_t at = 0;
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw InputError("checkpoint: '" + path + "' is not a checkpoint file");
  at += sizeof(kMagic);
  if (detail::get<std::uint32_t>(buf, at, path) != kVersion)
    throw InputError("checkpoint: '" + path + "' has an unsupported version");
  const std::uint64_t hash = detail::get<std::uint64_t>(buf, at, path);
  if (hash != expected_hash)
    throw InputError("checkpoint: '" + path + "' was produced by a different configuration");

  SimulationState s;
  s.step = static_cast<int>(detail::get<std::int64_t>(buf, at, path));
  s.period = static_cast<int>(detail::get<std::int64_t>(buf, at, path));
  s.t = detail::get<double>(buf, at, path);
  const auto n = detail::get<std::int64_t>(buf, at, path);
  if (n != expected_nodes)
    throw InputError("checkpoint: '" + path + "' holds " + std::to_string(n) +
                     " nodes but the mesh has " + std::to_string(expected_nodes));
  s.u.resize(n);
  for (auto& v : s.u) {
    v.x = detail::get<double>(buf, at, path);
    v.y = detail::get<double>(buf, at, path);
    v.z = detail::get<double>(buf, at, path);
  }
  s.p.resize(n);
  for (auto& v : s.p) v = detail::get<double>(buf, at, path);
  s.check_finite();
  return s;
}

}  // namespace checkpoint

}  // namespace avflow

#endif  // AVFLOW_TIMELOOP_HPP
