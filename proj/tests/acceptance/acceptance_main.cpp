// Release gate. Each criterion prints measured values while it runs and ends
// with exactly one verdict line:
//
//   [PASS] name: measured values (gates)
//   [FAIL] name: what missed and by how much
//
// Usage: acceptance [criterion ...]   (no names = every criterion, in order)
// Exit code: number of failed criteria (2 for an unknown criterion name).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <Eigen/Dense>

#include "avflow/pipeline.hpp"

using namespace avflow;

namespace {

// ----------------------------------------------------------------- plumbing

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - t0)
             .count() /
         1000.0;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::filesystem::path work_dir() {
  auto d = std::filesystem::temp_directory_path() / "avflow_acceptance";
  std::filesystem::create_directories(d);
  return d;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("acceptance: cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int shell(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

WaveformSet make_set(const std::vector<double>& ts, const std::vector<double>& qpa,
                     const std::vector<double>& qda, const std::vector<double>& qfv, double T) {
  return WaveformSet(FlowWaveform(PatchLabel::PA, ts, qpa, T),
                     FlowWaveform(PatchLabel::DA, ts, qda, T),
                     FlowWaveform(PatchLabel::FV, ts, qfv, T));
}

// Worst |sum of boundary fluxes| / peak inflow seen by each benchmark run in
// this process; the mass criterion reports over everything recorded.
struct MassLedger {
  std::map<std::string, std::pair<double, long long>> sources;  // worst, steps
  void record(const std::string& source, double rel) {
    auto& e = sources[source];
    e.first = std::max(e.first, rel);
    e.second += 1;
  }
  double worst() const {
    double w = 0.0;
    for (const auto& [_, e] : sources) w = std::max(w, e.first);
    return w;
  }
  long long steps() const {
    long long n = 0;
    for (const auto& [_, e] : sources) n += e.second;
    return n;
  }
};
MassLedger g_mass;

// ------------------------------------------------------------- poiseuille

Verdict run_poiseuille() {
  const auto t0 = std::chrono::steady_clock::now();
  const double R = 2e-3, L = 2e-2, Q = 1e-5;
  const MaterialProps props;  // rho 1060, mu 2.66e-3
  const Mesh tube = generate_tube(R, L, 32, 16);
  std::printf("  mesh 32x16: %d nodes, %d tets\n", tube.n_nodes(), tube.n_tets());

  const int ns = 8;
  std::vector<double> ts(ns), qpa(ns, -Q), qda(ns, 0.0), qfv(ns, Q);
  for (int i = 0; i < ns; ++i) ts[i] = 1.0 * i / ns;
  const WaveformSet w = make_set(ts, qpa, qda, qfv, 1.0);

  // Stokes warm start: one giant implicit step lands on the creeping-flow
  // steady state, then a handful of advective steps settle the full momentum
  // balance (the change drops to round-off once steady).
  SimulationState st = SimulationState::zero(tube.n_nodes());
  {
    TimeScheme stokes;
    stokes.dt = 1e9;
    stokes.convective = false;
    auto [s1, rep] = Simulator(tube, props, stokes).advance(st, w);
    st = std::move(s1);
    std::printf("  stokes start: %d solver iterations\n", rep.linear_iterations);
  }
  st.step = 0;
  st.t = 0.0;
  {
    TimeScheme ns_scheme;
    ns_scheme.dt = 0.05;
    Simulator sim(tube, props, ns_scheme);
    for (int k = 0; k < 6; ++k) {
      auto [s1, rep] = sim.advance(st, w);
      st = std::move(s1);
      const double mass = mass_balance_residual(tube, st, Q);
      g_mass.record("poiseuille settle", mass);
      std::printf("  settle %d: picard %d, linear %d, mass %.2e\n", k + 1,
                  rep.picard_iterations, rep.linear_iterations, mass);
    }
  }

  // Centerline velocity at the axis node nearest mid-tube.
  int probe = 0;
  double best = 1e30;
  for (int i = 0; i < tube.n_nodes(); ++i) {
    const double d = norm(tube.node(i) - Vec3{L / 2, 0.0, 0.0});
    if (d < best) best = d, probe = i;
  }
  const double u_exact = 2.0 * Q / (kPi * R * R);
  const double u_rel = (st.u[probe].x - u_exact) / u_exact;

  const double dp = avg_pressure(tube, st, PatchLabel::PA) -
                    avg_pressure(tube, st, PatchLabel::FV);
  const double dp_exact = 8.0 * props.mu * L * Q / (kPi * R * R * R * R);
  const double dp_rel = (dp - dp_exact) / dp_exact;

  // Wall shear away from the in/outflow ends (area-weighted mid-tube mean).
  const WallShearField f = wss(tube, st, props);
  const auto& ids = tube.patch_facets(PatchLabel::WALL);
  double wsum = 0.0, asum = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const BoundaryFacet& fc = tube.boundary_facets()[ids[k]];
    if (fc.centroid.x < 0.25 * L || fc.centroid.x > 0.75 * L) continue;
    wsum += f.magnitude[k] * fc.area;
    asum += fc.area;
  }
  const double wss_exact = 4.0 * props.mu * Q / (kPi * R * R * R);
  const double wss_rel = (wsum / asum - wss_exact) / wss_exact;
  const double el = seconds_since(t0);

  std::printf("  centerline %.5f vs %.5f m/s, dp %.1f vs %.1f Pa, wss %.3f vs %.3f Pa\n",
              st.u[probe].x, u_exact, dp, dp_exact, wsum / asum, wss_exact);
  Verdict v;
  v.pass = std::abs(u_rel) <= 0.03 && std::abs(dp_rel) <= 0.05 && std::abs(wss_rel) <= 0.10 &&
           el <= 300.0;
  v.detail = fmt("centerline %+.2f%% (3%%), dp %+.2f%% (5%%), wss %+.2f%% (10%%), %.0f s (300 s)",
                 100 * u_rel, 100 * dp_rel, 100 * wss_rel, el);
  return v;
}

// ------------------------------------------------- womersley + periodicity

struct WomersleyData {
  bool ran = false;
  double amp_rel = 0.0;        // |amp_meas - amp_exact| / amp_exact
  double phase_frac = 0.0;     // |phase diff| / 2pi
  double alpha = 0.0;
  double end_snapshot_rel = 0.0;   // period-3 vs period-4 end state, L2
  double aggregate_rel = 0.0;      // whole-period aggregate L2
  double elapsed = 0.0;
};

std::complex<double> besselJ(int n, std::complex<double> z) {
  std::complex<double> term = std::pow(z * 0.5, n);
  for (int k = 1; k <= n; ++k) term /= static_cast<double>(k);
  std::complex<double> sum = term;
  for (int k = 1; k < 40; ++k) {
    term *= -(z * z * 0.25) / (static_cast<double>(k) * static_cast<double>(k + n));
    sum += term;
  }
  return sum;
}

const WomersleyData& womersley_run() {
  static WomersleyData d;
  if (d.ran) return d;
  const auto t0 = std::chrono::steady_clock::now();

  const double R = 2e-3, L = 2e-2, T = 1.0, Qa = 5e-7, dt = 5e-3;
  const int periods = 4;
  const MaterialProps props;
  const Mesh tube = generate_tube(R, L, 16, 14);
  TimeScheme scheme;
  scheme.dt = dt;
  scheme.theta = 0.5;  // second order in time for the oscillatory benchmark

  const int ns = 50;
  std::vector<double> ts(ns), qpa(ns), qda(ns, 0.0), qfv(ns);
  for (int i = 0; i < ns; ++i) {
    ts[i] = T * i / ns;
    qpa[i] = -Qa * std::cos(2.0 * kPi * ts[i] / T);
    qfv[i] = -qpa[i];
  }
  const WaveformSet w = make_set(ts, qpa, qda, qfv, T);

  int probe = 0;
  double best = 1e30;
  for (int i = 0; i < tube.n_nodes(); ++i) {
    const double dd = norm(tube.node(i) - Vec3{0.6 * L, 0.0, 0.0});
    if (dd < best) best = dd, probe = i;
  }
  std::printf("  mesh 16x14 (%d nodes), dt %.0f ms, theta 0.5, probe x = %.4g m\n",
              tube.n_nodes(), 1e3 * dt, tube.node(probe).x);

  Simulator sim(tube, props, scheme);
  SimulationState st = SimulationState::zero(tube.n_nodes());
  const int spp = static_cast<int>(std::llround(T / dt));
  std::vector<double> ux(spp);
  std::vector<std::vector<Vec3>> u3(spp);  // period-3 snapshots for periodicity
  double agg_num = 0.0, agg_den = 0.0;
  for (int p = 0; p < periods; ++p) {
    for (int s = 0; s < spp; ++s) {
      st = sim.advance(st, w).first;
      g_mass.record("womersley", mass_balance_residual(tube, st, Qa));
      if (p == periods - 2) u3[s] = st.u;
      if (p == periods - 1) {
        ux[s] = st.u[probe].x;
        double num = 0.0, den = 0.0;
        for (int i = 0; i < tube.n_nodes(); ++i) {
          const Vec3 dv = st.u[i] - u3[s][i];
          num += dot(dv, dv);
          den += dot(st.u[i], st.u[i]);
        }
        agg_num += num;
        agg_den += den;
        if (s == spp - 1) d.end_snapshot_rel = std::sqrt(num / den);
      }
    }
    std::printf("  period %d done, end-of-period mass %.2e\n", p + 1,
                mass_balance_residual(tube, st, Qa));
  }
  d.aggregate_rel = std::sqrt(agg_num / agg_den);

  // First-harmonic amplitude and phase at the probe, from the final period.
  std::complex<double> acc(0.0, 0.0);
  for (int s = 0; s < spp; ++s) {
    const double t = (s + 1) * dt;
    acc += ux[s] * std::exp(std::complex<double>(0.0, -2.0 * kPi * t / T));
  }
  acc *= 2.0 / spp;

  // Oscillatory pipe flow driven by Q(t) = Qa cos(wt): the centerline complex
  // amplitude follows from the J0/J1 profile with lambda = i^{3/2} alpha.
  const double nu = props.nu();
  d.alpha = R * std::sqrt(2.0 * kPi / T / nu);
  const std::complex<double> lam =
      std::pow(std::complex<double>(0.0, 1.0), 1.5) * d.alpha;
  const std::complex<double> J0 = besselJ(0, lam), J1 = besselJ(1, lam);
  const std::complex<double> u0 =
      (Qa / (kPi * R * R)) * (1.0 - 1.0 / J0) / (1.0 - 2.0 * J1 / (lam * J0));

  d.amp_rel = std::abs(std::abs(acc) - std::abs(u0)) / std::abs(u0);
  double dph = std::arg(acc) - std::arg(u0);
  while (dph > kPi) dph -= 2.0 * kPi;
  while (dph < -kPi) dph += 2.0 * kPi;
  d.phase_frac = std::abs(dph) / (2.0 * kPi);
  d.elapsed = seconds_since(t0);
  std::printf("  alpha %.3f, amplitude %.4e vs %.4e m/s, phase %.4f vs %.4f rad, %.0f s\n",
              d.alpha, std::abs(acc), std::abs(u0), std::arg(acc), std::arg(u0), d.elapsed);
  d.ran = true;
  return d;
}

Verdict run_womersley() {
  const WomersleyData& d = womersley_run();
  Verdict v;
  v.pass = d.amp_rel <= 0.05 && d.phase_frac <= 0.05;
  v.detail = fmt("alpha %.2f, amplitude err %.2f%% (5%%), phase err %.3f%% of 2pi (5%%)",
                 d.alpha, 100 * d.amp_rel, 100 * d.phase_frac);
  return v;
}

Verdict run_periodicity() {
  const WomersleyData& d = womersley_run();
  Verdict v;
  v.pass = d.end_snapshot_rel <= 0.01 && d.aggregate_rel <= 0.01;
  v.detail = fmt("period 3 vs 4: end snapshot L2 %.3e, whole-period %.3e (both 1e-2)",
                 d.end_snapshot_rel, d.aggregate_rel);
  return v;
}

// ------------------------------------------------------------------- mass

Verdict run_mass() {
  // Dedicated pulsatile tube run so this criterion stands alone; benchmarks
  // that already ran in this process contribute their recorded steps too.
  const auto t0 = std::chrono::steady_clock::now();
  const double R = 2e-3, L = 1.6e-2, T = 0.8, A = 5e-6, dt = 4e-3;
  const MaterialProps props;
  const Mesh tube = generate_tube(R, L, 12, 10);
  TimeScheme scheme;
  scheme.dt = dt;
  scheme.theta = 0.5;  // the harder case for flux balance

  const int ns = 40;
  std::vector<double> ts(ns), qpa(ns), qda(ns, 0.0), qfv(ns);
  double peak = 0.0;
  for (int i = 0; i < ns; ++i) {
    ts[i] = T * i / ns;
    const double q = A * (1.0 + 0.5 * std::cos(2.0 * kPi * ts[i] / T));
    qpa[i] = -q;
    qfv[i] = q;
    peak = std::max(peak, q);
  }
  const WaveformSet w = make_set(ts, qpa, qda, qfv, T);
  std::printf("  pulsatile tube 12x10 (%d nodes), %d steps/period, 2 periods\n",
              tube.n_nodes(), static_cast<int>(std::llround(T / dt)));

  Simulator sim(tube, props, scheme);
  SimulationState st = SimulationState::zero(tube.n_nodes());
  const int spp = static_cast<int>(std::llround(T / dt));
  for (int s = 0; s < 2 * spp; ++s) {
    st = sim.advance(st, w).first;
    g_mass.record("pulsatile tube", mass_balance_residual(tube, st, peak));
  }
  std::printf("  run took %.0f s\n", seconds_since(t0));

  for (const auto& [source, e] : g_mass.sources)
    std::printf("  %-18s worst %.3e over %lld steps\n", source.c_str(), e.first, e.second);
  Verdict v;
  v.pass = g_mass.worst() <= 5e-3 && g_mass.steps() > 0;
  v.detail = fmt("worst |sum of boundary fluxes| %.2e of peak inflow over %lld recorded steps "
                 "(5e-3)",
                 g_mass.worst(), g_mass.steps());
  return v;
}

// ---------------------------------------------------------- rectification

Verdict run_rectification() {
  const double T = 1.0, A = 1e-5;
  const int ns = 50;
  std::vector<double> ts(ns);
  for (int i = 0; i < ns; ++i) ts[i] = T * i / ns;
  auto q = [&](double t) {
    return A * (1.0 + 0.25 * std::cos(2.0 * kPi * t / T) + 0.1 * std::cos(4.0 * kPi * t / T));
  };

  // Three measured shapes: DA outflow, DA inflow (regurgitation), DA
  // near-zero with sign flips — each with an imperfect measured closure.
  std::vector<double> qpa(ns), s_da(ns), s_fv(ns), m_da(ns), m_fv(ns), o_da(ns), o_fv(ns);
  for (int i = 0; i < ns; ++i) {
    const double t = ts[i], qi = q(t), wob = 1.0 + 0.02 * std::sin(2.0 * kPi * t / T);
    qpa[i] = -qi;
    s_da[i] = 0.42 * qi;
    s_fv[i] = 0.58 * qi * wob;
    m_da[i] = -0.35 * qi * wob;
    m_fv[i] = 1.35 * qi;
    o_da[i] = 0.04 * A * std::sin(4.0 * kPi * t / T) + 0.005 * A * std::sin(2.0 * kPi * t / T);
    o_fv[i] = qi - o_da[i] * wob;
  }

  struct Case {
    const char* name;
    FlowType expect;
    WaveformSet set;
  };
  std::vector<Case> cases;
  cases.push_back({"DA-out", FlowType::Splitting, make_set(ts, qpa, s_da, s_fv, T)});
  cases.push_back({"DA-in", FlowType::Merging, make_set(ts, qpa, m_da, m_fv, T)});
  cases.push_back({"DA-zero", FlowType::OneWay, make_set(ts, qpa, o_da, o_fv, T)});

  bool ok = true;
  std::string notes;
  for (const auto& c : cases) {
    const WaveformSet r = rectify(c.set);
    // Per-sample closure to machine precision: DA is exactly the rounded
    // negative of PA + FV, so the recomputed sum matches bitwise.
    int exact = 0;
    for (int i = 0; i < ns; ++i)
      exact += (r.pa.values()[i] + r.fv.values()[i] == -r.da.values()[i]);
    // Idempotence, bitwise across all three series.
    const WaveformSet rr = rectify(r);
    const bool idem =
        std::memcmp(rr.pa.values().data(), r.pa.values().data(), ns * sizeof(double)) == 0 &&
        std::memcmp(rr.da.values().data(), r.da.values().data(), ns * sizeof(double)) == 0 &&
        std::memcmp(rr.fv.values().data(), r.fv.values().data(), ns * sizeof(double)) == 0;
    const FlowType got = classify(r);
    const double rel = mean_qda_rel(r);
    std::printf("  %-8s closure %d/%d exact, idempotent %s, classified %s (mean ratio %+.3f)\n",
                c.name, exact, ns, idem ? "yes" : "NO", to_string(got), rel);
    if (exact != ns || !idem || got != c.expect) {
      ok = false;
      notes += fmt(" %s wrong;", c.name);
    }
  }

  // The one-way DA series must actually flip sign (the taxonomy's marker).
  {
    const WaveformSet r = rectify(cases[2].set);
    int flips = 0;
    const auto& da = r.da.values();
    for (int i = 1; i < ns; ++i)
      if ((da[i] > 0) != (da[i - 1] > 0)) ++flips;
    std::printf("  DA-zero rectified series flips sign %d times\n", flips);
    if (flips < 2) ok = false, notes += " no DA sign flips;";
  }

  // Through the CSV surface: rectified file closes in its own written unit.
  {
    auto dir = work_dir();
    std::string csv = "# period_s=1\nt_s,Q_PA_mL_min,Q_DA_mL_min,Q_FV_mL_min\n";
    for (int i = 0; i < ns; ++i)
      csv += fmt("%.8g,%.8g,%.8g,%.8g\n", ts[i], qpa[i] * 6e7, s_da[i] * 6e7, s_fv[i] * 6e7);
    write_file(dir / "measured.csv", csv);
    const WaveformCsv raw = parse_waveform_csv_raw((dir / "measured.csv").string());
    write_rectified_csv(raw, (dir / "rectified.csv").string());
    const WaveformCsv rect = parse_waveform_csv_raw((dir / "rectified.csv").string());
    int exact = 0, passthrough = 0;
    for (int i = 0; i < ns; ++i) {
      const double pa_ml = std::stod(rect.pa_tok[i]);
      const double da_ml = std::stod(rect.da_tok[i]);
      const double fv_ml = std::stod(rect.fv_tok[i]);
      exact += (pa_ml + fv_ml == -da_ml);
      passthrough += (rect.pa_tok[i] == raw.pa_tok[i] && rect.fv_tok[i] == raw.fv_tok[i]);
    }
    std::printf("  CSV round trip: %d/%d rows close exactly, %d/%d PA/FV tokens verbatim\n",
                exact, ns, passthrough, ns);
    if (exact != ns || passthrough != ns) ok = false, notes += " CSV closure broken;";
  }

  Verdict v;
  v.pass = ok;
  v.detail = ok ? "S/M/O classified, per-sample closure exact, rectify idempotent, CSV verbatim"
              : "failed:" + notes;
  return v;
}

// ----------------------------------------------------------------- gpbicg

Verdict run_gpbicg() {
  bool ok = true;
  std::string notes;
  const int n = 200;
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> col(0, n - 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 16; ++k) A(i, col(rng)) += 0.4 * U(rng);  // nonsymmetric fill
      double off = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) off += std::abs(A(i, j));
      A(i, i) = (U(rng) > 0 ? 1.0 : -1.0) * (off + 1.0 + std::abs(U(rng)));  // dominant
    }
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = U(rng);

    std::vector<std::tuple<int, int, double>> trip;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (A(i, j) != 0.0) trip.emplace_back(i, j, A(i, j));
    const CsrMatrix M = CsrMatrix::from_triplets(n, trip);
    const std::vector<double> rhs(b.data(), b.data() + n);
    auto [x, rep] = gpbicg(M, rhs, std::vector<double>(n, 0.0), 1e-10, 5000, Precond::Jacobi);

    // True relative residual, recomputed from scratch, and the LU oracle.
    Eigen::VectorXd xe = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    const double resid = (A * xe - b).norm() / b.norm();
    const Eigen::VectorXd xlu = A.partialPivLu().solve(b);
    const double err = (xe - xlu).norm() / xlu.norm();
    std::printf("  seed %llu: %d iterations, true residual %.2e, vs dense LU %.2e\n",
                static_cast<unsigned long long>(seed), rep.iterations, resid, err);
    if (!rep.converged || resid > 1e-8 || err > 1e-8) {
      ok = false;
      notes += fmt(" seed %llu missed;", static_cast<unsigned long long>(seed));
    }
  }

  // Constructed defective case: singular and inconsistent. The solver must
  // report failure (no convergence or breakdown) with finite iterates.
  {
    std::vector<std::tuple<int, int, double>> trip = {
        {0, 0, 1.0}, {0, 1, -1.0}, {1, 0, 1.0}, {1, 1, -1.0}, {2, 2, 1.0}};
    const CsrMatrix M = CsrMatrix::from_triplets(3, trip);
    auto [x, rep] = gpbicg(M, {1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}, 1e-10, 200, Precond::Jacobi);
    const bool finite =
        std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
    std::printf("  singular case: converged=%s breakdown=%s finite=%s\n",
                rep.converged ? "yes" : "no", rep.breakdown ? "yes" : "no",
                finite ? "yes" : "no");
    if (rep.converged || !finite) ok = false, notes += " breakdown mishandled;";
  }

  Verdict v;
  v.pass = ok;
  v.detail = ok ? "3 random 200x200 systems at 1e-8 vs dense LU; singular case reported cleanly"
              : "failed:" + notes;
  return v;
}

// --------------------------------------------------------------- ordering

Verdict run_ordering() {
  // One junction mesh, equal total arterial inflow |Q_PA| and period across
  // the three waveform shapes; only the DA role changes. Expected orderings
  // are qualitative: dp(M) > dp(O) > dp(S) for the PA->FV time-averaged drop
  // over the final period, and the near-junction WSS peak highest for M.
  const double Ra = 2e-3, Rv = 1.5e-3, La = 2e-2, Lv = 8e-3;
  const double T = 0.8, A = 3e-6, dt = 2e-3;
  const int n_periods = 3;
  const MaterialProps props;
  const Mesh j = generate_junction(Ra, Rv, La, Lv, kPi / 3, 20, 3, 6);
  TimeScheme scheme;
  scheme.dt = dt;
  const int spp = static_cast<int>(std::llround(T / dt));
  std::printf("  junction mesh: %d nodes, %d tets; %d steps/period, %d periods per case\n",
              j.n_nodes(), j.n_tets(), spp, n_periods);

  const int ns = 40;
  std::vector<double> ts(ns);
  for (int i = 0; i < ns; ++i) ts[i] = T * i / ns;
  auto base_q = [&](double t) { return A * (1.0 + 0.25 * std::cos(2.0 * kPi * t / T)); };

  struct Case {
    const char* name;
    FlowType expect;
    std::vector<double> qpa, qda, qfv;
  };
  std::vector<Case> cases(3);
  cases[0] = {"S", FlowType::Splitting, {}, {}, {}};
  cases[1] = {"M", FlowType::Merging, {}, {}, {}};
  cases[2] = {"O", FlowType::OneWay, {}, {}, {}};
  for (int i = 0; i < ns; ++i) {
    const double t = ts[i], qi = base_q(t);
    cases[0].qpa.push_back(-qi);
    cases[0].qda.push_back(0.5 * qi);
    cases[0].qfv.push_back(0.5 * qi);
    cases[1].qpa.push_back(-qi);
    cases[1].qda.push_back(-0.35 * qi);  // regurgitating DA feeds the vein
    cases[1].qfv.push_back(1.35 * qi);
    const double osc = 0.04 * A * std::sin(4.0 * kPi * t / T);
    cases[2].qpa.push_back(-qi);
    cases[2].qda.push_back(osc);
    cases[2].qfv.push_back(qi - osc);
  }

  // Near-junction ball: the anastomosis crown the vein grows from.
  const Vec3 crown{La / 2.0, Ra, 0.0};
  const double ball = 2.5 * Rv;

  std::map<std::string, double> drop, peak_wss;
  bool ok = true;
  std::string notes;
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const WaveformSet w = make_set(ts, c.qpa, c.qda, c.qfv, T);
    const FlowType cls = classify(w);
    if (cls != c.expect) {
      ok = false;
      notes += fmt(" %s misclassified as %s;", c.name, to_string(cls));
    }

    Simulator sim(j, props, scheme);
    SimulationState st = SimulationState::zero(j.n_nodes());
    PressureTrace trace;
    double wmax = 0.0, worst_mass = 0.0;
    const double peak_in = 1.25 * A;
    for (int s = 0; s < n_periods * spp; ++s) {
      st = sim.advance(st, w).first;
      const double mass = mass_balance_residual(j, st, peak_in);
      worst_mass = std::max(worst_mass, mass);
      g_mass.record(fmt("junction %s", c.name), mass);
      if (s >= (n_periods - 1) * spp) {
        trace.append(st.t, j, st);
        const WallShearField f = wss(j, st, props);
        const auto& ids = j.patch_facets(PatchLabel::WALL);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const BoundaryFacet& fc = j.boundary_facets()[ids[k]];
          if (norm(fc.centroid - crown) <= ball) wmax = std::max(wmax, f.magnitude[k]);
        }
      }
    }
    drop[c.name] = time_avg_pressure_drop(trace, PatchLabel::PA, PatchLabel::FV);
    peak_wss[c.name] = wmax;
    std::printf("  case %s (%s): dp(PA->FV) %.1f Pa, near-junction peak WSS %.2f Pa, "
                "worst mass %.1e, %.0f s\n",
                c.name, to_string(c.expect), drop[c.name], wmax, worst_mass,
                seconds_since(t0));
    if (seconds_since(t0) > 1800.0) ok = false, notes += fmt(" %s over 30 min;", c.name);
  }

  if (!(drop["M"] > drop["O"] && drop["O"] > drop["S"]))
    ok = false, notes += " pressure-drop order broken;";
  if (!(peak_wss["M"] > peak_wss["S"] && peak_wss["M"] > peak_wss["O"]))
    ok = false, notes += " WSS peak not highest for M;";

  Verdict v;
  v.pass = ok;
  v.detail = fmt("dp M %.1f > O %.1f > S %.1f Pa; peak WSS M %.2f vs O %.2f, S %.2f Pa%s",
                 drop["M"], drop["O"], drop["S"], peak_wss["M"], peak_wss["O"], peak_wss["S"],
                 ok ? "" : (" —" + notes).c_str());
  return v;
}

// ------------------------------------------------------------ determinism

Verdict run_determinism() {
  const auto dir = work_dir() / "determinism";
  std::filesystem::create_directories(dir);
  std::string csv = "# period_s=0.2\nt_s,Q_PA_mL_min,Q_DA_mL_min,Q_FV_mL_min\n";
  for (int i = 0; i < 10; ++i) {
    const double t = 0.02 * i, q = 30.0 + 10.0 * std::cos(2.0 * kPi * t / 0.2);
    csv += fmt("%.10g,%.10g,%.10g,%.10g\n", t, -q, 0.0, q);
  }
  write_file(dir / "wave.csv", csv);
  write_file(dir / "run.json", R"json({
  "mesh": {"generator": "tube", "params": {"radius": 2e-3, "length": 8e-3, "n_axial": 6, "n_ring": 3}},
  "waveform_csv": "wave.csv",
  "time": {"dt": 0.02, "theta": 1.0, "n_periods": 2, "convective": true},
  "threads": 1,
  "output": {"dir": "out", "every_steps": 5, "wss_threshold_pa": 0.1}
})json");

  const std::string cmd = std::string(AVFLOW_CLI_PATH) + " run " + (dir / "run.json").string() +
                          " > " + (dir / "log.txt").string() + " 2>&1";
  if (shell(cmd) != 0) return {false, "first run failed — see " + (dir / "log.txt").string()};
  const std::string first = read_bytes(dir / "out" / "trace.csv");
  const std::string first_wss = read_bytes(dir / "out" / "wss.csv");
  if (shell(cmd) != 0) return {false, "second run failed"};
  const std::string second = read_bytes(dir / "out" / "trace.csv");
  const std::string second_wss = read_bytes(dir / "out" / "wss.csv");

  const bool same = first == second && first_wss == second_wss;
  std::printf("  two identical CLI runs: trace.csv %zu bytes %s, wss.csv %s\n", first.size(),
              first == second ? "identical" : "DIFFER",
              first_wss == second_wss ? "identical" : "DIFFER");
  return {same, same ? fmt("trace.csv byte-identical across runs (%zu bytes), wss.csv too",
                           first.size())
                     : "outputs differ between identical invocations"};
}

// ------------------------------------------------------------- vtk format

Verdict run_vtk_format() {
  const auto dir = work_dir() / "vtk";
  std::filesystem::create_directories(dir);

  // Golden bytes: frozen tiny snapshot (single tetrahedron, fixed state).
  std::vector<Vec3> nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<std::array<int, 4>> tets = {{0, 1, 2, 3}};
  std::vector<std::pair<std::array<int, 3>, PatchLabel>> facets = {
      {{0, 1, 2}, PatchLabel::WALL},
      {{0, 1, 3}, PatchLabel::WALL},
      {{0, 2, 3}, PatchLabel::WALL},
      {{1, 2, 3}, PatchLabel::WALL},
  };
  const Mesh tet(nodes, tets, facets);
  SimulationState gs = SimulationState::zero(4);
  gs.u = {{0.125, -1.5, 2.0}, {1.0 / 3.0, 0.0, -0.7}, {3.25, 4.5, 5.0}, {1e-9, -2e6, 0.0}};
  gs.p = {101.5, -3.0, 0.0, 7.0 / 3.0};
  gs.t = 0.625;
  gs.step = 17;
  write_vtk(tet, gs, (dir / "tiny.vtk").string());
  const std::string golden_path = std::string(AVFLOW_SOURCE_DIR) + "/tests/golden/tiny.vtk";
  const bool golden_ok = read_bytes(dir / "tiny.vtk") == read_bytes(golden_path);
  std::printf("  golden byte equality vs tests/golden/tiny.vtk: %s\n",
              golden_ok ? "identical" : "DIFFER");

  // Independent grammar validation of realistic files. No third-party VTK
  // viewer exists in this sandbox, so the external check is tools/
  // vtk_check.py — a standalone validator of the legacy format's structure
  // (section order, counts, arities, connectivity bounds, numeric tokens).
  const Mesh tube = generate_tube(1.5e-3, 6e-3, 4, 2);
  SimulationState ts = SimulationState::zero(tube.n_nodes());
  for (int i = 0; i < tube.n_nodes(); ++i) {
    ts.u[i] = Vec3{std::sin(0.3 * i), std::cos(0.2 * i), 0.1 * i};
    ts.p[i] = 133.3 * std::sin(0.05 * i);
  }
  ts.t = 0.125;
  ts.step = 3;
  write_vtk(tube, ts, (dir / "vol.vtk").string());
  write_wall_vtk(tube, wss(tube, ts, MaterialProps{}), (dir / "wall.vtk").string());
  const std::string cmd = "python3 " + std::string(AVFLOW_SOURCE_DIR) + "/tools/vtk_check.py " +
                          (dir / "tiny.vtk").string() + " " + (dir / "vol.vtk").string() + " " +
                          (dir / "wall.vtk").string();
  const int rc = shell(cmd);
  std::printf("  independent grammar validator exit code: %d (external viewer unavailable in "
              "sandbox; validator stands in)\n",
              rc);

  Verdict v;
  v.pass = golden_ok && rc == 0;
  v.detail = fmt("golden bytes %s, grammar validator %s (no external viewer in sandbox — "
                 "independent validator used)",
                 golden_ok ? "identical" : "DIFFER", rc == 0 ? "clean" : "rejected");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  using Runner = std::function<Verdict()>;
  const std::vector<std::pair<std::string, Runner>> catalog = {
      {"poiseuille", run_poiseuille},   {"womersley", run_womersley},
      {"mass", run_mass},               {"rectification", run_rectification},
      {"gpbicg", run_gpbicg},           {"ordering", run_ordering},
      {"periodicity", run_periodicity}, {"determinism", run_determinism},
      {"vtk_format", run_vtk_format},
  };

  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& name : wanted) {
    if (std::none_of(catalog.begin(), catalog.end(),
                     [&](const auto& c) { return c.first == name; })) {
      std::fprintf(stderr, "unknown criterion '%s'; available:", name.c_str());
      for (const auto& [n, _] : catalog) std::fprintf(stderr, " %s", n.c_str());
      std::fprintf(stderr, "\n");
      return 2;
    }
  }

  int failures = 0;
  for (const auto& [name, run] : catalog) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), name) == wanted.end())
      continue;
    std::printf("--- %s\n", name.c_str());
    std::fflush(stdout);
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures;
}
