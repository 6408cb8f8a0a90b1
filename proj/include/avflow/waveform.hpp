#ifndef AVFLOW_WAVEFORM_HPP
#define AVFLOW_WAVEFORM_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/mesh.hpp"

namespace avflow {

enum class FlowType { Splitting, Merging, OneWay };

inline const char* to_string(FlowType t) {
  switch (t) {
    case FlowType::Splitting: return "S";
    case FlowType::Merging: return "M";
    case FlowType::OneWay: return "O";
  }
  return "?";
}

enum class WaveformProvenance { Measured, Rectified };

namespace detail {

/// Periodic cubic spline through (t_i, y_i), period T, wrap value y(t_0+T) =
/// y_0. Stores second derivatives (moments); C1 across the seam. The cyclic
/// tridiagonal moment system is solved by Sherman–Morrison over two Thomas
/// sweeps.
class PeriodicSpline {
public:
  PeriodicSpline() = default;
  PeriodicSpline(std::vector<double> t, std::vector<double> y, double T)
      : t_(std::move(t)), y_(std::move(y)), T_(T) {
    const int n = static_cast<int>(t_.size());
    h_.resize(n);
    for (int i = 0; i + 1 < n; ++i) h_[i] = t_[i + 1] - t_[i];
    h_[n - 1] = T_ - t_[n - 1] + t_[0];  // seam interval
    std::vector<double> diag(n), rhs(n);
    auto yv = [&](int i) { return y_[(i % n + n) % n]; };
    auto hv = [&](int i) { return h_[(i % n + n) % n]; };
    for (int i = 0; i < n; ++i) {
      diag[i] = (hv(i - 1) + hv(i)) / 3.0;
      rhs[i] = (yv(i + 1) - yv(i)) / hv(i) - (yv(i) - yv(i - 1)) / hv(i - 1);
    }
    m_ = solve_cyclic(diag, rhs);
  }

  double eval(double t) const {
    const int n = static_cast<int>(t_.size());
    double tm = std::fmod(t, T_);
    if (tm < 0.0) tm += T_;
    if (tm < t_[0]) tm += T_;  // falls into the seam interval [t_{n-1}, t_0 + T]
    // locate interval: largest i with t_i <= tm
    int i = static_cast<int>(std::upper_bound(t_.begin(), t_.end(), tm) - t_.begin()) - 1;
    if (i < 0) i = 0;
    if (i >= n) i = n - 1;
    const double h = h_[i];
    const double t1 = t_[i] + h;
    const double y0 = y_[i], y1 = y_[(i + 1) % n];
    const double a = (t1 - tm) / h, b = (tm - t_[i]) / h;
    return m_[i] * h * h / 6.0 * (a * a * a - a) + m_[(i + 1) % n] * h * h / 6.0 * (b * b * b - b) +
           y0 * a + y1 * b;
  }

  /// Exact integral over one full period.
  double integral() const {
    const int n = static_cast<int>(t_.size());
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double h = h_[i];
      s += 0.5 * h * (y_[i] + y_[(i + 1) % n]) - h * h * h / 24.0 * (m_[i] + m_[(i + 1) % n]);
    }
    return s;
  }

private:
  // Cyclic tridiagonal solve (Sherman–Morrison over two Thomas sweeps).
  // Row i: sub_i m_{i-1} + diag_i m_i + sup_i m_{i+1} = rhs_i with wraparound
  // corners A[0][n-1] = sub_0 and A[n-1][0] = sup_{n-1}.
  std::vector<double> solve_cyclic(const std::vector<double>& diag,
                                   const std::vector<double>& rhs) const {
    const int n = static_cast<int>(diag.size());
    auto hv = [&](int i) { return h_[(i % n + n) % n]; };
    std::vector<double> sub(n), sup(n);
    for (int i = 0; i < n; ++i) {
      sub[i] = hv(i - 1) / 6.0;
      sup[i] = hv(i) / 6.0;
    }
    const double alpha = sub[0];
    const double beta = sup[n - 1];
    const double gamma = -diag[0];
    std::vector<double> d(diag);
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    auto thomas = [&](std::vector<double> b, std::vector<double> r) {
      for (int i = 1; i < n; ++i) {
        const double w = sub[i] / b[i - 1];
        b[i] -= w * sup[i - 1];
        r[i] -= w * r[i - 1];
      }
      r[n - 1] /= b[n - 1];
      for (int i = n - 2; i >= 0; --i) r[i] = (r[i] - sup[i] * r[i + 1]) / b[i];
      return r;
    };
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = alpha;
    auto x = thomas(d, rhs);
    auto z = thomas(d, u);
    const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    for (int i = 0; i < n; ++i) x[i] -= fact * z[i];
    return x;
  }

  std::vector<double> t_, y_, h_, m_;
  double T_ = 0.0;
};

}  // namespace detail

/// One boundary's volumetric flow-rate series over one period. Sign
/// convention: positive = outgoing through the boundary, negative = incoming.
class FlowWaveform {
public:
  FlowWaveform(PatchLabel boundary, std::vector<double> t, std::vector<double> q, double period,
               WaveformProvenance prov = WaveformProvenance::Measured)
      : boundary_(boundary), t_(std::move(t)), q_(std::move(q)), T_(period), prov_(prov) {
    if (t_.size() != q_.size()) throw InputError("waveform: time/value count mismatch");
    if (t_.size() < 4) throw InputError("waveform: need at least 4 samples");
    if (!(T_ > 0.0) || !std::isfinite(T_)) throw InputError("waveform: period must be positive");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(q_[i]))
        throw InputError("waveform: non-finite sample");
      if (t_[i] < 0.0 || t_[i] >= T_)
        throw InputError("waveform: sample times must lie in [0, period)");
      if (i > 0 && !(t_[i] > t_[i - 1]))
        throw InputError("waveform: sample times must be strictly increasing");
    }
    build_spline();
  }

  PatchLabel boundary() const { return boundary_; }
  double period() const { return T_; }
  WaveformProvenance provenance() const { return prov_; }
  int n_samples() const { return static_cast<int>(t_.size()); }
  const std::vector<double>& times() const { return t_; }
  const std::vector<double>& values() const { return q_; }

  /// Periodic cubic-spline evaluation at any t >= 0 (uses t mod period).
  double sample(double t) const { return spline_.eval(t); }

  /// Time average over one period with periodic trapezoidal weights on the
  /// sample grid (transform optional, e.g. fabs).
  double grid_mean(double (*f)(double) = nullptr) const {
    const int n = n_samples();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double h_prev = i == 0 ? T_ - t_[n - 1] + t_[0] : t_[i] - t_[i - 1];
      const double h_next = i == n - 1 ? T_ - t_[n - 1] + t_[0] : t_[i + 1] - t_[i];
      s += 0.5 * (h_prev + h_next) * (f ? f(q_[i]) : q_[i]);
    }
    return s / T_;
  }

private:
  void build_spline() { spline_ = detail::PeriodicSpline(t_, q_, T_); }

  PatchLabel boundary_;
  std::vector<double> t_, q_;
  double T_;
  WaveformProvenance prov_;
  detail::PeriodicSpline spline_;
};

/// The three boundary waveforms of one case, sharing a single period.
struct WaveformSet {
  FlowWaveform pa, da, fv;

  WaveformSet(FlowWaveform pa_, FlowWaveform da_, FlowWaveform fv_)
      : pa(std::move(pa_)), da(std::move(da_)), fv(std::move(fv_)) {
    if (pa.boundary() != PatchLabel::PA || da.boundary() != PatchLabel::DA ||
        fv.boundary() != PatchLabel::FV)
      throw InputError("waveform set: boundaries must be PA, DA, FV in order");
    if (pa.period() != da.period() || pa.period() != fv.period())
      throw InputError("waveform set: all boundaries must share one period");
  }
  double period() const { return pa.period(); }

  const FlowWaveform& operator[](PatchLabel l) const {
    switch (l) {
      case PatchLabel::PA: return pa;
      case PatchLabel::DA: return da;
      case PatchLabel::FV: return fv;
      default: throw InputError("waveform set: no waveform for WALL");
    }
  }
};

/// Replace DA by the mass-conservation closure Q_DA = -Q_FV - Q_PA at every
/// sample (exact); PA and FV pass through unchanged. Idempotent.
inline WaveformSet rectify(const WaveformSet& set) {
  std::vector<double> qda(set.pa.n_samples());
  if (set.pa.times() != set.fv.times())
    throw InputError("rectify: PA and FV must share sample times");
  for (int i = 0; i < set.pa.n_samples(); ++i)
    qda[i] = -(set.pa.values()[i] + set.fv.values()[i]);
  FlowWaveform da(PatchLabel::DA, set.pa.times(), std::move(qda), set.period(),
                  WaveformProvenance::Rectified);
  return WaveformSet(set.pa, std::move(da), set.fv);
}

/// Flow-type rule on the rectified set: m = time-mean of Q_DA, M0 = time-mean
/// of |Q_PA| (both with periodic trapezoidal weights on the sample grid).
/// |m| <= eps*M0 -> OneWay; m > 0 -> Splitting (DA outgoing); else Merging.
inline FlowType classify(const WaveformSet& set, double epsilon_rel = 0.05) {
  const double m = set.da.grid_mean();
  const double M0 = set.pa.grid_mean(&std::fabs);
  if (M0 <= 0.0) throw InputError("classify: no proximal inflow (mean |Q_PA| is zero)");
  if (std::fabs(m) <= epsilon_rel * M0) return FlowType::OneWay;
  return m > 0.0 ? FlowType::Splitting : FlowType::Merging;
}

/// Signed ratio m/M0 used in the classification report.
inline double mean_qda_rel(const WaveformSet& set) {
  const double M0 = set.pa.grid_mean(&std::fabs);
  if (M0 <= 0.0) throw InputError("classify: no proximal inflow (mean |Q_PA| is zero)");
  return set.da.grid_mean() / M0;
}

// ---------------------------------------------------------------------------
// CSV ingestion. Format: header `t_s,Q_PA_mL_min,Q_DA_mL_min,Q_FV_mL_min`,
// optional comment `# period_s=<T>`; values in mL/min, converted by 1e-6/60.
// Raw tokens are kept so `rectify` can re-emit untouched columns verbatim.
// ---------------------------------------------------------------------------

inline constexpr double kMlPerMinToM3PerS = 1e-6 / 60.0;

struct WaveformCsv {
  std::vector<std::string> t_tok, pa_tok, da_tok, fv_tok;  // verbatim tokens
  std::vector<double> t, pa, da, fv;                       // m^3/s after conversion
  double period = 0.0;
  std::string period_tok;  // empty if the period was inferred
  WaveformSet to_set() const {
    return WaveformSet(FlowWaveform(PatchLabel::PA, t, pa, period),
                       FlowWaveform(PatchLabel::DA, t, da, period),
                       FlowWaveform(PatchLabel::FV, t, fv, period));
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& tok, const std::string& path, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw InputError(path + ":" + std::to_string(lineno) + ": malformed number \"" + tok + "\"");
  }
}

}  // namespace detail

inline WaveformCsv parse_waveform_csv_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open waveform file " + path);
  WaveformCsv w;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string s = detail::trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      const std::string key = "period_s=";
      const auto pos = s.find(key);
      if (pos != std::string::npos) {
        w.period_tok = detail::trim(s.substr(pos + key.size()));
        w.period = detail::parse_number(w.period_tok, path, lineno);
      }
      continue;
    }
    // split on commas
    std::vector<std::string> cols;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(detail::trim(tok));
    if (!header_seen) {
      const std::vector<std::string> expect = {"t_s", "Q_PA_mL_min", "Q_DA_mL_min",
                                               "Q_FV_mL_min"};
      if (cols.size() != 4 || cols[0] != expect[0] || cols[1] != expect[1] ||
          cols[2] != expect[2] || cols[3] != expect[3])
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": expected header t_s,Q_PA_mL_min,Q_DA_mL_min,Q_FV_mL_min");
      header_seen = true;
      continue;
    }
    if (cols.size() != 4)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
                       std::to_string(cols.size()));
    const double t = detail::parse_number(cols[0], path, lineno);
    if (!w.t.empty() && !(t > w.t.back()))
      throw InputError(path + ":" + std::to_string(lineno) + ": non-monotone time");
    w.t_tok.push_back(cols[0]);
    w.pa_tok.push_back(cols[1]);
    w.da_tok.push_back(cols[2]);
    w.fv_tok.push_back(cols[3]);
    w.t.push_back(t);
    w.pa.push_back(detail::parse_number(cols[1], path, lineno) * kMlPerMinToM3PerS);
    w.da.push_back(detail::parse_number(cols[2], path, lineno) * kMlPerMinToM3PerS);
    w.fv.push_back(detail::parse_number(cols[3], path, lineno) * kMlPerMinToM3PerS);
  }
  if (!header_seen) throw InputError(path + ": missing header line");
  if (w.t.empty()) throw InputError(path + ": no samples");
  if (w.t.size() < 4) throw InputError(path + ": need at least 4 samples");
  if (w.period == 0.0) {
    if (w.t.size() < 2) throw InputError(path + ": cannot infer period from one sample");
    w.period = w.t.back() + (w.t[1] - w.t[0]);
  }
  return w;
}

inline WaveformSet parse_waveform_csv(const std::string& path) {
  return parse_waveform_csv_raw(path).to_set();
}

/// Rectified copy of a parsed CSV: t/PA/FV tokens verbatim, DA regenerated
/// from the closure in mL/min with shortest round-trip formatting.
inline void write_rectified_csv(const WaveformCsv& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write waveform file " + path);
  out << "# period_s=" << (w.period_tok.empty() ? format_shortest(w.period) : w.period_tok)
      << "\n";
  out << "t_s,Q_PA_mL_min,Q_DA_mL_min,Q_FV_mL_min\n";
  for (std::size_t i = 0; i < w.t.size(); ++i) {
    // Close the balance in the file's own unit from the verbatim tokens, so
    // no unit round trip can smear an exact decimal like 1 into 0.999...
    const double pa_ml = detail::parse_number(w.pa_tok[i], path, 0);
    const double fv_ml = detail::parse_number(w.fv_tok[i], path, 0);
    out << w.t_tok[i] << ',' << w.pa_tok[i] << ',' << format_shortest(-(pa_ml + fv_ml)) << ','
        << w.fv_tok[i] << "\n";
  }
  if (!out) throw InputError("write failed for waveform file " + path);
}

}  // namespace avflow

#endif  // AVFLOW_WAVEFORM_HPP
