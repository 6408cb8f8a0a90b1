#ifndef AVFLOW_KRYLOV_HPP
#define AVFLOW_KRYLOV_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "avflow/common.hpp"

namespace avflow {

/// Compressed-row sparse matrix (general, nonsymmetric). Column indices are
/// sorted and unique within each row.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1, monotone
  std::vector<int> col;
  std::vector<double> val;

  void validate() const {
    if (n < 0 || static_cast<int>(row_ptr.size()) != n + 1 || row_ptr[0] != 0)
      throw InputError("csr: bad row offsets");
    if (col.size() != val.size() || static_cast<std::size_t>(row_ptr[n]) != col.size())
      throw InputError("csr: offsets inconsistent with entry count");
    for (int i = 0; i < n; ++i) {
      if (row_ptr[i + 1] < row_ptr[i]) throw InputError("csr: offsets not monotone");
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        if (col[k] < 0 || col[k] >= n) throw InputError("csr: column index out of range");
        if (k > row_ptr[i] && col[k] <= col[k - 1])
          throw InputError("csr: columns not sorted/unique in row " + std::to_string(i));
        if (!std::isfinite(val[k])) throw InputError("csr: non-finite value");
      }
    }
  }

  static CsrMatrix from_triplets(int n, std::vector<std::tuple<int, int, double>> trip) {
    std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    CsrMatrix A;
    A.n = n;
    A.row_ptr.assign(n + 1, 0);
    for (std::size_t k = 0; k < trip.size(); ++k) {
      const auto& [i, j, v] = trip[k];
      if (i < 0 || i >= n || j < 0 || j >= n) throw InputError("csr: triplet index out of range");
      if (!A.col.empty() && i == std::get<0>(trip[k - 1]) && j == std::get<1>(trip[k - 1])) {
        A.val.back() += v;  // merge duplicates
        continue;
      }
      A.col.push_back(j);
      A.val.push_back(v);
      A.row_ptr[i + 1]++;
    }
    for (int i = 0; i < n; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
    return A;
  }
};

struct SparseSystem {
  CsrMatrix A;
  std::vector<double> b;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // true relative residual, recomputed at exit
  bool converged = false;
  bool breakdown = false;
};

enum class Precond { None, Jacobi };

/// y = A x, row dot-products evaluated sequentially in index order. Rows are
/// independent, so row-parallel execution is bit-identical for any thread
/// count.
inline void spmv(const CsrMatrix& A, const std::vector<double>& x, std::vector<double>& y,
                 int threads = 1) {
  y.resize(A.n);
  parallel_for(A.n, threads, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      double s = 0.0;
      for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) s += A.val[k] * x[A.col[k]];
      y[i] = s;
    }
  });
}

inline std::vector<double> spmv(const CsrMatrix& A, const std::vector<double>& x,
                                int threads = 1) {
  std::vector<double> y;
  spmv(A, x, y, threads);
  return y;
}

/// Reciprocal diagonal of A; a zero diagonal entry is an input error.
inline std::vector<double> jacobi_precondition(const CsrMatrix& A) {
  std::vector<double> inv_diag(A.n, 0.0);
  for (int i = 0; i < A.n; ++i) {
    double d = 0.0;
    for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
      if (A.col[k] == i) {
        d = A.val[k];
        break;
      }
    if (d == 0.0)
      throw InputError("jacobi preconditioner: zero diagonal entry at row " + std::to_string(i));
    inv_diag[i] = 1.0 / d;
  }
  return inv_diag;
}

/// GPBi-CG (Zhang's product-type recurrence). Right preconditioning: the
/// operator is v -> A(M^-1 v), so the recurrence residual stays the true
/// residual b - Ax throughout; it is additionally recomputed from scratch
/// every 50 iterations and once at exit for the report. Near-zero inner
/// products (|d| < 1e-300) stop the iteration with breakdown reported.
inline std::pair<std::vector<double>, SolveReport> gpbicg(const CsrMatrix& A,
                                                          const std::vector<double>& b,
                                                          std::vector<double> x0,
                                                          double tol = 1e-8,
                                                          int max_iter = 5000,
                                                          Precond precond = Precond::Jacobi,
                                                          int threads = 1) {
  constexpr double kBreak = 1e-300;
  const int n = A.n;
  if (n < 1) throw InputError("gpbicg: empty system");
  if (static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
    throw InputError("gpbicg: dimension mismatch");

  SolveReport rep;
  const double bnorm = std::sqrt(blocked_dot(b, b));
  if (bnorm == 0.0) return {std::vector<double>(n, 0.0), SolveReport{0, 0.0, true, false}};

  std::vector<double> inv_diag;
  if (precond == Precond::Jacobi) inv_diag = jacobi_precondition(A);

  // Iterate `xs` lives in the preconditioned variable (xs = D x for Jacobi).
  std::vector<double> xs = std::move(x0);
  if (precond == Precond::Jacobi)
    for (int i = 0; i < n; ++i) xs[i] /= inv_diag[i];

  std::vector<double> tmp(n), opv(n);
  auto op = [&](const std::vector<double>& v, std::vector<double>& out) {
    if (precond == Precond::Jacobi) {
      for (int i = 0; i < n; ++i) tmp[i] = inv_diag[i] * v[i];
      spmv(A, tmp, out, threads);
    } else {
      spmv(A, v, out, threads);
    }
  };
  auto unprecondition = [&](std::vector<double> v) {
    if (precond == Precond::Jacobi)
      for (int i = 0; i < n; ++i) v[i] *= inv_diag[i];
    return v;
  };
  auto finish = [&](int iters, bool broke) {
    std::vector<double> x = unprecondition(xs);
    std::vector<double> ax = spmv(A, x, threads);
    for (int i = 0; i < n; ++i) ax[i] = b[i] - ax[i];
    rep.iterations = iters;
    rep.residual = std::sqrt(blocked_dot(ax, ax)) / bnorm;
    rep.converged = rep.residual <= tol;
    rep.breakdown = broke;
    return std::make_pair(std::move(x), rep);
  };

  std::vector<double> r(n), r0(n), y(n), u(n, 0.0), z(n, 0.0), w(n, 0.0), p(n, 0.0), q(n);
  op(xs, opv);
  for (int i = 0; i < n; ++i) r[i] = b[i] - opv[i];
  r0 = r;
  for (int i = 0; i < n; ++i) y[i] = -r0[i];
  double rho0 = blocked_dot(r0, r0);
  double beta = 0.0;
  const double tol_abs = tol * bnorm;

  if (std::sqrt(rho0) <= tol_abs) return finish(0, false);

  for (int iter = 1; iter <= max_iter; ++iter) {
    // p = r + beta (p - u); u = y + beta u
    for (int i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - u[i]);
    for (int i = 0; i < n; ++i) u[i] = y[i] + beta * u[i];
    op(p, q);
    const double pap = blocked_dot(r0, q);
    if (std::fabs(pap) < kBreak) return finish(iter, true);
    const double alpha = rho0 / pap;
    // y = y + alpha (q - w); r = r - alpha q; x = x + alpha p
    for (int i = 0; i < n; ++i) y[i] += alpha * (q[i] - w[i]);
    for (int i = 0; i < n; ++i) r[i] -= alpha * q[i];
    for (int i = 0; i < n; ++i) xs[i] += alpha * p[i];
    if (std::sqrt(blocked_dot(r, r)) <= tol_abs) return finish(iter, false);

    op(r, w);  // w = A t_n with t_n the half-step residual now in r
    const double AA = blocked_dot(w, w);
    const double yy = blocked_dot(y, y);
    const double Ay = blocked_dot(w, y);
    const double At = blocked_dot(w, r);
    const double yt = blocked_dot(y, r);
    double zeta, eta;
    if (iter == 1) {
      if (std::fabs(AA) < kBreak) return finish(iter, true);
      zeta = At / AA;
      eta = 0.0;
    } else {
      const double den = AA * yy - Ay * Ay;
      if (std::fabs(den) < kBreak) return finish(iter, true);
      zeta = (yy * At - Ay * yt) / den;
      eta = (AA * yt - At * Ay) / den;
    }
    if (std::fabs(zeta) < kBreak) return finish(iter, true);
    // z = zeta r + eta (z - alpha u); x = x + z
    for (int i = 0; i < n; ++i) z[i] = zeta * r[i] + eta * (z[i] - alpha * u[i]);
    for (int i = 0; i < n; ++i) xs[i] += z[i];
    // y = eta y + zeta w; r = r - y; u = zeta q + eta u
    for (int i = 0; i < n; ++i) y[i] = eta * y[i] + zeta * w[i];
    for (int i = 0; i < n; ++i) r[i] -= y[i];
    for (int i = 0; i < n; ++i) u[i] = zeta * q[i] + eta * u[i];
    const double rho1 = blocked_dot(r0, r);
    if (std::fabs(rho0) < kBreak) return finish(iter, true);
    beta = (alpha / zeta) * (rho1 / rho0);
    rho0 = rho1;
    for (int i = 0; i < n; ++i) w[i] += beta * q[i];

    if (iter % 50 == 0) {  // guard recurrence drift with the true residual
      op(xs, opv);
      for (int i = 0; i < n; ++i) r[i] = b[i] - opv[i];
    }
    if (std::sqrt(blocked_dot(r, r)) <= tol_abs) return finish(iter, false);
  }
  return finish(max_iter, false);
}

/// Matrix Market coordinate dump (1-based, general real) for offline debugging.
inline void write_matrix_market(const CsrMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write matrix file " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.n << ' ' << A.n << ' ' << A.row_ptr[A.n] << "\n";
  for (int i = 0; i < A.n; ++i)
    for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
      out << (i + 1) << ' ' << (A.col[k] + 1) << ' ' << format_shortest(A.val[k]) << "\n";
  if (!out) throw InputError("write failed for matrix file " + path);
}

}  // namespace avflow

#endif  // AVFLOW_KRYLOV_HPP
