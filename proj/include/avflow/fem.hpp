#ifndef AVFLOW_FEM_HPP
#define AVFLOW_FEM_HPP

#include <array>
#include <cmath>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/krylov.hpp"
#include "avflow/mesh.hpp"

namespace avflow {

struct MaterialProps {
  double rho = 1060.0;   // kg/m^3
  double mu = 2.66e-3;   // Pa s

  void validate() const {
    if (!(rho > 0.0) || !(mu > 0.0))
      throw InputError("material: rho and mu must be positive");
  }
  double nu() const { return mu / rho; }
};

/// Theta time integration (1 = implicit Euler, 0.5 = Crank-Nicolson) with
/// Picard linearization of convection. Pressure is fully implicit.
struct TimeScheme {
  double dt = 2e-4;      // s
  double theta = 1.0;    // in [0.5, 1]
  bool convective = true;  // false = Stokes limit (benchmarks)

  void validate() const {
    if (!(dt > 0.0)) throw InputError("time scheme: dt must be positive");
    if (theta < 0.5 || theta > 1.0)
      throw InputError("time scheme: theta must lie in [0.5, 1]");
  }
};

struct StabilizationConfig {
  bool supg = true;
  bool pspg = true;
  bool lsic = true;
};

struct PicardConfig {
  int max_iterations = 3;
  double tolerance = 1e-3;  // relative iterate change
};

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 5000;
  Precond precond = Precond::Jacobi;
};

/// Nodal velocity + pressure snapshot. Immutable between steps.
struct SimulationState {
  std::vector<Vec3> u;
  std::vector<double> p;
  double t = 0.0;
  int step = 0;
  int period = 0;

  static SimulationState zero(int n_nodes) {
    SimulationState s;
    s.u.assign(n_nodes, Vec3{});
    s.p.assign(n_nodes, 0.0);
    return s;
  }

  void check_finite() const {
    for (const auto& v : u)
      if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
        throw NumericalError("state: non-finite velocity at step " + std::to_string(step));
    for (double v : p)
      if (!std::isfinite(v))
        throw NumericalError("state: non-finite pressure at step " + std::to_string(step));
  }
};

/// Strong velocity constraints covering the inflow patches and the rigid
/// wall. Later additions override earlier ones, so the builder applies inflow
/// fragments first and wall zeros last (shared rim nodes end up no-slip).
class DirichletSet {
public:
  explicit DirichletSet(int n_nodes) : constrained_(n_nodes, 0), value_(n_nodes) {}

  void set(int node, const Vec3& v) {
    constrained_[node] = 1;
    value_[node] = v;
  }
  bool is_constrained(int node) const { return constrained_[node] != 0; }
  const Vec3& value(int node) const { return value_[node]; }
  int n_nodes() const { return static_cast<int>(constrained_.size()); }

  int count() const {
    int c = 0;
    for (auto f : constrained_) c += f;
    return c;
  }

private:
  std::vector<std::uint8_t> constrained_;
  std::vector<Vec3> value_;
};

// -------------------------------------------------------------- tau

/// tau_supg = [(2/dt)^2 + (2|u|/h)^2 + (4 nu/h^2)^2]^(-1/2). Pass dt =
/// infinity for the steady limit. tau_pspg uses the same value.
inline double tau_supg(double h_e, double u_norm, double nu, double dt) {
  const double a = 2.0 / dt;
  const double b = 2.0 * u_norm / h_e;
  const double c = 4.0 * nu / (h_e * h_e);
  return 1.0 / std::sqrt(a * a + b * b + c * c);
}

inline double tau_lsic(double h_e, double u_norm) { return 0.5 * u_norm * h_e; }

// -------------------------------------------------------------- assembler

/// Builds the per-step linear system for (u^{n+1}, p^{n+1}) on P1/P1 tets:
/// Galerkin terms plus SUPG/PSPG residual stabilization and LSIC grad-div.
/// All element integrals are closed-form (P1 gradients are constant; the
/// Picard advection field is taken element-mean). Dof ordering is node-major
/// (ux, uy, uz, p).
///
/// Concurrency: element matrices are computed chunk-parallel into
/// preallocated slots, then scattered serially in element order — the global
/// matrix is bit-identical for any thread count.
class Assembler {
public:
  Assembler(const Mesh& mesh, StabilizationConfig stab = {}, int threads = 1)
      : mesh_(mesh), stab_(stab), threads_(threads) {
    build_sparsity();
    cache_geometry();
  }

  int n_dofs() const { return 4 * mesh_.n_nodes(); }

  /// Assemble the system linearized at `ustar` (Picard iterate), advancing
  /// from `prev` by one theta step. Dirichlet rows/columns are eliminated
  /// symmetrically (unit rows; columns folded into the rhs).
  SparseSystem assemble(const SimulationState& prev, const std::vector<Vec3>& ustar,
                        const MaterialProps& props, const TimeScheme& scheme,
                        const DirichletSet& dirichlet) const {
    const int n_el = mesh_.n_tets();
    SparseSystem sys;
    sys.A.n = n_dofs();
    sys.A.row_ptr = row_ptr_;
    sys.A.col = col_;
    sys.A.val.assign(col_.size(), 0.0);
    sys.b.assign(n_dofs(), 0.0);

    constexpr int kChunk = 512;
    std::vector<ElementBlock> blocks(std::min(n_el, kChunk));
    for (int chunk = 0; chunk < n_el; chunk += kChunk) {
      const int count = std::min(kChunk, n_el - chunk);
      parallel_for(count, threads_, [&](int lo, int hi) {
        for (int k = lo; k < hi; ++k)
          element_matrix(chunk + k, prev, ustar, props, scheme, blocks[k]);
      });
      for (int k = 0; k < count; ++k) scatter(chunk + k, blocks[k], sys);
    }

    apply_dirichlet(sys, dirichlet);
    return sys;
  }

  /// Initial solver guess: previous solution with constraints imposed.
  std::vector<double> initial_guess(const SimulationState& prev,
                                    const DirichletSet& dirichlet) const {
    std::vector<double> x(n_dofs());
    for (int i = 0; i < mesh_.n_nodes(); ++i) {
      const Vec3 u = dirichlet.is_constrained(i) ? dirichlet.value(i) : prev.u[i];
      x[4 * i + 0] = u.x;
      x[4 * i + 1] = u.y;
      x[4 * i + 2] = u.z;
      x[4 * i + 3] = prev.p[i];
    }
    return x;
  }

  const Mesh& mesh() const { return mesh_; }
  const StabilizationConfig& stabilization() const { return stab_; }

private:
  struct ElementBlock {
    double K[16][16];
    double F[16];
  };

  void build_sparsity() {
    const int nn = mesh_.n_nodes();
    std::vector<std::vector<int>> adj(nn);
    for (const auto& t : mesh_.tets())
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) adj[t[a]].push_back(t[b]);
    for (auto& row : adj) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    row_ptr_.assign(4 * nn + 1, 0);
    for (int i = 0; i < nn; ++i)
      for (int c = 0; c < 4; ++c)
        row_ptr_[4 * i + c + 1] = row_ptr_[4 * i + c] + 4 * static_cast<int>(adj[i].size());
    col_.resize(row_ptr_.back());
    for (int i = 0, k = 0; i < nn; ++i)
      for (int c = 0; c < 4; ++c)
        for (int j : adj[i])
          for (int d = 0; d < 4; ++d) col_[k++] = 4 * j + d;

    // Per-element scatter: position of node t[b] within adj(t[a]).
    scatter_.resize(static_cast<std::size_t>(mesh_.n_tets()) * 16);
    for (int e = 0; e < mesh_.n_tets(); ++e) {
      const auto& t = mesh_.tet(e);
      for (int a = 0; a < 4; ++a) {
        const auto& row = adj[t[a]];
        for (int b = 0; b < 4; ++b) {
          const auto it = std::lower_bound(row.begin(), row.end(), t[b]);
          scatter_[16 * e + 4 * a + b] = static_cast<int>(it - row.begin());
        }
      }
    }
  }

  void cache_geometry() {
    const int n_el = mesh_.n_tets();
    grad_.resize(static_cast<std::size_t>(n_el) * 4);
    h_mean_ = 0.0;
    for (int e = 0; e < n_el; ++e) h_mean_ += mesh_.characteristic_length(e);
    h_mean_ /= std::max(1, n_el);
    for (int e = 0; e < n_el; ++e) {
      const auto& t = mesh_.tet(e);
      const Vec3 a = mesh_.node(t[1]) - mesh_.node(t[0]);
      const Vec3 b = mesh_.node(t[2]) - mesh_.node(t[0]);
      const Vec3 c = mesh_.node(t[3]) - mesh_.node(t[0]);
      const double det = dot(a, cross(b, c));  // = 6V > 0 after orientation fix
      Vec3* g = &grad_[static_cast<std::size_t>(e) * 4];
      g[1] = cross(b, c) / det;
      g[2] = cross(c, a) / det;
      g[3] = cross(a, b) / det;
      g[0] = (g[1] + g[2] + g[3]) * -1.0;
    }
  }

  void element_matrix(int e, const SimulationState& prev, const std::vector<Vec3>& ustar,
                      const MaterialProps& props, const TimeScheme& scheme,
                      ElementBlock& blk) const {
    const auto& t = mesh_.tet(e);
    const Vec3* G = &grad_[static_cast<std::size_t>(e) * 4];
    const double V = mesh_.tet_volume(e);
    const double h = mesh_.characteristic_length(e);
    const double wq = V / 4.0;  // integral of any N_a over the tet
    const double rho = props.rho, mu = props.mu, nu = props.nu();
    const double dt = scheme.dt, th = scheme.theta;

    Vec3 abar{}, abar_n{};
    if (scheme.convective) {
      for (int a = 0; a < 4; ++a) abar += ustar[t[a]];
      for (int a = 0; a < 4; ++a) abar_n += prev.u[t[a]];
      abar *= 0.25;
      abar_n *= 0.25;
    }
    const double unorm = norm(abar);
    const double ts = stab_.supg ? tau_supg(h, unorm, nu, dt) : 0.0;
    const double tp = stab_.pspg ? tau_supg(h, unorm, nu, dt) : 0.0;
    const double tl = stab_.lsic ? tau_lsic(h, unorm) : 0.0;

    double c[4], cn[4];
    for (int b = 0; b < 4; ++b) {
      c[b] = dot(abar, G[b]);
      cn[b] = dot(abar_n, G[b]);
    }

    for (auto& row : blk.K)
      for (auto& v : row) v = 0.0;
    for (auto& v : blk.F) v = 0.0;

    for (int a = 0; a < 4; ++a) {
      const double ca = c[a];
      for (int b = 0; b < 4; ++b) {
        const double mass = rho / dt * V / 20.0 * (a == b ? 2.0 : 1.0);
        const double gab = dot(G[a], G[b]);
        // velocity-velocity
        const double diag = mass + th * rho * wq * c[b] + th * mu * V * gab +
                            ts * rho * ca * (wq / dt + th * c[b] * V);
        for (int i = 0; i < 3; ++i) {
          blk.K[4 * a + i][4 * b + i] += diag;
          for (int j = 0; j < 3; ++j)
            blk.K[4 * a + i][4 * b + j] +=
                th * mu * V * G[a][j] * G[b][i] + rho * tl * V * G[a][i] * G[b][j];
        }
        // velocity-pressure and pressure-velocity
        for (int i = 0; i < 3; ++i) {
          blk.K[4 * a + i][4 * b + 3] += -wq * G[a][i] + ts * ca * V * G[b][i];
          blk.K[4 * a + 3][4 * b + i] +=
              wq * G[b][i] + tp * (wq / dt) * G[a][i] + tp * th * V * G[a][i] * c[b];
        }
        // pressure-pressure (PSPG)
        blk.K[4 * a + 3][4 * b + 3] += tp / rho * V * gab;

        // rhs: previous-step contributions
        const Vec3& ub = prev.u[t[b]];
        const double gaub = dot(G[a], ub);
        for (int i = 0; i < 3; ++i) {
          blk.F[4 * a + i] += mass * ub[i] - (1.0 - th) * rho * wq * cn[b] * ub[i] -
                              (1.0 - th) * mu * V * (gab * ub[i] + G[b][i] * gaub) +
                              ts * ca * rho * (wq / dt - (1.0 - th) * V * cn[b]) * ub[i];
        }
        blk.F[4 * a + 3] += tp * (wq / dt - (1.0 - th) * V * cn[b]) * gaub;
      }
    }

    // Equilibrate: continuity rows carry O(V/h) entries vs O(rho V / dt) on
    // momentum rows, so an unscaled relative-residual stop leaves them orders
    // of magnitude less converged and the recovered flux balance drifts.
    // A single mesh-global factor keeps the equations identical.
    const double ps = 4.0 * rho * h_mean_ / dt + 80.0 * mu / h_mean_;
    for (int a = 0; a < 4; ++a) {
      for (int col = 0; col < 16; ++col) blk.K[4 * a + 3][col] *= ps;
      blk.F[4 * a + 3] *= ps;
    }
  }

  void scatter(int e, const ElementBlock& blk, SparseSystem& sys) const {
    const auto& t = mesh_.tet(e);
    const int* sc = &scatter_[static_cast<std::size_t>(e) * 16];
    for (int a = 0; a < 4; ++a) {
      for (int cc = 0; cc < 4; ++cc) {
        const int row = 4 * t[a] + cc;
        const int base = row_ptr_[row];
        for (int b = 0; b < 4; ++b) {
          const int off = base + 4 * sc[4 * a + b];
          for (int d = 0; d < 4; ++d) sys.A.val[off + d] += blk.K[4 * a + cc][4 * b + d];
        }
        sys.b[row] += blk.F[4 * a + cc];
      }
    }
  }

  void apply_dirichlet(SparseSystem& sys, const DirichletSet& bc) const {
    parallel_for(mesh_.n_nodes(), threads_, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        for (int cc = 0; cc < 4; ++cc) {
          const int row = 4 * i + cc;
          if (cc < 3 && bc.is_constrained(i)) {
            for (int k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k)
              sys.A.val[k] = (sys.A.col[k] == row) ? 1.0 : 0.0;
            sys.b[row] = bc.value(i)[cc];
          } else {
            for (int k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
              const int cj = sys.A.col[k];
              if (cj % 4 < 3 && bc.is_constrained(cj / 4)) {
                sys.b[row] -= sys.A.val[k] * bc.value(cj / 4)[cj % 4];
                sys.A.val[k] = 0.0;
              }
            }
          }
        }
      }
    });
  }

  const Mesh& mesh_;
  StabilizationConfig stab_;
  int threads_;
  std::vector<int> row_ptr_, col_;
  std::vector<int> scatter_;
  std::vector<Vec3> grad_;
  double h_mean_ = 0.0;
};

/// Op-shaped convenience wrapper (tests); run() keeps a persistent Assembler.
inline SparseSystem assemble(const Mesh& mesh, const SimulationState& prev,
                             const std::vector<Vec3>& ustar, const MaterialProps& props,
                             const TimeScheme& scheme, const DirichletSet& dirichlet,
                             StabilizationConfig stab = {}) {
  return Assembler(mesh, stab).assemble(prev, ustar, props, scheme, dirichlet);
}

}  // namespace avflow

#endif  // AVFLOW_FEM_HPP
