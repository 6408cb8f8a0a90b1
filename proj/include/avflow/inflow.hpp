#ifndef AVFLOW_INFLOW_HPP
#define AVFLOW_INFLOW_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/fem.hpp"
#include "avflow/krylov.hpp"
#include "avflow/mesh.hpp"

namespace avflow {

enum class InflowKind { Poisson, Flat };

/// Velocity shape on one inflow patch, scaled per step to an exact discrete
/// flow rate. The shape solves a surface Poisson problem -lap psi = 1 with
/// psi = 0 on the patch rim (on a circular patch this is the Poiseuille
/// paraboloid), pointing along the inward patch normal; `Flat` uses psi = 1
/// instead (plug profile with a one-ring rim ramp). Scaling divides by the
/// discrete flux of the unscaled shape, evaluated with the same facet
/// quadrature as boundary_flux, so the prescribed rate is met exactly: Q < 0
/// flows inward, Q > 0 outward.
class InflowProfile {
public:
  InflowProfile() = default;

  InflowProfile(const Mesh& mesh, PatchLabel label, InflowKind kind = InflowKind::Poisson)
      : label_(label) {
    const auto& facet_ids = mesh.patch_facets(label);
    if (facet_ids.empty())
      throw InputError("inflow: mesh has no '" + std::string(to_string(label)) + "' patch");
    nodes_ = mesh.patch_nodes(label);

    // Rim = nodes of patch edges that belong to exactly one patch facet.
    std::map<std::pair<int, int>, int> edge_count;
    for (int fi : facet_ids) {
      const BoundaryFacet& f = mesh.boundary_facets()[fi];
      for (int k = 0; k < 3; ++k) {
        int a = f.nodes[k], b = f.nodes[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edge_count[std::make_pair(a, b)];
      }
    }
    std::vector<std::uint8_t> is_rim(mesh.n_nodes(), 0);
    for (const auto& [edge, count] : edge_count) {
      if (count > 2)
        throw InputError("inflow: patch '" + std::string(to_string(label)) +
                         "' is not a manifold surface");
      if (count == 1) is_rim[edge.first] = is_rim[edge.second] = 1;
    }

    std::vector<int> interior;
    for (int n : nodes_)
      if (!is_rim[n]) interior.push_back(n);
    if (interior.empty())
      throw InputError("inflow: patch '" + std::string(to_string(label)) +
                       "' has no interior nodes; refine the mesh");

    std::vector<double> psi(mesh.n_nodes(), 0.0);
    if (kind == InflowKind::Poisson) {
      solve_patch_poisson(mesh, facet_ids, interior, psi);
    } else {
      for (int n : interior) psi[n] = 1.0;
    }

    // Inward nodal direction: area-weighted average of adjacent facet normals.
    std::vector<Vec3> nrm(mesh.n_nodes(), Vec3{});
    for (int fi : facet_ids) {
      const BoundaryFacet& f = mesh.boundary_facets()[fi];
      for (int n : f.nodes) nrm[n] += f.normal * f.area;
    }

    shape_.resize(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const int n = nodes_[k];
      shape_[k] = normalized(nrm[n]) * -psi[n];
    }

    // Discrete flux of the unscaled shape (facet-mean velocity dot normal).
    std::vector<int> pos(mesh.n_nodes(), -1);
    for (std::size_t k = 0; k < nodes_.size(); ++k) pos[nodes_[k]] = static_cast<int>(k);
    unit_flux_ = 0.0;
    for (int fi : facet_ids) {
      const BoundaryFacet& f = mesh.boundary_facets()[fi];
      Vec3 um{};
      for (int n : f.nodes) um += shape_[pos[n]];
      unit_flux_ += f.area * dot(um / 3.0, f.normal);
    }
    if (std::abs(unit_flux_) < 1e-300)
      throw NumericalError("inflow: profile on patch '" + std::string(to_string(label)) +
                           "' carries no flux");
  }

  PatchLabel label() const { return label_; }
  const std::vector<int>& nodes() const { return nodes_; }

  /// Nodal velocities realizing boundary flux exactly Q (m^3/s, signed
  /// outward-positive), aligned with `nodes()`.
  std::vector<Vec3> velocity(double flow_rate) const {
    const double s = flow_rate / unit_flux_;
    std::vector<Vec3> v(shape_.size());
    for (std::size_t k = 0; k < shape_.size(); ++k) v[k] = shape_[k] * s;
    return v;
  }

private:
  static void solve_patch_poisson(const Mesh& mesh, const std::vector<int>& facet_ids,
                                  const std::vector<int>& interior,
                                  std::vector<double>& psi) {
    std::vector<int> idx(mesh.n_nodes(), -1);
    for (std::size_t k = 0; k < interior.size(); ++k) idx[interior[k]] = static_cast<int>(k);
    const int m = static_cast<int>(interior.size());

    std::vector<std::tuple<int, int, double>> trip;
    std::vector<double> rhs(m, 0.0);
    for (int fi : facet_ids) {
      const BoundaryFacet& f = mesh.boundary_facets()[fi];
      const Vec3 p0 = mesh.node(f.nodes[0]);
      const Vec3 p1 = mesh.node(f.nodes[1]);
      const Vec3 p2 = mesh.node(f.nodes[2]);
      const Vec3 nv = cross(p1 - p0, p2 - p0);
      const double area2 = norm(nv);  // = 2A
      const Vec3 nh = nv / area2;
      const Vec3 pts[3] = {p0, p1, p2};
      Vec3 g[3];
      for (int a = 0; a < 3; ++a)
        g[a] = cross(nh, pts[(a + 2) % 3] - pts[(a + 1) % 3]) / area2;
      const double area = 0.5 * area2;
      for (int a = 0; a < 3; ++a) {
        const int ia = idx[f.nodes[a]];
        if (ia < 0) continue;
        rhs[ia] += area / 3.0;
        for (int b = 0; b < 3; ++b) {
          const int ib = idx[f.nodes[b]];
          if (ib < 0) continue;  // rim: psi = 0, nothing to fold in
          trip.push_back({ia, ib, area * dot(g[a], g[b])});
        }
      }
    }
    const CsrMatrix A = CsrMatrix::from_triplets(m, trip);
    auto [x, rep] = gpbicg(A, rhs, std::vector<double>(m, 0.0), 1e-12, 10 * m + 100);
    if (!rep.converged)
      throw NumericalError("inflow: patch Poisson solve stalled (residual " +
                           format_shortest(rep.residual) + ")");
    for (int k = 0; k < m; ++k) psi[interior[k]] = x[k];
  }

  PatchLabel label_ = PatchLabel::PA;
  std::vector<int> nodes_;
  std::vector<Vec3> shape_;
  double unit_flux_ = 0.0;
};

/// Assemble the step's strong constraints: inflow patches first, wall zeros
/// last so rim nodes shared with the wall stay no-slip.
inline DirichletSet build_dirichlet(const Mesh& mesh,
                                    const std::vector<const InflowProfile*>& profiles,
                                    const std::vector<double>& flow_rates) {
  if (profiles.size() != flow_rates.size())
    throw InputError("dirichlet: one flow rate required per inflow profile");
  DirichletSet bc(mesh.n_nodes());
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto v = profiles[k]->velocity(flow_rates[k]);
    const auto& nodes = profiles[k]->nodes();
    for (std::size_t j = 0; j < nodes.size(); ++j) bc.set(nodes[j], v[j]);
  }
  for (int n : mesh.patch_nodes(PatchLabel::WALL)) bc.set(n, Vec3{});
  return bc;
}

}  // namespace avflow

#endif  // AVFLOW_INFLOW_HPP
