#ifndef AVFLOW_POST_HPP
#define AVFLOW_POST_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/fem.hpp"
#include "avflow/mesh.hpp"

namespace avflow {

inline constexpr double kPaPerMmHg = 133.322;

/// Discrete flow rate through a labeled patch: sum of facet area times
/// facet-mean velocity dotted with the outward normal. Positive = outgoing.
inline double boundary_flux(const Mesh& mesh, const SimulationState& state, PatchLabel label) {
  double q = 0.0;
  for (int fi : mesh.patch_facets(label)) {
    const BoundaryFacet& f = mesh.boundary_facets()[fi];
    Vec3 um{};
    for (int n : f.nodes) um += state.u[n];
    q += f.area * dot(um / 3.0, f.normal);
  }
  return q;
}

/// Area-weighted mean pressure over a labeled patch (facet-mean nodal p).
inline double avg_pressure(const Mesh& mesh, const SimulationState& state, PatchLabel label) {
  const auto& facet_ids = mesh.patch_facets(label);
  if (facet_ids.empty())
    throw InputError("post: mesh has no '" + std::string(to_string(label)) + "' patch");
  double num = 0.0, den = 0.0;
  for (int fi : facet_ids) {
    const BoundaryFacet& f = mesh.boundary_facets()[fi];
    double pm = 0.0;
    for (int n : f.nodes) pm += state.p[n];
    num += f.area * pm / 3.0;
    den += f.area;
  }
  return num / den;
}

/// Net volume imbalance across all boundary patches, normalized by a
/// reference rate (typically the peak inflow magnitude).
inline double mass_balance_residual(const Mesh& mesh, const SimulationState& state,
                                    double reference_rate) {
  double net = 0.0;
  for (PatchLabel l : {PatchLabel::PA, PatchLabel::DA, PatchLabel::FV, PatchLabel::WALL})
    if (mesh.has_label(l)) net += boundary_flux(mesh, state, l);
  return std::abs(net) / std::abs(reference_rate);
}

// -------------------------------------------------------------- wall shear

/// Wall shear stress per WALL facet, ordered like mesh.patch_facets(WALL).
/// Each facet takes the constant velocity gradient of its adjacent tet:
/// sigma = -p I + 2 mu eps(u), t = sigma n, tau_w = t - (t.n) n.
struct WallShearField {
  std::vector<Vec3> traction;   // full traction vector per facet (Pa)
  std::vector<Vec3> shear;      // tangential part per facet (Pa)
  std::vector<double> magnitude;

  double max_magnitude() const {
    double m = 0.0;
    for (double v : magnitude) m = std::max(m, v);
    return m;
  }
};

inline WallShearField wss(const Mesh& mesh, const SimulationState& state,
                          const MaterialProps& props) {
  const auto& facet_ids = mesh.patch_facets(PatchLabel::WALL);
  if (facet_ids.empty()) throw InputError("post: mesh has no 'WALL' patch");
  WallShearField field;
  field.traction.reserve(facet_ids.size());
  field.shear.reserve(facet_ids.size());
  field.magnitude.reserve(facet_ids.size());
  for (int fi : facet_ids) {
    const BoundaryFacet& f = mesh.boundary_facets()[fi];
    const auto& t = mesh.tet(f.adjacent_tet);
    const Vec3 x0 = mesh.node(t[0]);
    const Vec3 a = mesh.node(t[1]) - x0;
    const Vec3 b = mesh.node(t[2]) - x0;
    const Vec3 c = mesh.node(t[3]) - x0;
    const double det = dot(a, cross(b, c));
    Vec3 g[4];
    g[1] = cross(b, c) / det;
    g[2] = cross(c, a) / det;
    g[3] = cross(a, b) / det;
    g[0] = (g[1] + g[2] + g[3]) * -1.0;

    double grad[3][3] = {};  // grad[i][j] = d u_i / d x_j
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) grad[i][j] += g[n][j] * state.u[t[n]][i];

    double pm = 0.0;
    for (int n : f.nodes) pm += state.p[n];
    pm /= 3.0;

    Vec3 trac{};
    for (int i = 0; i < 3; ++i) {
      double ti = -pm * f.normal[i];
      for (int j = 0; j < 3; ++j)
        ti += props.mu * (grad[i][j] + grad[j][i]) * f.normal[j];
      trac[i] = ti;
    }
    const Vec3 sh = trac - f.normal * dot(trac, f.normal);
    field.traction.push_back(trac);
    field.shear.push_back(sh);
    field.magnitude.push_back(norm(sh));
  }
  return field;
}

/// Area-weighted mean WSS magnitude over the wall.
inline double wss_mean(const Mesh& mesh, const WallShearField& field) {
  const auto& facet_ids = mesh.patch_facets(PatchLabel::WALL);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < facet_ids.size(); ++k) {
    const double area = mesh.boundary_facets()[facet_ids[k]].area;
    num += area * field.magnitude[k];
    den += area;
  }
  return num / den;
}

/// Total wall area where WSS magnitude exceeds `threshold` (m^2).
inline double wss_area_above(const Mesh& mesh, const WallShearField& field, double threshold) {
  const auto& facet_ids = mesh.patch_facets(PatchLabel::WALL);
  double area = 0.0;
  for (std::size_t k = 0; k < facet_ids.size(); ++k)
    if (field.magnitude[k] > threshold) area += mesh.boundary_facets()[facet_ids[k]].area;
  return area;
}

/// Area-weighted nodal average of the facet WSS magnitudes (visualization).
inline std::vector<double> wss_nodal_magnitude(const Mesh& mesh, const WallShearField& field) {
  const auto& facet_ids = mesh.patch_facets(PatchLabel::WALL);
  std::vector<double> num(mesh.n_nodes(), 0.0), den(mesh.n_nodes(), 0.0);
  for (std::size_t k = 0; k < facet_ids.size(); ++k) {
    const BoundaryFacet& f = mesh.boundary_facets()[facet_ids[k]];
    for (int n : f.nodes) {
      num[n] += f.area * field.magnitude[k];
      den[n] += f.area;
    }
  }
  for (int n = 0; n < mesh.n_nodes(); ++n)
    if (den[n] > 0.0) num[n] /= den[n];
  return num;
}

// -------------------------------------------------------------- traces

/// Patch-averaged pressures sampled once per recorded time step.
struct PressureTrace {
  std::vector<double> t;
  std::vector<double> p_pa, p_da, p_fv;

  void append(double time, const Mesh& mesh, const SimulationState& state) {
    t.push_back(time);
    p_pa.push_back(mesh.has_label(PatchLabel::PA) ? avg_pressure(mesh, state, PatchLabel::PA)
                                                  : 0.0);
    p_da.push_back(mesh.has_label(PatchLabel::DA) ? avg_pressure(mesh, state, PatchLabel::DA)
                                                  : 0.0);
    p_fv.push_back(mesh.has_label(PatchLabel::FV) ? avg_pressure(mesh, state, PatchLabel::FV)
                                                  : 0.0);
  }

  const std::vector<double>& column(PatchLabel label) const {
    switch (label) {
      case PatchLabel::PA: return p_pa;
      case PatchLabel::DA: return p_da;
      case PatchLabel::FV: return p_fv;
      default: throw InputError("pressure trace: no column for 'WALL'");
    }
  }
};

/// Trapezoid time average of p_a - p_b over the trace span (one period), in
/// Pa; divide by kPaPerMmHg for mmHg.
inline double time_avg_pressure_drop(const PressureTrace& trace, PatchLabel a, PatchLabel b) {
  const auto& pa = trace.column(a);
  const auto& pb = trace.column(b);
  const std::size_t n = trace.t.size();
  if (n < 2) throw InputError("pressure trace: need at least two samples");
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = trace.t[k + 1] - trace.t[k];
    if (!(h > 0.0)) throw InputError("pressure trace: times must increase strictly");
    integral += 0.5 * h * ((pa[k] - pb[k]) + (pa[k + 1] - pb[k + 1]));
  }
  return integral / (trace.t.back() - trace.t.front());
}

// -------------------------------------------------------------- slices

/// Velocity sampled on a uniform grid spanning the mesh bounding box's
/// projection onto a plane. Points outside the mesh are flagged.
struct SliceSample {
  Vec3 origin, normal, e1, e2;  // orthonormal in-plane axes
  int resolution = 0;
  std::vector<Vec3> points;     // row-major resolution x resolution
  std::vector<Vec3> velocity;
  std::vector<double> pressure;
  std::vector<std::uint8_t> inside;
};

inline SliceSample slice_velocity(const Mesh& mesh, const SimulationState& state,
                                  const Vec3& origin, const Vec3& normal, int resolution) {
  if (resolution < 2) throw InputError("slice: resolution must be at least 2");
  const double nn = norm(normal);
  if (!(nn > 0.0)) throw InputError("slice: normal must be nonzero");
  SliceSample s;
  s.origin = origin;
  s.normal = normal / nn;
  s.resolution = resolution;
  // In-plane frame: pick the global axis least aligned with the normal.
  int axis = 0;
  if (std::abs(s.normal.y) < std::abs(s.normal[axis])) axis = 1;
  if (std::abs(s.normal.z) < std::abs(s.normal[axis])) axis = 2;
  Vec3 ref{};
  ref[axis] = 1.0;
  s.e1 = normalized(cross(s.normal, ref));
  s.e2 = cross(s.normal, s.e1);

  const Vec3 lo = mesh.bbox_min();
  const Vec3 hi = mesh.bbox_max();
  double umin = std::numeric_limits<double>::max(), umax = -umin;
  double vmin = umin, vmax = -umin;
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy)
      for (int cz = 0; cz < 2; ++cz) {
        const Vec3 corner{cx ? hi.x : lo.x, cy ? hi.y : lo.y, cz ? hi.z : lo.z};
        const Vec3 d = corner - s.origin;
        umin = std::min(umin, dot(d, s.e1));
        umax = std::max(umax, dot(d, s.e1));
        vmin = std::min(vmin, dot(d, s.e2));
        vmax = std::max(vmax, dot(d, s.e2));
      }

  const int res = resolution;
  s.points.resize(static_cast<std::size_t>(res) * res);
  s.velocity.assign(s.points.size(), Vec3{});
  s.pressure.assign(s.points.size(), 0.0);
  s.inside.assign(s.points.size(), 0);

  int n_inside = 0;
  constexpr double kBaryTol = 1e-10;
  for (int iv = 0; iv < res; ++iv) {
    for (int iu = 0; iu < res; ++iu) {
      const double pu = umin + (umax - umin) * iu / (res - 1);
      const double pv = vmin + (vmax - vmin) * iv / (res - 1);
      const Vec3 x = s.origin + s.e1 * pu + s.e2 * pv;
      const std::size_t at = static_cast<std::size_t>(iv) * res + iu;
      s.points[at] = x;
      for (int e = 0; e < mesh.n_tets(); ++e) {
        const auto& t = mesh.tet(e);
        const Vec3 x0 = mesh.node(t[0]);
        const Vec3 a = mesh.node(t[1]) - x0;
        const Vec3 b = mesh.node(t[2]) - x0;
        const Vec3 c = mesh.node(t[3]) - x0;
        const double det = dot(a, cross(b, c));
        const Vec3 d = x - x0;
        const double l1 = dot(d, cross(b, c)) / det;
        const double l2 = dot(a, cross(d, c)) / det;
        const double l3 = dot(a, cross(b, d)) / det;
        const double l0 = 1.0 - l1 - l2 - l3;
        if (l0 < -kBaryTol || l1 < -kBaryTol || l2 < -kBaryTol || l3 < -kBaryTol) continue;
        const double lam[4] = {l0, l1, l2, l3};
        Vec3 u{};
        double p = 0.0;
        for (int k = 0; k < 4; ++k) {
          u += state.u[t[k]] * lam[k];
          p += state.p[t[k]] * lam[k];
        }
        s.velocity[at] = u;
        s.pressure[at] = p;
        s.inside[at] = 1;
        ++n_inside;
        break;
      }
    }
  }
  if (n_inside == 0) throw InputError("slice: plane misses the mesh");
  return s;
}

}  // namespace avflow

#endif  // AVFLOW_POST_HPP
