#ifndef AVFLOW_VTK_HPP
#define AVFLOW_VTK_HPP

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/fem.hpp"
#include "avflow/mesh.hpp"
#include "avflow/post.hpp"

namespace avflow {

namespace vtkio {

/// All floats at 9 significant digits: compact, deterministic, and enough to
/// reproduce binary doubles to visualization accuracy.
inline std::string num(double v) { return format_sig(v, 9); }

}  // namespace vtkio

/// Legacy ASCII VTK unstructured grid: tet volume mesh with nodal velocity
/// vectors and pressure scalars.
inline void write_vtk(const Mesh& mesh, const SimulationState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("vtk: cannot open '" + path + "' for writing");
  out << "# vtk DataFile Version 3.0\n";
  out << "avflow snapshot step=" << state.step << " t=" << vtkio::num(state.t) << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const Vec3& p = mesh.node(i);
    out << vtkio::num(p.x) << ' ' << vtkio::num(p.y) << ' ' << vtkio::num(p.z) << '\n';
  }
  out << "CELLS " << mesh.n_tets() << ' ' << 5 * mesh.n_tets() << '\n';
  for (int e = 0; e < mesh.n_tets(); ++e) {
    const auto& t = mesh.tet(e);
    out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  }
  out << "CELL_TYPES " << mesh.n_tets() << '\n';
  for (int e = 0; e < mesh.n_tets(); ++e) out << "10\n";
  out << "POINT_DATA " << mesh.n_nodes() << '\n';
  out << "VECTORS velocity double\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const Vec3& u = state.u[i];
    out << vtkio::num(u.x) << ' ' << vtkio::num(u.y) << ' ' << vtkio::num(u.z) << '\n';
  }
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) out << vtkio::num(state.p[i]) << '\n';
  if (!out) throw InputError("vtk: write to '" + path + "' failed");
}

/// Companion wall-surface file: WALL triangles with per-facet WSS magnitude.
inline void write_wall_vtk(const Mesh& mesh, const WallShearField& field,
                           const std::string& path) {
  const auto& facet_ids = mesh.patch_facets(PatchLabel::WALL);
  const auto& nodes = mesh.patch_nodes(PatchLabel::WALL);
  std::vector<int> remap(mesh.n_nodes(), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) remap[nodes[k]] = static_cast<int>(k);

  std::ofstream out(path);
  if (!out) throw InputError("vtk: cannot open '" + path + "' for writing");
  out << "# vtk DataFile Version 3.0\n";
  out << "avflow wall shear\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nodes.size() << " double\n";
  for (int n : nodes) {
    const Vec3& p = mesh.node(n);
    out << vtkio::num(p.x) << ' ' << vtkio::num(p.y) << ' ' << vtkio::num(p.z) << '\n';
  }
  out << "CELLS " << facet_ids.size() << ' ' << 4 * facet_ids.size() << '\n';
  for (int fi : facet_ids) {
    const BoundaryFacet& f = mesh.boundary_facets()[fi];
    out << "3 " << remap[f.nodes[0]] << ' ' << remap[f.nodes[1]] << ' ' << remap[f.nodes[2]]
        << '\n';
  }
  out << "CELL_TYPES " << facet_ids.size() << '\n';
  for (std::size_t k = 0; k < facet_ids.size(); ++k) out << "5\n";
  out << "CELL_DATA " << facet_ids.size() << '\n';
  out << "SCALARS wss_magnitude double 1\nLOOKUP_TABLE default\n";
  for (double m : field.magnitude) out << vtkio::num(m) << '\n';
  if (!out) throw InputError("vtk: write to '" + path + "' failed");
}

/// Minimal reader for the files written above (round-trip checks). Token
/// based; accepts only the layout this library emits.
struct VtkData {
  std::vector<Vec3> points;
  std::vector<std::array<int, 4>> tets;
  std::vector<Vec3> velocity;
  std::vector<double> pressure;
};

inline VtkData read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("vtk: cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);  // version banner
  std::getline(in, line);  // title
  std::getline(in, line);  // ASCII
  if (line != "ASCII") throw InputError("vtk: '" + path + "': expected ASCII data");
  std::getline(in, line);  // DATASET
  VtkData d;
  std::string tok;
  int n = 0;
  in >> tok >> n;  // POINTS n
  if (tok != "POINTS") throw InputError("vtk: '" + path + "': expected POINTS");
  in >> tok;  // double
  d.points.resize(n);
  for (auto& p : d.points) in >> p.x >> p.y >> p.z;
  int nc = 0, tot = 0;
  in >> tok >> nc >> tot;  // CELLS
  if (tok != "CELLS") throw InputError("vtk: '" + path + "': expected CELLS");
  d.tets.resize(nc);
  for (auto& t : d.tets) {
    int k = 0;
    in >> k >> t[0] >> t[1] >> t[2] >> t[3];
    if (k != 4) throw InputError("vtk: '" + path + "': expected tetrahedral cells");
  }
  in >> tok >> nc;  // CELL_TYPES
  for (int i = 0; i < nc; ++i) {
    int ct = 0;
    in >> ct;
  }
  in >> tok >> n;  // POINT_DATA n
  if (tok != "POINT_DATA") throw InputError("vtk: '" + path + "': expected POINT_DATA");
  in >> tok >> tok >> tok;  // VECTORS velocity double
  d.velocity.resize(n);
  for (auto& u : d.velocity) in >> u.x >> u.y >> u.z;
  in >> tok >> tok >> tok >> tok;  // SCALARS pressure double 1
  in >> tok >> tok;                // LOOKUP_TABLE default
  d.pressure.resize(n);
  for (auto& p : d.pressure) in >> p;
  if (!in) throw InputError("vtk: '" + path + "': truncated file");
  return d;
}

}  // namespace avflow

#endif  // AVFLOW_VTK_HPP
