#ifndef AVFLOW_GMSH_HPP
#define AVFLOW_GMSH_HPP

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/mesh.hpp"

namespace avflow {

/// Default physical-name mapping: the labels' own names.
inline std::map<std::string, PatchLabel> default_patch_names() {
  return {{"PA", PatchLabel::PA},
          {"DA", PatchLabel::DA},
          {"FV", PatchLabel::FV},
          {"WALL", PatchLabel::WALL}};
}

namespace gmshio {

struct Line {
  std::string text;
  int number = 0;
};

class Reader {
public:
  explicit Reader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw InputError("cannot open mesh file " + path);
  }
  bool next(Line& l) {
    if (!std::getline(in_, l.text)) return false;
    if (!l.text.empty() && l.text.back() == '\r') l.text.pop_back();
    l.number = ++lineno_;
    return true;
  }
  [[noreturn]] void fail(int lineno, const std::string& msg) const {
    throw InputError(path_ + ":" + std::to_string(lineno) + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(lineno_, msg); }

private:
  std::string path_;
  std::ifstream in_;
  int lineno_ = 0;
};

}  // namespace gmshio

/// Load a Gmsh MSH 2.2 ASCII mesh: 4-node tets plus 3-node boundary triangles
/// whose physical-group names map to patch labels (default: PA/DA/FV/WALL).
/// Point and line elements are ignored; any other element type is an error.
inline Mesh load_gmsh(const std::string& path,
                      const std::map<std::string, PatchLabel>& names = default_patch_names()) {
  gmshio::Reader rd(path);
  gmshio::Line l;

  std::map<int, PatchLabel> tag_label;   // physical id -> label
  std::map<int, int> node_index;         // file node id -> dense index
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::pair<std::array<int, 3>, PatchLabel>> facets;
  bool seen_format = false;

  while (rd.next(l)) {
    std::istringstream ls(l.text);
    std::string section;
    ls >> section;
    if (section.empty()) continue;

    if (section == "$MeshFormat") {
      if (!rd.next(l)) rd.fail("unexpected end of file in $MeshFormat");
      std::istringstream fs(l.text);
      std::string version;
      int filetype = -1, datasize = 0;
      if (!(fs >> version >> filetype >> datasize))
        rd.fail(l.number, "malformed $MeshFormat line");
      if (version.rfind("2.", 0) != 0 || filetype != 0)
        rd.fail(l.number, "unsupported mesh format " + version + " (need MSH 2.x ASCII)");
      if (!rd.next(l) || l.text != "$EndMeshFormat") rd.fail("missing $EndMeshFormat");
      seen_format = true;
    } else if (section == "$PhysicalNames") {
      if (!rd.next(l)) rd.fail("unexpected end of file in $PhysicalNames");
      int n = 0;
      if (!(std::istringstream(l.text) >> n)) rd.fail(l.number, "malformed count");
      for (int i = 0; i < n; ++i) {
        if (!rd.next(l)) rd.fail("unexpected end of file in $PhysicalNames");
        std::istringstream ps(l.text);
        int dim = 0, id = 0;
        std::string name;
        if (!(ps >> dim >> id >> std::quoted(name)))
          rd.fail(l.number, "malformed physical name");
        if (dim != 2) continue;  // only surface groups map to labels
        auto it = names.find(name);
        if (it == names.end())
          rd.fail(l.number, "unknown physical name \"" + name + "\"");
        tag_label[id] = it->second;
      }
      if (!rd.next(l) || l.text != "$EndPhysicalNames") rd.fail("missing $EndPhysicalNames");
    } else if (section == "$Nodes") {
      if (!rd.next(l)) rd.fail("unexpected end of file in $Nodes");
      long n = 0;
      if (!(std::istringstream(l.text) >> n) || n < 0) rd.fail(l.number, "malformed node count");
      for (long i = 0; i < n; ++i) {
        if (!rd.next(l)) rd.fail("unexpected end of file in $Nodes");
        std::istringstream ns(l.text);
        int id = 0;
        Vec3 p;
        if (!(ns >> id >> p.x >> p.y >> p.z)) rd.fail(l.number, "malformed node line");
        if (!node_index.emplace(id, static_cast<int>(nodes.size())).second)
          rd.fail(l.number, "duplicate node id " + std::to_string(id));
        nodes.push_back(p);
      }
      if (!rd.next(l) || l.text != "$EndNodes") rd.fail("missing $EndNodes");
    } else if (section == "$Elements") {
      if (!rd.next(l)) rd.fail("unexpected end of file in $Elements");
      long n = 0;
      if (!(std::istringstream(l.text) >> n) || n < 0)
        rd.fail(l.number, "malformed element count");
      auto idx = [&](int id, int lineno) {
        auto it = node_index.find(id);
        if (it == node_index.end())
          rd.fail(lineno, "element references unknown node " + std::to_string(id));
        return it->second;
      };
      for (long i = 0; i < n; ++i) {
        if (!rd.next(l)) rd.fail("unexpected end of file in $Elements");
        std::istringstream es(l.text);
        int id = 0, type = 0, ntags = 0;
        if (!(es >> id >> type >> ntags)) rd.fail(l.number, "malformed element line");
        std::vector<int> tags(ntags);
        for (int k = 0; k < ntags; ++k)
          if (!(es >> tags[k])) rd.fail(l.number, "malformed element tags");
        if (type == 15 || type == 1) continue;  // points / lines carry no labels here
        if (type == 2) {
          std::array<int, 3> tri;
          if (!(es >> tri[0] >> tri[1] >> tri[2])) rd.fail(l.number, "malformed triangle");
          if (ntags < 1) rd.fail(l.number, "boundary triangle lacks a physical tag");
          auto it = tag_label.find(tags[0]);
          if (it == tag_label.end())
            rd.fail(l.number, "triangle physical tag " + std::to_string(tags[0]) +
                                  " has no known name");
          facets.push_back({{idx(tri[0], l.number), idx(tri[1], l.number),
                             idx(tri[2], l.number)},
                            it->second});
        } else if (type == 4) {
          std::array<int, 4> t;
          if (!(es >> t[0] >> t[1] >> t[2] >> t[3])) rd.fail(l.number, "malformed tet");
          tets.push_back({idx(t[0], l.number), idx(t[1], l.number), idx(t[2], l.number),
                          idx(t[3], l.number)});
        } else {
          rd.fail(l.number, "unsupported element type " + std::to_string(type));
        }
      }
      if (!rd.next(l) || l.text != "$EndElements") rd.fail("missing $EndElements");
    } else if (section[0] == '$' && section.rfind("$End", 0) != 0) {
      // Unknown section: skip to its matching end marker.
      const std::string end = "$End" + section.substr(1);
      bool closed = false;
      while (rd.next(l))
        if (l.text == end) {
          closed = true;
          break;
        }
      if (!closed) rd.fail("unterminated section " + section);
    }
  }
  if (!seen_format) throw InputError(path + ": not a Gmsh MSH file (no $MeshFormat)");
  return Mesh(std::move(nodes), std::move(tets), std::move(facets));
}

/// Write a mesh as Gmsh MSH 2.2 ASCII. Boundary triangles carry physical
/// surface groups named after their labels; tets go into a volume group
/// "FLUID". Round-trips through load_gmsh.
inline void write_gmsh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  // Declare only surface groups that actually carry facets; an empty group
  // would force every custom label map to name patches the mesh lacks.
  std::vector<int> present;
  for (int li = 0; li < 4; ++li)
    if (mesh.has_label(static_cast<PatchLabel>(li))) present.push_back(li);
  out << "$PhysicalNames\n" << (present.size() + 1) << "\n";
  for (int li : present)
    out << "2 " << (li + 1) << " \"" << to_string(static_cast<PatchLabel>(li)) << "\"\n";
  out << "3 5 \"FLUID\"\n$EndPhysicalNames\n";
  out << "$Nodes\n" << mesh.n_nodes() << "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const Vec3& p = mesh.node(i);
    out << (i + 1) << ' ' << format_shortest(p.x) << ' ' << format_shortest(p.y) << ' '
        << format_shortest(p.z) << "\n";
  }
  out << "$EndNodes\n";
  out << "$Elements\n" << (mesh.n_boundary_facets() + mesh.n_tets()) << "\n";
  int eid = 1;
  for (const auto& f : mesh.boundary_facets()) {
    const int phys = static_cast<int>(f.label) + 1;
    out << eid++ << " 2 2 " << phys << ' ' << phys << ' ' << (f.nodes[0] + 1) << ' '
        << (f.nodes[1] + 1) << ' ' << (f.nodes[2] + 1) << "\n";
  }
  for (int e = 0; e < mesh.n_tets(); ++e) {
    const auto& t = mesh.tet(e);
    out << eid++ << " 4 2 5 1 " << (t[0] + 1) << ' ' << (t[1] + 1) << ' ' << (t[2] + 1) << ' '
        << (t[3] + 1) << "\n";
  }
  out << "$EndElements\n";
  if (!out) throw InputError("write failed for mesh file " + path);
}

}  // namespace avflow

#endif  // AVFLOW_GMSH_HPP
