#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "avflow/mesh.hpp"
#include "avflow/mesh_generate.hpp"
#include "avflow/post.hpp"
#include "avflow/vtk.hpp"

using namespace avflow;

namespace {

std::filesystem::path scratch() {
  auto d = std::filesystem::temp_directory_path() / "avflow_vtk_tests";
  std::filesystem::create_directories(d);
  return d;
}

Mesh single_tet() {
  std::vector<Vec3> nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<std::array<int, 4>> tets = {{0, 1, 2, 3}};
  std::vector<std::pair<std::array<int, 3>, PatchLabel>> facets = {
      {{0, 1, 2}, PatchLabel::WALL},
      {{0, 1, 3}, PatchLabel::WALL},
      {{0, 2, 3}, PatchLabel::WALL},
      {{1, 2, 3}, PatchLabel::WALL},
  };
  return Mesh(nodes, tets, facets);
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(in, l)) lines.push_back(l);
  return lines;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SimulationState demo_state() {
  SimulationState s = SimulationState::zero(4);
  s.u = {{0.125, -1.5, 2.0}, {1.0 / 3.0, 0.0, -0.7}, {3.25, 4.5, 5.0}, {1e-9, -2e6, 0.0}};
  s.p = {101.5, -3.0, 0.0, 7.0 / 3.0};
  s.t = 0.625;
  s.step = 17;
  return s;
}

}  // namespace

TEST_CASE("volume snapshot has the fixed legacy layout", "[vtk]") {
  Mesh m = single_tet();
  SimulationState s = demo_state();
  auto path = scratch() / "tet.vtk";
  write_vtk(m, s, path.string());

  auto lines = read_lines(path);
  REQUIRE(lines.size() >= 25);
  CHECK(lines[0] == "# vtk DataFile Version 3.0");
  CHECK(lines[1] == "avflow snapshot step=17 t=0.625");
  CHECK(lines[2] == "ASCII");
  CHECK(lines[3] == "DATASET UNSTRUCTURED_GRID");
  CHECK(lines[4] == "POINTS 4 double");
  CHECK(lines[5] == "0 0 0");
  CHECK(lines[6] == "1 0 0");
  CHECK(lines[9] == "CELLS 1 5");
  CHECK(lines[10] == "4 0 1 2 3");
  CHECK(lines[11] == "CELL_TYPES 1");
  CHECK(lines[12] == "10");
  CHECK(lines[13] == "POINT_DATA 4");
  CHECK(lines[14] == "VECTORS velocity double");
  CHECK(lines[15] == "0.125 -1.5 2");
  CHECK(lines[19] == "SCALARS pressure double 1");
  CHECK(lines[20] == "LOOKUP_TABLE default");
  CHECK(lines[21] == "101.5");
}

TEST_CASE("snapshot round-trips through the reader at written precision", "[vtk]") {
  Mesh m = generate_tube(1.5e-3, 6e-3, 4, 2);
  SimulationState s = SimulationState::zero(m.n_nodes());
  // Irregular values exercise the fixed 9-significant-digit formatter: the
  // reader must recover every field to that precision, and exact zeros
  // must survive exactly.
  for (int i = 0; i < m.n_nodes(); ++i) {
    s.u[i] = Vec3{std::sin(0.1 * i) * 1e-3, (i % 7) / 3.0, -1.0 / (i + 1)};
    s.p[i] = 133.322 * std::cos(0.05 * i);
  }
  s.t = 0.123456789;
  auto path = scratch() / "tube.vtk";
  write_vtk(m, s, path.string());

// Composed matchers hold references, so they must be built inside the
// full assertion expression.
#define CHECK_CLOSE(val, ref)                                     \
  CHECK_THAT(val, Catch::Matchers::WithinRel((ref), 1e-8) ||      \
                      Catch::Matchers::WithinAbs((ref), 1e-12))
  VtkData d = read_vtk(path.string());
  REQUIRE(static_cast<int>(d.points.size()) == m.n_nodes());
  REQUIRE(static_cast<int>(d.tets.size()) == m.n_tets());
  REQUIRE(static_cast<int>(d.velocity.size()) == m.n_nodes());
  REQUIRE(static_cast<int>(d.pressure.size()) == m.n_nodes());
  for (int i = 0; i < m.n_nodes(); ++i) {
    CHECK_CLOSE(d.points[i].x, m.node(i).x);
    CHECK_CLOSE(d.points[i].y, m.node(i).y);
    CHECK_CLOSE(d.points[i].z, m.node(i).z);
    CHECK_CLOSE(d.velocity[i].x, s.u[i].x);
    CHECK_CLOSE(d.velocity[i].y, s.u[i].y);
    CHECK_CLOSE(d.velocity[i].z, s.u[i].z);
    CHECK_CLOSE(d.pressure[i], s.p[i]);
    if (s.u[i].x == 0.0) CHECK(d.velocity[i].x == 0.0);
  }
#undef CHECK_CLOSE
  for (int e = 0; e < m.n_tets(); ++e) CHECK(d.tets[e] == m.tet(e));
}

TEST_CASE("two writes of the same state are byte-identical", "[vtk]") {
  Mesh m = generate_tube(1e-3, 4e-3, 3, 2);
  SimulationState s = SimulationState::zero(m.n_nodes());
  for (int i = 0; i < m.n_nodes(); ++i) s.u[i].x = 1e-4 * i;
  auto pa = scratch() / "det_a.vtk";
  auto pb = scratch() / "det_b.vtk";
  write_vtk(m, s, pa.string());
  write_vtk(m, s, pb.string());
  CHECK(read_bytes(pa) == read_bytes(pb));
}

TEST_CASE("wall companion file carries WALL triangles and facet magnitudes", "[vtk]") {
  Mesh m = generate_tube(2e-3, 8e-3, 5, 3);
  SimulationState s = SimulationState::zero(m.n_nodes());
  for (int i = 0; i < m.n_nodes(); ++i) s.u[i] = Vec3{100.0 * m.node(i).y, 0, 0};
  MaterialProps props;
  WallShearField f = wss(m, s, props);

  auto path = scratch() / "wall.vtk";
  write_wall_vtk(m, f, path.string());

  const auto n_wall_nodes = m.patch_nodes(PatchLabel::WALL).size();
  const auto n_wall_facets = m.patch_facets(PatchLabel::WALL).size();
  auto lines = read_lines(path);
  REQUIRE(lines.size() > 8);
  CHECK(lines[0] == "# vtk DataFile Version 3.0");
  CHECK(lines[4] == "POINTS " + std::to_string(n_wall_nodes) + " double");

  std::size_t cells_at = 5 + n_wall_nodes;
  REQUIRE(lines.size() > cells_at);
  CHECK(lines[cells_at] ==
        "CELLS " + std::to_string(n_wall_facets) + ' ' + std::to_string(4 * n_wall_facets));
  // Triangle rows reference compacted point indices only.
  for (std::size_t k = 1; k <= n_wall_facets; ++k) {
    std::istringstream row(lines[cells_at + k]);
    int arity = -1, a = -1, b = -1, c = -1;
    row >> arity >> a >> b >> c;
    REQUIRE(arity == 3);
    CHECK(a >= 0);
    CHECK(b >= 0);
    CHECK(c >= 0);
    CHECK(a < static_cast<int>(n_wall_nodes));
    CHECK(b < static_cast<int>(n_wall_nodes));
    CHECK(c < static_cast<int>(n_wall_nodes));
  }
  std::size_t types_at = cells_at + n_wall_facets + 1;
  CHECK(lines[types_at] == "CELL_TYPES " + std::to_string(n_wall_facets));
  CHECK(lines[types_at + 1] == "5");
  std::size_t data_at = types_at + n_wall_facets + 1;
  CHECK(lines[data_at] == "CELL_DATA " + std::to_string(n_wall_facets));
  CHECK(lines[data_at + 1] == "SCALARS wss_magnitude double 1");
  CHECK(lines[data_at + 2] == "LOOKUP_TABLE default");
  CHECK(lines.size() == data_at + 3 + n_wall_facets);
}

TEST_CASE("unwritable path and malformed files are rejected", "[vtk]") {
  Mesh m = single_tet();
  SimulationState s = SimulationState::zero(4);
  CHECK_THROWS_AS(write_vtk(m, s, (scratch() / "no_dir" / "x.vtk").string()), InputError);
  CHECK_THROWS_AS(read_vtk((scratch() / "absent.vtk").string()), InputError);

  auto bad = scratch() / "binary_tag.vtk";
  {
    std::ofstream out(bad);
    out << "# vtk DataFile Version 3.0\ntitle\nBINARY\nDATASET UNSTRUCTURED_GRID\n";
  }
  CHECK_THROWS_WITH(read_vtk(bad.string()), Catch::Matchers::ContainsSubstring("ASCII"));

  auto cut = scratch() / "cut.vtk";
  {
    write_vtk(m, demo_state(), cut.string());
    std::string bytes = read_bytes(cut);
    std::ofstream out(cut, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_vtk(cut.string()), InputError);
}
