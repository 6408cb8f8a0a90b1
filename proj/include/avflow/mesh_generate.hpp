#ifndef AVFLOW_MESH_GENERATE_HPP
#define AVFLOW_MESH_GENERATE_HPP

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "avflow/common.hpp"
#include "avflow/mesh.hpp"

namespace avflow {
namespace meshgen {

// ---------------------------------------------------------------------------
// Structured disc triangulation: ring k carries 6k nodes (ring 0 is the
// center), so n rings give 1 + 3n(n+1) nodes and 6n^2 CCW triangles.
// ---------------------------------------------------------------------------

inline int disc_node_count(int n_ring) { return 1 + 3 * n_ring * (n_ring + 1); }
inline int disc_tri_count(int n_ring) { return 6 * n_ring * n_ring; }
inline int disc_ring_offset(int k) { return k == 0 ? 0 : 1 + 3 * k * (k - 1); }

struct DiscTriangulation {
  std::vector<std::array<double, 2>> uv;       // coords in the unit disc
  std::vector<std::array<int, 3>> tris;        // CCW
};

inline DiscTriangulation triangulate_disc(int n_ring) {
  if (n_ring < 1) throw InputError("triangulate_disc: n_ring must be >= 1");
  DiscTriangulation d;
  d.uv.reserve(disc_node_count(n_ring));
  d.uv.push_back({0.0, 0.0});
  for (int k = 1; k <= n_ring; ++k) {
    const double r = static_cast<double>(k) / n_ring;
    for (int p = 0; p < 6 * k; ++p) {
      const double th = 2.0 * kPi * p / (6.0 * k);
      d.uv.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  // Ring 0 -> ring 1: six triangles around the center.
  for (int p = 0; p < 6; ++p)
    d.tris.push_back({0, disc_ring_offset(1) + p, disc_ring_offset(1) + (p + 1) % 6});
  // Ring k-1 -> ring k, six sectors of k "up" and k-1 "down" triangles each.
  for (int k = 2; k <= n_ring; ++k) {
    const int in0 = disc_ring_offset(k - 1), out0 = disc_ring_offset(k);
    const int nin = 6 * (k - 1), nout = 6 * k;
    for (int s = 0; s < 6; ++s) {
      for (int i = 0; i < k; ++i) {
        const int a = in0 + (s * (k - 1) + i) % nin;
        const int b = out0 + (s * k + i) % nout;
        const int c = out0 + (s * k + i + 1) % nout;
        d.tris.push_back({a, b, c});
        if (i + 1 < k) {
          const int a2 = in0 + (s * (k - 1) + i + 1) % nin;
          d.tris.push_back({a, c, a2});
        }
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Prism -> 3 tets, diagonal choice driven purely by global node ids so that
// neighbouring prisms agree on every quad diagonal (conforming by
// construction). Vertices: bottom triangle (0,1,2), top (3,4,5), vertical
// edges 0-3, 1-4, 2-5; bottom wound so its normal points toward the top.
// ---------------------------------------------------------------------------

inline void split_prism(const std::array<int, 6>& v, std::vector<std::array<int, 4>>& out) {
  // Proper rotations that bring each position to slot 0.
  static constexpr int rot[6][6] = {{0, 1, 2, 3, 4, 5}, {1, 2, 0, 4, 5, 3},
                                    {2, 0, 1, 5, 3, 4}, {3, 5, 4, 0, 2, 1},
                                    {4, 3, 5, 1, 0, 2}, {5, 4, 3, 2, 1, 0}};
  int m = 0;
  for (int k = 1; k < 6; ++k)
    if (v[k] < v[m]) m = k;
  std::array<int, 6> w;
  for (int k = 0; k < 6; ++k) w[k] = v[rot[m][k]];
  if (std::min(w[1], w[5]) < std::min(w[2], w[4])) {
    out.push_back({w[0], w[1], w[2], w[5]});
    out.push_back({w[0], w[1], w[5], w[4]});
    out.push_back({w[0], w[4], w[5], w[3]});
  } else {
    out.push_back({w[0], w[1], w[2], w[4]});
    out.push_back({w[0], w[4], w[2], w[5]});
    out.push_back({w[0], w[4], w[5], w[3]});
  }
}

// Boundary faces (once-shared tet faces) with outward winding, for labeling.
struct RawFace {
  std::array<int, 3> nodes;  // outward winding
  int tet;
};

inline std::vector<RawFace> boundary_faces(const std::vector<std::array<int, 4>>& tets) {
  std::map<detail::FaceKey, std::pair<int, RawFace>> count;
  for (std::size_t e = 0; e < tets.size(); ++e) {
    for (const auto& f : detail::tet_faces(tets[e])) {
      auto key = detail::face_key(f[0], f[1], f[2]);
      auto it = count.find(key);
      if (it == count.end())
        count.emplace(key, std::make_pair(1, RawFace{f, static_cast<int>(e)}));
      else
        it->second.first++;
    }
  }
  std::vector<RawFace> out;
  for (const auto& [key, cf] : count)
    if (cf.first == 1) out.push_back(cf.second);
  return out;
}

inline Mesh finalize(
    std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets,
    const std::function<PatchLabel(const std::array<int, 3>&, const std::vector<Vec3>&)>&
        labeler) {
  std::vector<std::pair<std::array<int, 3>, PatchLabel>> labeled;
  for (const auto& f : boundary_faces(tets)) labeled.emplace_back(f.nodes, labeler(f.nodes, nodes));
  return Mesh(std::move(nodes), std::move(tets), std::move(labeled));
}

}  // namespace meshgen

// ---------------------------------------------------------------------------
// generate_tube: straight circular tube along +x. Inlet disc (x = 0) PA,
// outlet disc (x = length) FV, lateral surface WALL. Layered prisms split
// into tets; (n_axial+1)(1 + 3 n_ring (n_ring+1)) nodes, 18 n_axial n_ring^2
// tets.
// ---------------------------------------------------------------------------

inline Mesh generate_tube(double radius, double length, int n_axial, int n_ring) {
  if (!(radius > 0.0) || !(length > 0.0))
    throw InputError("generate_tube: radius and length must be positive");
  if (n_axial < 2 || n_ring < 1)
    throw InputError("generate_tube: need n_axial >= 2 and n_ring >= 1");

  const auto disc = meshgen::triangulate_disc(n_ring);
  const int npd = static_cast<int>(disc.uv.size());
  const double dx = length / n_axial;

  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(npd) * (n_axial + 1));
  for (int l = 0; l <= n_axial; ++l)
    for (const auto& p : disc.uv)
      nodes.push_back({l * dx, radius * p[0], radius * p[1]});

  std::vector<std::array<int, 4>> tets;
  tets.reserve(static_cast<std::size_t>(3) * disc.tris.size() * n_axial);
  for (int l = 0; l < n_axial; ++l) {
    const int lo = l * npd, hi = (l + 1) * npd;
    for (const auto& t : disc.tris)
      meshgen::split_prism({lo + t[0], lo + t[1], lo + t[2], hi + t[0], hi + t[1], hi + t[2]},
                           tets);
  }

  auto label = [npd, n_axial](const std::array<int, 3>& f, const std::vector<Vec3>&) {
    int layer_min = n_axial + 1, layer_max = -1;
    for (int k = 0; k < 3; ++k) {
      const int lay = f[k] / npd;
      layer_min = std::min(layer_min, lay);
      layer_max = std::max(layer_max, lay);
    }
    if (layer_max == 0) return PatchLabel::PA;
    if (layer_min == n_axial) return PatchLabel::FV;
    return PatchLabel::WALL;
  };
  return meshgen::finalize(std::move(nodes), std::move(tets), label);
}

// ---------------------------------------------------------------------------
// generate_box: [0,lx]x[0,ly]x[0,lz] box, each grid cell split into the six
// Kuhn tets (conforming across cells). x = 0 face PA, x = lx face FV, the
// rest WALL. Used for manufactured-solution checks.
// ---------------------------------------------------------------------------

inline Mesh generate_box(double lx, double ly, double lz, int nx, int ny, int nz) {
  if (!(lx > 0.0) || !(ly > 0.0) || !(lz > 0.0) || nx < 1 || ny < 1 || nz < 1)
    throw InputError("generate_box: sides and cell counts must be positive");
  auto gid = [ny, nz](int i, int j, int k) { return (i * (ny + 1) + j) * (nz + 1) + k; };

  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      for (int k = 0; k <= nz; ++k)
        nodes.push_back({lx * i / nx, ly * j / ny, lz * k / nz});

  // Six tets per cell along the main diagonal 000 -> 111, one per axis-order.
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::array<int, 4>> tets;
  tets.reserve(static_cast<std::size_t>(6) * nx * ny * nz);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        for (const auto& perm : perms) {
          int c[3] = {i, j, k};
          std::array<int, 4> t;
          t[0] = gid(c[0], c[1], c[2]);
          c[perm[0]]++;
          t[1] = gid(c[0], c[1], c[2]);
          c[perm[1]]++;
          t[2] = gid(c[0], c[1], c[2]);
          c[perm[2]]++;
          t[3] = gid(c[0], c[1], c[2]);
          tets.push_back(t);
        }

  const double eps = 1e-12 * lx;
  auto label = [lx, eps](const std::array<int, 3>& f, const std::vector<Vec3>& nds) {
    const Vec3 c = (nds[f[0]] + nds[f[1]] + nds[f[2]]) / 3.0;
    if (c.x < eps) return PatchLabel::PA;
    if (c.x > lx - eps) return PatchLabel::FV;
    return PatchLabel::WALL;
  };
  return meshgen::finalize(std::move(nodes), std::move(tets), label);
}

// ---------------------------------------------------------------------------
// generate_junction: a straight artery tube along +x (ends PA at x = 0 and DA
// at x = artery_length) with a vein tube grafted onto its side, leaving the
// artery at `anastomosis_angle` to the +x axis in the xy-plane, far end FV.
//
// Construction is conforming by extrusion: a rectangular patch of the artery
// wall around the crown (+y) is taken as vein station 0; stations 1..n_vein
// extrude along the vein axis while morphing the curved patch into circular
// cross sections (square-to-disc map), the final station being an exact disc.
// Patch triangles become interior interface faces automatically. A tangled
// extrusion (non-positive tet volume) is rejected.
// ---------------------------------------------------------------------------

inline Mesh generate_junction(double artery_radius, double vein_radius, double artery_length,
                              double vein_length, double anastomosis_angle, int n_axial,
                              int n_ring, int n_vein) {
  const double Ra = artery_radius, Rv = vein_radius;
  if (!(Ra > 0.0) || !(Rv > 0.0) || !(artery_length > 0.0) || !(vein_length > 0.0))
    throw InputError("generate_junction: radii and lengths must be positive");
  if (!(anastomosis_angle > 0.0) || !(anastomosis_angle < kPi))
    throw InputError("generate_junction: anastomosis_angle must lie in (0, pi)");
  if (n_axial < 2 || n_ring < 1 || n_vein < 2)
    throw InputError("generate_junction: need n_axial >= 2, n_ring >= 1, n_vein >= 2");

  const double alpha = anastomosis_angle;
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const Vec3 d{ca, sa, 0.0};  // vein axis direction

  // --- artery tube (same construction as generate_tube) ---
  const auto disc = meshgen::triangulate_disc(n_ring);
  const int npd = static_cast<int>(disc.uv.size());
  const double dx = artery_length / n_axial;

  std::vector<Vec3> nodes;
  for (int l = 0; l <= n_axial; ++l)
    for (const auto& p : disc.uv)
      nodes.push_back({l * dx, Ra * p[0], Ra * p[1]});
  const int n_art = static_cast<int>(nodes.size());

  std::vector<std::array<int, 4>> tets;
  for (int l = 0; l < n_axial; ++l) {
    const int lo = l * npd, hi = (l + 1) * npd;
    for (const auto& t : disc.tris)
      meshgen::split_prism({lo + t[0], lo + t[1], lo + t[2], hi + t[0], hi + t[1], hi + t[2]},
                           tets);
  }
  const int n_art_tets = static_cast<int>(tets.size());

  // --- patch footprint on the wall grid ---
  // Angular halfwidth from the ellipse the vein cylinder cuts on the crown;
  // axial halfwidth Rv / sin(alpha) for the slanted cut.
  const double phi_max = std::asin(std::min(0.95, Rv / Ra));
  const double dth = 2.0 * kPi / (6.0 * n_ring);
  int k_phi = std::max<int>(1, static_cast<int>(std::llround(phi_max / dth)));
  k_phi = std::min(k_phi, static_cast<int>(std::floor((0.5 * kPi - 1e-9) / dth)));
  if (k_phi < 1) throw InputError("generate_junction: n_ring too coarse for the vein patch");

  const double w_ax = Rv / sa;
  const int l_c = static_cast<int>(std::llround(0.5 * artery_length / dx));
  const int k_ax = std::max<int>(1, static_cast<int>(std::llround(w_ax / dx)));
  if (l_c - k_ax < 1 || l_c + k_ax > n_axial - 1)
    throw InputError(
        "generate_junction: vein patch reaches the artery ends; increase artery_length or "
        "n_axial");

  const int ring0 = meshgen::disc_ring_offset(n_ring);
  const int nper = 6 * n_ring;
  auto wall_node = [&](int iphi, int jax) {  // iphi in [-k_phi,k_phi], jax in [-k_ax,k_ax]
    const int p = ((iphi % nper) + nper) % nper;
    return (l_c + jax) * npd + ring0 + p;
  };

  const int gphi = 2 * k_phi + 1, gax = 2 * k_ax + 1;
  std::map<int, int> patch_local;  // artery node id -> local grid index
  for (int i = -k_phi; i <= k_phi; ++i)
    for (int j = -k_ax; j <= k_ax; ++j)
      patch_local[wall_node(i, j)] = (i + k_phi) * gax + (j + k_ax);
  const int n_patch = gphi * gax;

  // Patch triangles: boundary wall faces of the artery whose nodes all lie in
  // the patch grid, taken with their outward winding.
  std::vector<std::array<int, 3>> patch_tris;
  for (const auto& f : meshgen::boundary_faces(tets)) {
    if (patch_local.count(f.nodes[0]) && patch_local.count(f.nodes[1]) &&
        patch_local.count(f.nodes[2]))
      patch_tris.push_back(f.nodes);
  }
  if (patch_tris.size() != static_cast<std::size_t>(8 * k_phi * k_ax))
    throw NumericalError("generate_junction: unexpected patch triangle count");

  // --- vein stations ---
  // Station 0 reuses the artery wall nodes; stations s >= 1 blend a straight
  // extrusion of the patch with the exact circular section (weight
  // smoothstep(s/n_vein)), the last station being the exact disc.
  const Vec3 base{l_c * dx, Ra, 0.0};             // crown point the vein grows from
  const Vec3 e_eta{sa, -ca, 0.0};                 // image of +x in the section plane
  const Vec3 e_xi{0.0, 0.0, 1.0};
  auto grid_uv = [&](int g) {                      // local grid index -> (xi, eta)
    const int i = g / gax - k_phi, j = g % gax - k_ax;
    return std::array<double, 2>{static_cast<double>(i) / k_phi,
                                 static_cast<double>(j) / k_ax};
  };
  auto station_pos = [&](int g, int s) {
    const auto [xi, eta] = grid_uv(g);
    const double f = static_cast<double>(s) / n_vein;
    const double w = f * f * (3.0 - 2.0 * f);
    const int i = g / gax - k_phi, j = g % gax - k_ax;
    const Vec3 p0 = nodes[wall_node(i, j)];
    const Vec3 straight = p0 + d * (f * vein_length);
    const double X = xi * std::sqrt(1.0 - 0.5 * eta * eta);   // square-to-disc
    const double Y = eta * std::sqrt(1.0 - 0.5 * xi * xi);
    const Vec3 round_pos = base + d * (f * vein_length) + e_xi * (Rv * X) + e_eta * (Rv * Y);
    return straight * (1.0 - w) + round_pos * w;
  };

  const int vein_base = n_art;
  for (int s = 1; s <= n_vein; ++s)
    for (int g = 0; g < n_patch; ++g)
      nodes.push_back(station_pos(g, s));

  auto sid = [&](int artery_id, int s) {
    return s == 0 ? artery_id : vein_base + (s - 1) * n_patch + patch_local.at(artery_id);
  };
  for (int s = 0; s < n_vein; ++s)
    for (const auto& t : patch_tris)
      meshgen::split_prism({sid(t[0], s), sid(t[1], s), sid(t[2], s), sid(t[0], s + 1),
                            sid(t[1], s + 1), sid(t[2], s + 1)},
                           tets);

  // Reject tangled extrusions before orientation fixing can mask them.
  for (std::size_t e = n_art_tets; e < tets.size(); ++e) {
    const auto& t = tets[e];
    if (detail::tet_signed_volume(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]) <=
        Mesh::kDegenerateVolume)
      throw InputError(
          "generate_junction: parameters produce a tangled or degenerate vein extrusion");
  }

  const int fv_first = vein_base + (n_vein - 1) * n_patch;
  auto label = [&](const std::array<int, 3>& f, const std::vector<Vec3>&) {
    int art_layer_min = n_axial + 1, art_layer_max = -1;
    bool all_artery = true, all_fv = true;
    for (int k = 0; k < 3; ++k) {
      if (f[k] < n_art) {
        const int lay = f[k] / npd;
        art_layer_min = std::min(art_layer_min, lay);
        art_layer_max = std::max(art_layer_max, lay);
      } else
        all_artery = false;
      if (f[k] < fv_first) all_fv = false;
    }
    if (all_artery && art_layer_max == 0) return PatchLabel::PA;
    if (all_artery && art_layer_min == n_axial) return PatchLabel::DA;
    if (all_fv) return PatchLabel::FV;
    return PatchLabel::WALL;
  };
  return meshgen::finalize(std::move(nodes), std::move(tets), label);
}

}  // namespace avflow

#endif  // AVFLOW_MESH_GENERATE_HPP
