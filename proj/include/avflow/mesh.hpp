#ifndef AVFLOW_MESH_HPP
#define AVFLOW_MESH_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avflow/common.hpp"

namespace avflow {

/// Boundary patch labels of the vessel configuration: proximal artery,
/// distal artery, fistula vein, and the vessel wall.
enum class PatchLabel : std::uint8_t { PA = 0, DA = 1, FV = 2, WALL = 3 };

inline const char* to_string(PatchLabel l) {
  switch (l) {
    case PatchLabel::PA: return "PA";
    case PatchLabel::DA: return "DA";
    case PatchLabel::FV: return "FV";
    case PatchLabel::WALL: return "WALL";
  }
  return "?";
}

inline std::optional<PatchLabel> patch_label_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "PA") return PatchLabel::PA;
  if (s == "DA") return PatchLabel::DA;
  if (s == "FV") return PatchLabel::FV;
  if (s == "WALL") return PatchLabel::WALL;
  return std::nullopt;
}

struct BoundaryFacet {
  std::array<int, 3> nodes;  // wound so the right-hand rule gives the outward normal
  PatchLabel label;
  int adjacent_tet = -1;
  Vec3 normal;  // unit, outward from adjacent_tet
  double area = 0.0;
  Vec3 centroid;
};

namespace detail {

inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(b - a, cross(c - a, d - a)) / 6.0;
}

// Canonical (sorted) face key for face-counting.
struct FaceKey {
  std::array<int, 3> n;
  bool operator<(const FaceKey& o) const { return n < o.n; }
  bool operator==(const FaceKey& o) const { return n == o.n; }
};

inline FaceKey face_key(int a, int b, int c) {
  std::array<int, 3> k{a, b, c};
  std::sort(k.begin(), k.end());
  return {k};
}

// Faces of tet (v0,v1,v2,v3), each wound so its normal points out of the tet
// (for a positively oriented tet).
inline std::array<std::array<int, 3>, 4> tet_faces(const std::array<int, 4>& t) {
  return {{{t[0], t[2], t[1]}, {t[0], t[1], t[3]}, {t[1], t[2], t[3]}, {t[0], t[3], t[2]}}};
}

}  // namespace detail

/// Immutable tetrahedral volume mesh with labeled boundary patches and the
/// geometric caches needed by assembly and postprocessing. Construction
/// validates: positive tet volumes, watertight labeled boundary, outward unit
/// normals, node indices in range. Degenerate tets (|V| < 1e-18 m^3) are
/// rejected.
class Mesh {
public:
  static constexpr double kDegenerateVolume = 1e-18;  // m^3

  Mesh(std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets,
       std::vector<std::pair<std::array<int, 3>, PatchLabel>> labeled_facets)
      : nodes_(std::move(nodes)), tets_(std::move(tets)) {
    build(std::move(labeled_facets));
  }

  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_tets() const { return static_cast<int>(tets_.size()); }
  int n_boundary_facets() const { return static_cast<int>(facets_.size()); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const std::vector<BoundaryFacet>& boundary_facets() const { return facets_; }

  const Vec3& node(int i) const { return nodes_[i]; }
  const std::array<int, 4>& tet(int e) const { return tets_[e]; }

  double tet_volume(int e) const { return volume_[e]; }
  /// Characteristic element length: diameter of the equal-volume sphere,
  /// normalized so a regular tet of edge a gives h_e = a. h_e = (12 V / sqrt(2))^(1/3).
  double characteristic_length(int e) const { return h_e_[e]; }

  double total_volume() const { return total_volume_; }

  bool has_label(PatchLabel l) const { return label_facets_[static_cast<int>(l)] > 0; }
  int facet_count(PatchLabel l) const { return label_facets_[static_cast<int>(l)]; }
  double patch_area(PatchLabel l) const { return label_area_[static_cast<int>(l)]; }

  /// Indices into boundary_facets() for one patch.
  const std::vector<int>& patch_facets(PatchLabel l) const { return patch_facets_[static_cast<int>(l)]; }
  /// Node indices belonging to one patch (sorted, unique).
  const std::vector<int>& patch_nodes(PatchLabel l) const { return patch_nodes_[static_cast<int>(l)]; }

  Vec3 bbox_min() const { return bbox_min_; }
  Vec3 bbox_max() const { return bbox_max_; }

  /// A usable simulation domain needs proximal-artery inflow, fistula-vein
  /// outflow, and a rigid wall.
  void require_simulation_patches() const {
    for (PatchLabel l : {PatchLabel::PA, PatchLabel::FV, PatchLabel::WALL})
      if (!has_label(l))
        throw InputError("mesh: missing required '" + std::string(to_string(l)) + "' patch");
  }

private:
  void build(std::vector<std::pair<std::array<int, 3>, PatchLabel>> labeled) {
    const int nn = n_nodes();
    if (nn < 4 || tets_.empty()) throw InputError("mesh: need at least 4 nodes and 1 tet");

    volume_.resize(tets_.size());
    h_e_.resize(tets_.size());
    total_volume_ = 0.0;
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      auto& t = tets_[e];
      for (int k = 0; k < 4; ++k)
        if (t[k] < 0 || t[k] >= nn)
          throw InputError("mesh: tet " + std::to_string(e) + " node index out of range");
      double v = detail::tet_signed_volume(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]], nodes_[t[3]]);
      if (v < 0.0) {  // fix orientation
        std::swap(t[2], t[3]);
        v = -v;
      }
      if (v < kDegenerateVolume)
        throw InputError("mesh: degenerate or inverted tet " + std::to_string(e) +
                         " (volume " + format_sig(v, 3) + " m^3)");
      volume_[e] = v;
      h_e_[e] = std::cbrt(12.0 * v / std::sqrt(2.0));
      total_volume_ += v;
    }

    // Count faces; every once-shared face must appear exactly once in the
    // labeled set (watertight boundary).
    std::map<detail::FaceKey, std::pair<int, int>> count;  // key -> (count, owning tet)
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      for (const auto& f : detail::tet_faces(tets_[e])) {
        auto key = detail::face_key(f[0], f[1], f[2]);
        auto it = count.find(key);
        if (it == count.end())
          count.emplace(key, std::make_pair(1, static_cast<int>(e)));
        else {
          it->second.first++;
          if (it->second.first > 2)
            throw InputError("mesh: face shared by more than two tets (non-manifold)");
        }
      }
    }

    std::map<detail::FaceKey, PatchLabel> label_of;
    for (const auto& [f, lab] : labeled) {
      for (int k = 0; k < 3; ++k)
        if (f[k] < 0 || f[k] >= nn) throw InputError("mesh: boundary facet node index out of range");
      auto key = detail::face_key(f[0], f[1], f[2]);
      if (label_of.count(key)) throw InputError("mesh: duplicate boundary facet");
      auto it = count.find(key);
      if (it == count.end() || it->second.first != 1)
        throw InputError("mesh: labeled facet is not a once-shared tet face");
      label_of.emplace(key, lab);
    }

    facets_.clear();
    for (const auto& [key, cv] : count) {
      if (cv.first != 1) continue;
      auto it = label_of.find(key);
      if (it == label_of.end())
        throw InputError("mesh: boundary is not watertight (unlabeled boundary face on tet " +
                         std::to_string(cv.second) + ")");
      BoundaryFacet bf;
      bf.label = it->second;
      bf.adjacent_tet = cv.second;
      // Recover the outward winding from the owning tet's face list.
      const auto& t = tets_[cv.second];
      for (const auto& f : detail::tet_faces(t)) {
        if (detail::face_key(f[0], f[1], f[2]) == key) {
          bf.nodes = f;
          break;
        }
      }
      const Vec3 &a = nodes_[bf.nodes[0]], &b = nodes_[bf.nodes[1]], &c = nodes_[bf.nodes[2]];
      Vec3 nrm = cross(b - a, c - a);
      double twice_area = norm(nrm);
      if (twice_area <= 0.0) throw InputError("mesh: degenerate boundary facet");
      bf.area = 0.5 * twice_area;
      bf.normal = nrm / twice_area;
      bf.centroid = (a + b + c) / 3.0;
      facets_.push_back(bf);
    }
    if (facets_.size() != label_of.size())
      throw InputError("mesh: some labeled facets are interior faces");

    label_facets_.fill(0);
    label_area_.fill(0.0);
    for (std::size_t i = 0; i < facets_.size(); ++i) {
      const auto& bf = facets_[i];
      const int li = static_cast<int>(bf.label);
      label_facets_[li]++;
      label_area_[li] += bf.area;
      patch_facets_[li].push_back(static_cast<int>(i));
      for (int k = 0; k < 3; ++k) patch_nodes_[li].push_back(bf.nodes[k]);
    }
    for (auto& pn : patch_nodes_) {
      std::sort(pn.begin(), pn.end());
      pn.erase(std::unique(pn.begin(), pn.end()), pn.end());
    }

    bbox_min_ = bbox_max_ = nodes_[0];
    for (const auto& p : nodes_) {
      bbox_min_.x = std::min(bbox_min_.x, p.x);
      bbox_min_.y = std::min(bbox_min_.y, p.y);
      bbox_min_.z = std::min(bbox_min_.z, p.z);
      bbox_max_.x = std::max(bbox_max_.x, p.x);
      bbox_max_.y = std::max(bbox_max_.y, p.y);
      bbox_max_.z = std::max(bbox_max_.z, p.z);
    }
  }

  std::vector<Vec3> nodes_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<BoundaryFacet> facets_;
  std::vector<double> volume_;
  std::vector<double> h_e_;
  double total_volume_ = 0.0;
  std::array<int, 4> label_facets_{};
  std::array<double, 4> label_area_{};
  std::array<std::vector<int>, 4> patch_facets_;
  std::array<std::vector<int>, 4> patch_nodes_;
  Vec3 bbox_min_, bbox_max_;
};

/// Standalone form of the characteristic length used by the Mesh cache.
inline double characteristic_length_from_volume(double volume) {
  return std::cbrt(12.0 * volume / std::sqrt(2.0));
}

/// A mesh used for flow simulation needs an inlet, the vein outlet, and a wall.
inline void require_simulation_patches(const Mesh& mesh) {
  for (PatchLabel l : {PatchLabel::PA, PatchLabel::FV, PatchLabel::WALL})
    if (!mesh.has_label(l))
      throw InputError(std::string("mesh: missing required boundary patch ") + to_string(l));
}

}  // namespace avflow

#endif  // AVFLOW_MESH_HPP
