#include "upright/cut_plane.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "upright/mass_properties.hpp"

namespace upright {

namespace {

using Vec2 = Eigen::Vector2d;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross2(p[i], p[(i + 1) % p.size()]);
  return 0.5 * a;
}

bool point_in_polygon(const Vec2& q, const std::vector<Vec2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross2(b - a, c - a), d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c), d4 = cross2(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

// Point strictly inside or on the boundary of the triangle (a, b, c) taken
// with orientation sign `s`.
bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, double s) {
  return s * cross2(b - a, p - a) >= 0 && s * cross2(c - b, p - b) >= 0 && s * cross2(a - c, p - c) >= 0;
}

// Ear clipping of a simple polygon (indices into `pts`). Triangles follow the
// polygon's winding.
void ear_clip_reduced(std::vector<std::uint32_t> poly, const std::vector<Vec2>& pts, std::vector<Face>& out) {
  auto at = [&](std::uint32_t i) -> const Vec2& { return pts[i]; };
  std::vector<Vec2> loc;
  for (auto i : poly) loc.push_back(at(i));
  const double s = signed_area(loc) >= 0 ? 1.0 : -1.0;
  while (poly.size() > 3) {
    const std::size_t n = poly.size();
    std::size_t best = n;
    double best_area = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& a = at(poly[(k + n - 1) % n]);
      const Vec2& b = at(poly[k]);
      const Vec2& c = at(poly[(k + 1) % n]);
      const double area = s * cross2(b - a, c - a);
      if (area <= 0) continue;
      bool blocked = false;
      for (std::size_t m = 0; m < n && !blocked; ++m) {
        if (m == k || m == (k + 1) % n || m == (k + n - 1) % n) continue;
        const Vec2& p = at(poly[m]);
        // Bridge duplicates share coordinates with an ear corner; skip them.
        if (p == a || p == b || p == c) continue;
        blocked = in_triangle(p, a, b, c, s);
      }
      if (blocked) continue;
      best = k;
      break;
    }
    if (best == n) {
      // Numerically stuck; take the fattest convex corner.
      for (std::size_t k = 0; k < n; ++k) {
        const Vec2& a = at(poly[(k + n - 1) % n]);
        const Vec2& c = at(poly[(k + 1) % n]);
        const double area = s * cross2(at(poly[k]) - a, c - a);
        if (area > best_area) best_area = area, best = k;
      }
      if (best == n) throw MeshError("cut_plane: cannot triangulate the cross-section");
    }
    out.push_back({poly[(best + n - 1) % n], poly[best], poly[(best + 1) % n]});
    poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(best));
  }
  out.push_back({poly[0], poly[1], poly[2]});
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Planar side faces leave straight runs of points on the loop. Those are
// dropped before ear clipping and stitched back by splitting the cap
// triangles along the edges that carried them.
void triangulate_loop(const std::vector<std::uint32_t>& poly, const std::vector<Vec2>& pts, std::vector<Face>& out) {
  const std::size_t n = poly.size();
  std::vector<bool> straight(n, false);
  std::size_t kept = n;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 u = pts[poly[k]] - pts[poly[(k + n - 1) % n]];
    const Vec2 v = pts[poly[(k + 1) % n]] - pts[poly[k]];
    if (std::abs(cross2(u, v)) <= std::max(1e-9 * u.norm() * v.norm(), kMinFaceArea) && u.dot(v) > 0) {
      straight[k] = true;
      --kept;
    }
  }
  if (kept < 3) throw MeshError("cut_plane: degenerate cross-section loop");
  std::vector<std::uint32_t> reduced;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> carried;
  std::size_t first = 0;
  while (straight[first]) ++first;
  std::uint32_t last = poly[first];
  std::vector<std::uint32_t> run;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t k = (first + j) % n;
    if (straight[k]) {
      run.push_back(poly[k]);
      continue;
    }
    reduced.push_back(last);
    if (!run.empty()) carried[edge_key(last, poly[k])] = std::move(run);
    run.clear();
    last = poly[k];
  }
  std::vector<Face> tris;
  ear_clip_reduced(reduced, pts, tris);
  while (!tris.empty()) {
    Face t = tris.back();
    tris.pop_back();
    bool split = false;
    for (int e = 0; e < 3 && !split; ++e) {
      auto it = carried.find(edge_key(t[e], t[(e + 1) % 3]));
      if (it == carried.end()) continue;
      const std::uint32_t w = t[(e + 2) % 3];
      std::uint32_t prev = t[e];
      for (auto p : it->second) {
        tris.push_back({prev, p, w});
        prev = p;
      }
      tris.push_back({prev, t[(e + 1) % 3], w});
      carried.erase(it);
      split = true;
    }
    if (!split) out.push_back(t);
  }
}

// Splices each hole into its outer loop through a visible bridge.
std::vector<std::uint32_t> bridge_holes(std::vector<std::uint32_t> outer,
                                        std::vector<std::vector<std::uint32_t>> holes,
                                        const std::vector<Vec2>& pts) {
  auto max_x = [&](const std::vector<std::uint32_t>& h) {
    double m = -INFINITY;
    for (auto i : h) m = std::max(m, pts[i].x());
    return m;
  };
  std::sort(holes.begin(), holes.end(), [&](const auto& a, const auto& b) { return max_x(a) > max_x(b); });
  for (const auto& hole : holes) {
    std::size_t hk = 0;
    for (std::size_t k = 1; k < hole.size(); ++k) {
      if (pts[hole[k]].x() > pts[hole[hk]].x()) hk = k;
    }
    const Vec2 h = pts[hole[hk]];
    std::vector<std::size_t> order(outer.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return (pts[outer[a]] - h).squaredNorm() < (pts[outer[b]] - h).squaredNorm(); });
    std::size_t pick = outer.size();
    for (std::size_t ok : order) {
      const Vec2 o = pts[outer[ok]];
      bool clear = true;
      auto check = [&](const std::vector<std::uint32_t>& loop) {
        for (std::size_t k = 0; k < loop.size() && clear; ++k) {
          const Vec2& a = pts[loop[k]];
          const Vec2& b = pts[loop[(k + 1) % loop.size()]];
          if (segments_cross(h, o, a, b)) clear = false;
        }
      };
      check(outer);
      for (const auto& other : holes) check(other);
      if (clear) {
        pick = ok;
        break;
      }
    }
    if (pick == outer.size()) throw MeshError("cut_plane: cannot connect a hole in the cross-section");
    std::vector<std::uint32_t> merged(outer.begin(), outer.begin() + static_cast<std::ptrdiff_t>(pick) + 1);
    for (std::size_t k = 0; k <= hole.size(); ++k) merged.push_back(hole[(hk + k) % hole.size()]);
    merged.insert(merged.end(), outer.begin() + static_cast<std::ptrdiff_t>(pick), outer.end());
    outer = std::move(merged);
  }
  return outer;
}

TriMesh largest_shell(const TriMesh& mesh, std::size_t* dropped) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<std::uint32_t> parent(nv);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& f : mesh.faces) {
    parent[find(f[1])] = find(f[0]);
    parent[find(f[2])] = find(f[0]);
  }
  std::map<std::uint32_t, double> volume;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    volume[find(f[0])] += a.dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]])) / 6.0;
  }
  *dropped = volume.empty() ? 0 : volume.size() - 1;
  if (volume.size() <= 1) return mesh;
  const std::uint32_t keep =
      std::max_element(volume.begin(), volume.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
  TriMesh out;
  std::vector<std::uint32_t> remap(nv, UINT32_MAX);
  for (const auto& f : mesh.faces) {
    if (find(f[0]) != keep) continue;
    Face g;
    for (int k = 0; k < 3; ++k) {
      if (remap[f[k]] == UINT32_MAX) {
        remap[f[k]] = static_cast<std::uint32_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[f[k]]);
      }
      g[k] = remap[f[k]];
    }
    out.faces.push_back(g);
  }
  return out;
}

}  // namespace

CutResult cut_plane(const TriMesh& mesh, double height) {
  if (mesh.vertices.empty()) throw MeshError("cut_plane: empty mesh");
  if (!std::isfinite(height)) throw MeshError("cut_plane: height must be finite");
  const Aabb box = bounding_box(mesh);
  CutResult res;
  const double p = box.lo.z() + height;
  res.plane = p;
  if (height <= 0.0) {
    res.mesh = mesh;
    return res;
  }
  if (p >= box.hi.z()) throw MeshError("cut_plane: plane at or above the top of the mesh leaves nothing");

  // Vertices this close to the plane are moved onto it, so the cut never
  // creates slivers next to an existing vertex.
  const double tol = 1e-9 * box.extent().z();
  res.cut = true;
  enum Side { Below, On, Above };
  std::vector<Side> side(mesh.vertices.size());
  TriMesh out;
  std::vector<std::uint32_t> keep(mesh.vertices.size(), UINT32_MAX);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double z = mesh.vertices[i].z();
    side[i] = z > p + tol ? Above : (z < p - tol ? Below : On);
    if (side[i] == Below) continue;
    keep[i] = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[i]);
    if (side[i] == On) out.vertices.back().z() = p;
  }
  std::unordered_map<std::uint64_t, std::uint32_t> crossing;
  auto cross_vertex = [&](std::uint32_t a, std::uint32_t b) {
    const std::uint64_t key = edge_key(std::min(a, b), std::max(a, b));
    auto it = crossing.find(key);
    if (it != crossing.end()) return it->second;
    const Vec3& va = mesh.vertices[a];
    const Vec3& vb = mesh.vertices[b];
    const double t = (p - va.z()) / (vb.z() - va.z());
    Vec3 x = va + t * (vb - va);
    x.z() = p;
    const auto id = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(x);
    crossing.emplace(key, id);
    return id;
  };

  for (const auto& f : mesh.faces) {
    if (side[f[0]] != Above && side[f[1]] != Above && side[f[2]] != Above) continue;
    std::vector<std::uint32_t> poly;
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f[k], b = f[(k + 1) % 3];
      if (side[a] != Below) poly.push_back(keep[a]);
      if ((side[a] == Above && side[b] == Below) || (side[a] == Below && side[b] == Above)) {
        poly.push_back(cross_vertex(a, b));
      }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) out.faces.push_back({poly[0], poly[k], poly[k + 1]});
  }
  if (out.faces.empty()) throw MeshError("cut_plane: nothing remains above the plane");

  // Open boundary lies on the plane; walk it into loops.
  std::unordered_map<std::uint64_t, int> directed;
  for (const auto& f : out.faces) {
    for (int k = 0; k < 3; ++k) directed[edge_key(f[k], f[(k + 1) % 3])]++;
  }
  std::unordered_map<std::uint32_t, std::uint32_t> next;
  for (const auto& f : out.faces) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f[k], b = f[(k + 1) % 3];
      if (!directed.count(edge_key(b, a))) {
        // Cap traverses the edge backwards.
        if (!next.emplace(b, a).second) throw MeshError("cut_plane: non-manifold cross-section");
      }
    }
  }
  std::vector<Vec2> pts(out.vertices.size());
  for (std::size_t i = 0; i < out.vertices.size(); ++i) pts[i] = out.vertices[i].head<2>();
  std::vector<std::vector<std::uint32_t>> loops;
  while (!next.empty()) {
    const std::uint32_t start = next.begin()->first;
    std::vector<std::uint32_t> loop;
    std::uint32_t cur = start;
    do {
      auto it = next.find(cur);
      if (it == next.end()) throw MeshError("cut_plane: open cross-section loop");
      loop.push_back(cur);
      cur = it->second;
      next.erase(it);
    } while (cur != start);
    if (loop.size() >= 3) loops.push_back(std::move(loop));
  }
  // The cap faces down, so outer loops wind clockwise seen from above.
  std::vector<std::vector<std::uint32_t>> outers, holes;
  auto as_points = [&](const std::vector<std::uint32_t>& l) {
    std::vector<Vec2> q;
    for (auto i : l) q.push_back(pts[i]);
    return q;
  };
  for (auto& l : loops) (signed_area(as_points(l)) < 0 ? outers : holes).push_back(l);
  std::vector<std::vector<std::vector<std::uint32_t>>> owned(outers.size());
  for (auto& h : holes) {
    std::size_t owner = outers.size();
    double owner_area = INFINITY;
    for (std::size_t o = 0; o < outers.size(); ++o) {
      const auto poly = as_points(outers[o]);
      if (!point_in_polygon(pts[h[0]], poly)) continue;
      const double a = std::abs(signed_area(poly));
      if (a < owner_area) owner_area = a, owner = o;
    }
    if (owner == outers.size()) throw MeshError("cut_plane: cross-section hole without an enclosing loop");
    owned[owner].push_back(h);
  }
  for (std::size_t o = 0; o < outers.size(); ++o) {
    triangulate_loop(bridge_holes(outers[o], owned[o], pts), pts, out.faces);
  }

  std::size_t dropped = 0;
  out = largest_shell(out, &dropped);
  res.shells_dropped = dropped;
  require_watertight(out);
  res.mesh = translated(out, Vec3(0.0, 0.0, -bounding_box(out).lo.z()));
  return res;
}

}  // namespace upright
