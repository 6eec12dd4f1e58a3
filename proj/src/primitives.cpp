#include "upright/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace upright {

VoxelGrid::VoxelGrid(std::array<int, 3> d, Vec3 c, Vec3 o)
    : dims(d), cell(std::move(c)), origin(std::move(o)),
      occupied(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0) {
  if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0) throw std::invalid_argument("voxel grid dims must be positive");
}

bool VoxelGrid::filled(int i, int j, int k) const {
  if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= dims[2]) return false;
  return occupied[(static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i] != 0;
}

void VoxelGrid::set(int i, int j, int k, bool value) {
  occupied.at((static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i) = value ? 1 : 0;
}

void VoxelGrid::fill_box(const Vec3& lo, const Vec3& hi) {
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        Vec3 c = origin + Vec3((i + 0.5) * cell.x(), (j + 0.5) * cell.y(), (k + 0.5) * cell.z());
        if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all()) set(i, j, k);
      }
}

TriMesh voxel_surface(const VoxelGrid& grid) {
  TriMesh mesh;
  std::map<std::array<int, 3>, std::uint32_t> lattice;
  auto vertex = [&](std::array<int, 3> p) {
    auto [it, inserted] = lattice.try_emplace(p, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      mesh.vertices.push_back(grid.origin + Vec3(p[0] * grid.cell.x(), p[1] * grid.cell.y(),
                                                 p[2] * grid.cell.z()));
    }
    return it->second;
  };

  // For each axis and side, (u, w) are the in-face axes ordered so that
  // u x w points out of the cell.
  struct FaceDir {
    int axis;
    int side;
    int u;
    int w;
  };
  static constexpr FaceDir kDirs[6] = {
      {0, 1, 1, 2}, {0, 0, 2, 1}, {1, 1, 2, 0}, {1, 0, 0, 2}, {2, 1, 0, 1}, {2, 0, 1, 0}};

  for (int k = 0; k < grid.dims[2]; ++k)
    for (int j = 0; j < grid.dims[1]; ++j)
      for (int i = 0; i < grid.dims[0]; ++i) {
        if (!grid.filled(i, j, k)) continue;
        const std::array<int, 3> c{i, j, k};
        for (const FaceDir& d : kDirs) {
          std::array<int, 3> nb = c;
          nb[d.axis] += d.side ? 1 : -1;
          if (grid.filled(nb[0], nb[1], nb[2])) continue;
          std::array<int, 3> base = c;
          base[d.axis] += d.side;
          auto corner = [&](int du, int dw) {
            std::array<int, 3> p = base;
            p[d.u] += du;
            p[d.w] += dw;
            return vertex(p);
          };
          std::uint32_t a = corner(0, 0), b = corner(1, 0), cc = corner(1, 1), e = corner(0, 1);
          mesh.faces.push_back({a, b, cc});
          mesh.faces.push_back({a, cc, e});
        }
      }
  return mesh;
}

TriMesh box_grid(const Vec3& lo, const Vec3& hi, std::array<int, 3> segments) {
  Vec3 ext = hi - lo;
  VoxelGrid grid(segments, Vec3(ext.x() / segments[0], ext.y() / segments[1], ext.z() / segments[2]), lo);
  std::fill(grid.occupied.begin(), grid.occupied.end(), 1);
  TriMesh mesh = voxel_surface(grid);
  // Pin the far corners exactly so extents are not perturbed by rounding.
  for (Vec3& v : mesh.vertices) {
    for (int a = 0; a < 3; ++a) {
      if (std::abs(v[a] - hi[a]) < 1e-9 * (1.0 + std::abs(ext[a]))) v[a] = hi[a];
    }
  }
  return mesh;
}

TriMesh box(const Vec3& lo, const Vec3& hi) { return box_grid(lo, hi, {1, 1, 1}); }

TriMesh icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto [it, inserted] = mid.try_emplace({key.first, key.second}, static_cast<std::uint32_t>(v.size()));
      if (inserted) v.push_back((v[a] + v[b]).normalized());
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& tri : f) {
      std::uint32_t ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriMesh mesh;
  mesh.faces = std::move(f);
  mesh.vertices.reserve(v.size());
  for (const Vec3& p : v) mesh.vertices.push_back(center + radius * p);
  return mesh;
}

TriMesh lathe(const std::vector<std::pair<double, double>>& profile, int segments) {
  if (profile.size() < 3 || segments < 3) throw std::invalid_argument("lathe needs >= 3 profile points and segments");
  if (profile.front().first != 0.0 || profile.back().first != 0.0) {
    throw std::invalid_argument("lathe profile must start and end on the axis");
  }
  TriMesh mesh;
  const std::size_t m = profile.size();
  std::vector<std::uint32_t> ring_start(m);
  for (std::size_t i = 0; i < m; ++i) {
    ring_start[i] = static_cast<std::uint32_t>(mesh.vertices.size());
    auto [r, z] = profile[i];
    if (i == 0 || i + 1 == m) {
      mesh.vertices.emplace_back(0.0, 0.0, z);
      continue;
    }
    if (r <= 0.0) throw std::invalid_argument("interior lathe profile points need positive radius");
    for (int j = 0; j < segments; ++j) {
      double th = 2.0 * std::numbers::pi * j / segments;
      mesh.vertices.emplace_back(r * std::cos(th), r * std::sin(th), z);
    }
  }
  auto ring = [&](std::size_t i, int j) {
    return ring_start[i] + static_cast<std::uint32_t>(((j % segments) + segments) % segments);
  };
  for (int j = 0; j < segments; ++j) mesh.faces.push_back({ring_start[0], ring(1, j + 1), ring(1, j)});
  for (std::size_t i = 1; i + 2 < m; ++i) {
    for (int j = 0; j < segments; ++j) {
      std::uint32_t a = ring(i, j), b = ring(i, j + 1), c = ring(i + 1, j + 1), d = ring(i + 1, j);
      mesh.faces.push_back({a, b, c});
      mesh.faces.push_back({a, c, d});
    }
  }
  for (int j = 0; j < segments; ++j) mesh.faces.push_back({ring(m - 2, j), ring(m - 2, j + 1), ring_start[m - 1]});
  return mesh;
}

std::vector<std::pair<double, double>> capsule_profile(double radius, double cylinder_length, int cap_rings,
                                                       int side_rings) {
  std::vector<std::pair<double, double>> p;
  const double half_pi = std::numbers::pi / 2.0;
  // Bottom hemisphere centered at z = radius.
  for (int i = 0; i <= cap_rings; ++i) {
    double a = -half_pi + half_pi * i / cap_rings;
    p.emplace_back(i == 0 ? 0.0 : radius * std::cos(a), radius + radius * std::sin(a));
  }
  for (int i = 1; i < side_rings; ++i) p.emplace_back(radius, radius + cylinder_length * i / side_rings);
  for (int i = 0; i <= cap_rings; ++i) {
    double a = half_pi * i / cap_rings;
    p.emplace_back(i == cap_rings ? 0.0 : radius * std::cos(a), radius + cylinder_length + radius * std::sin(a));
  }
  return p;
}

std::vector<std::pair<double, double>> frustum_profile(double bottom_radius, double top_radius, double height,
                                                       int disk_rings, int side_rings) {
  std::vector<std::pair<double, double>> p;
  for (int i = 0; i <= disk_rings; ++i) p.emplace_back(bottom_radius * i / disk_rings, 0.0);
  for (int i = 1; i < side_rings; ++i) {
    double s = static_cast<double>(i) / side_rings;
    p.emplace_back(bottom_radius + (top_radius - bottom_radius) * s, height * s);
  }
  for (int i = disk_rings; i >= 0; --i) p.emplace_back(top_radius * i / disk_rings, height);
  return p;
}

TriMesh deformed(const TriMesh& mesh, const std::function<Vec3(const Vec3&)>& map) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = map(v);
  return out;
}

}  // namespace upright
