#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "upright/mesh.hpp"

namespace upright {

/// Dense occupancy grid of axis-aligned cells; `filled(i, j, k)` indexes cells.
struct VoxelGrid {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 cell = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::vector<char> occupied;

  VoxelGrid(std::array<int, 3> dims, Vec3 cell, Vec3 origin);
  bool filled(int i, int j, int k) const;
  void set(int i, int j, int k, bool value = true);
  /// Marks every cell whose center lies inside [lo, hi].
  void fill_box(const Vec3& lo, const Vec3& hi);
};

/// Boundary surface of the occupied cells, two triangles per exposed cell
/// face, vertices shared on the lattice. Cells touching only along an edge
/// or a corner produce non-manifold output; callers avoid such layouts.
TriMesh voxel_surface(const VoxelGrid& grid);

/// Axis-aligned box [lo, hi] with `segments` grid divisions per axis.
TriMesh box_grid(const Vec3& lo, const Vec3& hi, std::array<int, 3> segments);

/// Twelve-triangle box.
TriMesh box(const Vec3& lo, const Vec3& hi);

/// Geodesic sphere: icosahedron refined `subdivisions` times, projected onto
/// the sphere.
TriMesh icosphere(const Vec3& center, double radius, int subdivisions);

/// Solid of revolution about the z axis. `profile` is a list of (radius, z)
/// points from the bottom pole to the top pole; both ends must have radius 0.
TriMesh lathe(const std::vector<std::pair<double, double>>& profile, int segments);

/// Profile of a capsule standing on its axis: hemisphere, cylinder, hemisphere.
std::vector<std::pair<double, double>> capsule_profile(double radius, double cylinder_length,
                                                       int cap_rings, int side_rings);

/// Profile of a frustum with flat disks at both ends, bottom at z = 0.
std::vector<std::pair<double, double>> frustum_profile(double bottom_radius, double top_radius,
                                                       double height, int disk_rings, int side_rings);

/// Applies `map` to every vertex.
TriMesh deformed(const TriMesh& mesh, const std::function<Vec3(const Vec3&)>& map);

}  // namespace upright
