#pragma once

#include <cstddef>

#include "upright/mesh.hpp"

namespace upright {

struct CutResult {
  TriMesh mesh;
  double plane = 0.0;           // absolute z of the plane
  bool cut = false;             // false when the plane was below the mesh
  std::size_t shells_dropped = 0;
};

/// Removes everything below z = min_z + height, closes the section with a
/// flat cap and re-grounds the result. A plane at or below the lowest vertex
/// returns the input untouched. Vertices within 1e-9 of the mesh height from the
/// plane are moved onto it and become part of the section. If the cut splits the
/// mesh, only the largest shell by volume is kept. Throws MeshError when
/// nothing would remain.
CutResult cut_plane(const TriMesh& mesh, double height);

}  // namespace upright
