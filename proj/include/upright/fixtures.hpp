#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "upright/mesh.hpp"

namespace upright {

/// Synthetic test meshes with a known way of falling over. All are closed,
/// consistently oriented, grounded (min z = 0) and built deterministically.
///
///   leaning-block    box sheared toward +x until its center of mass lies
///                    beyond the +x edge of the footprint
///   inverted-cone    apex-down frustum on a small tip with the wide top offset
///                    sideways; every tilt lowers the center of mass
///   offset-capsule   capsule on its round end, bent so its center of mass
///                    projects outside any low flat cut of the bottom cap
///   short-leg-biped  two-legged voxel figure whose right leg is short and
///                    whose torso leans forward
TriMesh make_fixture(const std::string& name);

std::vector<std::string> fixture_names();

class UnknownFixtureError : public std::invalid_argument {
 public:
  explicit UnknownFixtureError(const std::string& name);
};

}  // namespace upright
