#pragma once

#include <vector>

#include "upright/mesh.hpp"

namespace upright {

/// Rigid-body mass data of a closed mesh of uniform density.
struct MassProperties {
  double mass = 0.0;             // kg
  double volume = 0.0;           // m^3
  Vec3 com = Vec3::Zero();       // m, mesh frame
  Mat3 inertia = Mat3::Zero();   // kg m^2 about com, mesh axes
};

/// Cotangent of MassProperties used to seed reverse-mode passes.
struct MassPropertiesAdjoint {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
};

class MassPropertiesError : public MeshError {
 public:
  using MeshError::MeshError;
};

/// Exact volume integrals over the solid bounded by `mesh`, decomposed into
/// signed tetrahedra against the origin. Throws MassPropertiesError for
/// (near) zero volume or inward orientation.
MassProperties compute_mass_properties(const TriMesh& mesh, double density);

/// Reverse-mode derivative of compute_mass_properties: returns d<seed, props>/dX
/// per vertex. Only the symmetric part of `seed.inertia` contributes.
std::vector<Vec3> mass_properties_gradient(const TriMesh& mesh, double density,
                                           const MassPropertiesAdjoint& seed);

}  // namespace upright
