#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "upright/mesh.hpp"

namespace upright {

using Vec2 = Eigen::Vector2d;

/// Weights of the joint objective.
struct LossWeights {
  // fidelity sits on the scale of the physical terms
  double fidelity = 1e5;
  double stand = 1e5;
  double stable = 1e5;
  double normal = 1e4;
  double bottom_laplacian = 1e7;

  void validate() const;
};

/// Tilt perturbations used by the stable-equilibrium loss: `directions`
/// horizontal axes evenly spaced on the circle starting at +x, each tilting
/// by `angle` radians.
struct TiltProbe {
  double angle = 0.05;
  int directions = 20;

  void validate() const;
  Vec2 direction(int k) const;
};

/// Scalar loss with its gradient with respect to the vertices. `branch`
/// hashes the discrete choices made during evaluation (argmin vertices,
/// active hinges, selected sets); finite-difference checks compare it.
struct LossGrad {
  double value = 0.0;
  std::vector<Vec3> gradient;
  std::uint64_t branch = 0;
};

/// Squared Frobenius deviation of the final rotation from the initial one.
double stand_loss(const Mat3& final_rotation, const Mat3& initial_rotation = Mat3::Identity());

/// Rotation by `angle` about the horizontal axis (v, 0).
Mat3 tilt_rotation(double angle, const Vec2& v);

/// Height of `com` above the lowest vertex after rotating mesh and com about
/// the horizontal axis (v, 0) through the origin.
double com_height_after_tilt(const TriMesh& mesh, const Vec3& com, double angle, const Vec2& v);

struct StableEquilibriumDetail {
  double value = 0.0;
  double rest_height = 0.0;
  std::vector<double> tilted_heights;  // one per probe direction
};

/// Mean over probe directions of max(H_rest - H_tilted, 0): positive when some
/// tilt lowers the center of mass.
StableEquilibriumDetail stable_equilibrium_detail(const TriMesh& mesh, const Vec3& com, const TiltProbe& probe);
double stable_equilibrium_loss(const TriMesh& mesh, const Vec3& com, const TiltProbe& probe);

/// Same loss with the center of mass computed from the mesh, differentiated
/// through the mass properties and the lowest-vertex selection.
LossGrad stable_equilibrium_grad(const TriMesh& mesh, double density, const TiltProbe& probe);

/// Mean of 1 - n_i . n_j over adjacent face pairs. Throws on an empty set.
double normal_consistency_loss(const TriMesh& mesh, const TrianglePairSet& pairs);
LossGrad normal_consistency_grad(const TriMesh& mesh, const TrianglePairSet& pairs);

/// Mean Laplacian-coordinate norm over the bottom vertices; 0 for an empty
/// set.
double bottom_laplacian_loss(const TriMesh& mesh, const BottomVertexSet& bottom,
                             const std::vector<std::vector<std::uint32_t>>& neighbors);
double bottom_laplacian_loss(const TriMesh& mesh, const BottomVertexSet& bottom);
LossGrad bottom_laplacian_grad(const TriMesh& mesh, const BottomVertexSet& bottom,
                               const std::vector<std::vector<std::uint32_t>>& neighbors);

/// Mean squared vertex displacement from `reference`. Throws MeshError when
/// the topologies differ.
double fidelity_loss(const TriMesh& mesh, const TriMesh& reference);
LossGrad fidelity_grad(const TriMesh& mesh, const TriMesh& reference);

/// Per-term values entering the weighted total. `fidelity` is already divided
/// by the squared bounding-box diagonal of the reference.
struct LossComponents {
  double stand = 0.0;
  double stable = 0.0;
  double normal = 0.0;
  double bottom_laplacian = 0.0;
  double fidelity = 0.0;
};

struct ActiveTerms {
  bool stand = false;
  bool stable = true;
  bool normal = true;
  bool bottom_laplacian = true;
  bool fidelity = true;
};

/// The standability term runs only on iterations divisible by `stand_stride`.
ActiveTerms active_terms(std::size_t iteration, std::size_t stand_stride = 10);

struct WeightedLoss {
  double total = 0.0;
  ActiveTerms active;
};

WeightedLoss total_loss(const LossComponents& c, const LossWeights& w, std::size_t iteration,
                        std::size_t stand_stride = 10);

}  // namespace upright
