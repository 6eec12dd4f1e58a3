#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "upright/mass_properties.hpp"
#include "upright/mesh.hpp"
#include "upright/platform.hpp"

namespace upright {

using Quat = Eigen::Quaterniond;

/// Material and integrator parameters. Defaults are the reference setup:
/// dt 1 ms, penalty stiffness 1e3 N/m, damping 2 N s/m, friction 0.5,
/// friction stiffness 1e3 N s/m, density 1e3 kg/m^3, 2 s horizon.
struct SimParams {
  double dt = 1e-3;
  double end_time = 2.0;
  double contact_stiffness = 1e3;
  double contact_damping = 2.0;
  double friction_coeff = 0.5;
  double friction_stiffness = 1e3;
  double density = 1e3;
  double gravity = 9.81;

  void validate() const;
  std::size_t step_count() const;
};

/// How contact points are drawn from the mesh and how the body is dropped.
struct ContactOptions {
  double candidate_band = 0.1;     // fraction of bbox height above min z, mesh as given
  std::size_t max_points = 2048;   // farthest-point subsampled beyond this
  bool all_vertices = false;
  double drop_gap = 1e-4;          // m between lowest vertex and platform at t = 0
};

/// Rigid-body state: world-from-body rotation and position of the center of
/// mass, with linear and angular momentum in world coordinates.
struct RigidState {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 linear_momentum = Vec3::Zero();
  Vec3 angular_momentum = Vec3::Zero();

  bool operator==(const RigidState& o) const;
};

/// Everything the integrator needs about the body; contact points are
/// body-frame offsets from the center of mass.
struct RigidBody {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
  Mat3 inertia_inv = Mat3::Identity();
  std::vector<Vec3> contact_points;

  static RigidBody from(const MassProperties& props, std::vector<Vec3> contact_points);
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::size_t step, const std::string& what);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct Trajectory {
  double dt = 0.0;
  std::size_t stride = 1;
  std::vector<std::size_t> steps;  // step index of each recorded state
  std::vector<RigidState> states;

  double time(std::size_t i) const { return static_cast<double>(steps[i]) * dt; }
  double end_time() const { return steps.empty() ? 0.0 : time(steps.size() - 1); }
};

/// Unit-quaternion rotation matrix (evaluated by the homogeneous formula so
/// it can be differentiated coefficient-wise).
Mat3 rotation_matrix(const Quat& q);

/// Contact regime of one point in one step.
enum class ContactMode : std::uint8_t {
  Separated = 0,
  Stick = 1,           // viscous friction below the Coulomb bound
  Slip = 2,            // friction clamped to the cone
  StickDamped = 3,     // as Stick, normal damping active (approaching)
  SlipDamped = 4,
};

struct ContactForce {
  Vec3 force = Vec3::Zero();
  ContactMode mode = ContactMode::Separated;
};

/// Penalty contact at one world point moving with velocity `v`.
ContactForce contact_force_detail(const Vec3& x, const Vec3& v, const Platform& platform, const SimParams& params);
Vec3 contact_force(const Vec3& x, const Vec3& v, const Platform& platform, const SimParams& params);

/// One semi-implicit Euler step. If `signature` is given, it receives a hash
/// of the per-point contact modes of this step.
RigidState step(const RigidState& state, const RigidBody& body, const Platform& platform, const SimParams& params,
                std::uint64_t* signature = nullptr);

/// Integrates step_count() steps from `initial`, recording every `stride`-th
/// state plus the final one. Throws SimulationError on non-finite state.
Trajectory simulate(const RigidBody& body, const RigidState& initial, const SimParams& params,
                    const Platform& platform, std::size_t stride = 1);

/// A mesh placed on a platform and turned into a rigid body.
struct Scene {
  MassProperties props;
  RigidBody body;
  RigidState initial;
  std::vector<std::uint32_t> contact_vertices;  // mesh vertex of each contact point
  std::uint32_t lowest_vertex = 0;              // vertex touching first
  SupportFrame frame;
  Mat3 initial_rotation = Mat3::Identity();     // alignment * tilt
  Vec3 clearance_gradient = Vec3::Zero();       // of the lowest vertex, world frame
  std::uint64_t selection_signature = 0;
};

/// Places `mesh` (any pose) upright on `platform`: the center of mass over the
/// support frame foot, the mesh rotated by `tilt` then aligned with the surface
/// normal, dropped to `drop_gap` above the surface, at rest.
Scene make_scene(const TriMesh& mesh, const SimParams& params, const Platform& platform,
                 const ContactOptions& options = {}, const Mat3& tilt = Mat3::Identity());

/// World positions of all mesh vertices for a state of `scene`.
std::vector<Vec3> world_vertices(const TriMesh& mesh, const Scene& scene, const RigidState& state);

/// Convenience: make_scene then simulate.
Trajectory simulate_mesh(const TriMesh& mesh, const SimParams& params, const Platform& platform,
                         const ContactOptions& options = {}, std::size_t stride = 1);

}  // namespace upright
