#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "upright/rigid_sim.hpp"

namespace upright {

/// Cotangent of a RigidState; the rotation adjoint is over quaternion
/// coefficients (w, x, y, z).
struct StateAdjoint {
  Vec3 translation = Vec3::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
  Vec3 linear_momentum = Vec3::Zero();
  Vec3 angular_momentum = Vec3::Zero();

  StateAdjoint& operator+=(const StateAdjoint& o);
  bool finite() const;
};

/// Cotangent of the RigidBody parameters.
struct BodyAdjoint {
  double mass = 0.0;
  Mat3 inertia_inv = Mat3::Zero();
  std::vector<Vec3> contact_points;
};

/// Reverse-mode counterpart of step(): given the cotangent of the output
/// state, returns the cotangent of the input state and accumulates into
/// `body_bar`. Contact clamps use one-sided derivatives (zero on the inactive
/// side, the active branch's derivative at a kink).
StateAdjoint step_adjoint(const RigidState& state, const RigidBody& body, const Platform& platform,
                          const SimParams& params, const StateAdjoint& next_bar, BodyAdjoint& body_bar);

/// VJP of rotation_matrix().
Eigen::Vector4d rotation_matrix_adjoint(const Quat& q, const Mat3& r_bar);

/// A scalar functional of recorded states. `steps` lists the step indices it
/// reads; `evaluate` receives those states in the same order and writes the
/// cotangent of each.
struct TrajectoryFunctional {
  std::vector<std::size_t> steps;
  std::function<double(std::span<const RigidState>, std::span<StateAdjoint>)> evaluate;
};

/// Squared Frobenius deviation of the final rotation from `reference`.
TrajectoryFunctional rotation_deviation_functional(std::size_t final_step, const Mat3& reference);

/// Height of the center of mass at `at_step`.
TrajectoryFunctional height_functional(std::size_t at_step);

TrajectoryFunctional constant_functional(double value);

/// a * f + b * g.
TrajectoryFunctional linear_combination(double a, const TrajectoryFunctional& f, double b,
                                        const TrajectoryFunctional& g);

/// Recorded primal pass: every state, the per-step contact-mode signature,
/// and the scene the body came from.
struct Tape {
  Scene scene;
  std::vector<RigidState> states;
  std::vector<std::uint64_t> contact_signatures;

  std::size_t step_count() const { return contact_signatures.size(); }
  std::size_t bytes() const;
};

struct SimGradient {
  double value = 0.0;
  std::vector<Vec3> vertex_gradient;
  /// Hash of the contact selection plus every step's contact modes; equal
  /// hashes mean the discrete contact branch is the same.
  std::uint64_t branch_signature = 0;
  std::size_t steps = 0;
  std::size_t peak_states_stored = 0;
};

struct SimRequest {
  SimParams params;
  Platform platform;
  ContactOptions contact;
  Mat3 tilt = Mat3::Identity();
};

/// Runs the simulation forward and records the tape.
Tape record_tape(const TriMesh& mesh, const SimRequest& request);

/// Forward only: functional value and branch signature.
SimGradient evaluate_through_sim(const TriMesh& mesh, const SimRequest& request,
                                 const TrajectoryFunctional& functional);

/// Exact reverse-mode gradient of `functional` with respect to the mesh
/// vertices, through placement, mass properties and every integrator step.
SimGradient grad_through_sim(const TriMesh& mesh, const SimRequest& request,
                             const TrajectoryFunctional& functional);

/// Same contract as grad_through_sim, storing at most `memory_budget` bytes of
/// states by recomputing segments from checkpoints. Throws std::invalid_argument
/// if the budget cannot hold a checkpointing schedule.
SimGradient checkpointed_grad(const TriMesh& mesh, const SimRequest& request,
                              const TrajectoryFunctional& functional, std::size_t memory_budget);

/// Bytes needed to store the full tape of `steps` steps.
std::size_t full_tape_bytes(std::size_t steps);

/// Chains body and initial-state cotangents back to mesh vertices.
std::vector<Vec3> scene_adjoint_to_vertices(const TriMesh& mesh, const Scene& scene, const SimParams& params,
                                            const BodyAdjoint& body_bar, const StateAdjoint& initial_bar);

}  // namespace upright
