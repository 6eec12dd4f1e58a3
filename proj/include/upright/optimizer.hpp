#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "upright/diff_sim.hpp"
#include "upright/losses.hpp"

namespace upright {

struct OptimizerConfig {
  std::size_t max_iterations = 5000;
  /// Step size as a fraction of the input's bounding-box diagonal.
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t stand_stride = 10;
  /// The standability gradient is rescaled so its norm never exceeds this
  /// multiple of the norm of the other terms' gradient.
  double stand_gradient_ratio = 1.0;
  /// Simulated time for the standability term, seconds; 0 uses
  /// params.end_time. Adjoints of long toppling runs carry little direction.
  double stand_horizon = 0.3;
  LossWeights weights;
  SimParams params;
  ContactOptions contact;
  TiltProbe probe;
  /// Fraction of the bounding-box height below which vertices count as bottom.
  double bottom_fraction = 0.02;
  double early_stop_trd = 0.05;
  /// The check also needs the final maximum height within this fraction of
  /// the initial one, as in the platform verdict; 0 disables it.
  double early_stop_height_tolerance = 0.03;
  std::size_t check_stride = 250;
  double quad_dt = 0.02;
  /// Mean displacement cap as a fraction of the input's diagonal.
  double distortion_cap = 0.15;
  int max_halvings = 5;

  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  LossComponents components;
  ActiveTerms active;
  double total = 0.0;
  double gradient_norm = 0.0;
  double learning_rate = 0.0;  // absolute, meters per step
  double seconds = 0.0;        // wall clock since start
  bool skipped = false;        // non-finite gradient, no update applied
};

struct CheckRecord {
  std::size_t iteration = 0;
  double trd = 0.0;
  double stable_loss = 0.0;
  double height_change = 0.0;  // relative change of the maximum height
  bool passed = false;
};

enum class StopReason { Certified, MaxIterations, NonFiniteGradient, SimulationFailure };

std::string to_string(StopReason r);

struct RunHistory {
  std::vector<IterationRecord> records;
  std::vector<CheckRecord> checks;
  StopReason stop = StopReason::MaxIterations;
  std::string diagnostic;
  bool certified = false;
  double final_trd = 0.0;
  double final_stable_loss = 0.0;
  double mean_displacement = 0.0;  // relative to the input diagonal
  bool distorted = false;
  double seconds = 0.0;
};

struct OptimizeResult {
  TriMesh mesh;
  RunHistory history;
};

/// Called after every executed iteration; may be empty.
using IterationCallback = std::function<void(const IterationRecord&)>;

/// Adam over vertex positions. Every iteration re-grounds and recenters the
/// mesh, then evaluates the scheduled losses and their gradients. Every
/// `check_stride` iterations, starting at 0, a forward simulation on
/// `platform` checks TRD < early_stop_trd and the height tolerance together
/// with a zero stable-equilibrium loss (waived when its weight is 0); passing
/// stops the run before the update. The
/// returned mesh is expressed in the input's frame and keeps its faces.
OptimizeResult optimize(const TriMesh& input, const OptimizerConfig& config, const Platform& platform = {},
                        const IterationCallback& on_iteration = {});

/// Loss value and gradient of one iteration's objective on a canonical mesh.
struct ObjectiveEvaluation {
  LossComponents components;
  WeightedLoss weighted;
  std::vector<Vec3> gradient;
};

/// Context reused across iterations; built once from the reference mesh.
struct ObjectiveContext {
  TriMesh reference;  // canonical input
  TrianglePairSet pairs;
  std::vector<std::vector<std::uint32_t>> neighbors;
  double diagonal = 1.0;
};

ObjectiveContext make_objective_context(const TriMesh& canonical_reference);

ObjectiveEvaluation evaluate_objective(const TriMesh& mesh, const ObjectiveContext& ctx,
                                       const OptimizerConfig& config, const Platform& platform,
                                       std::size_t iteration);

}  // namespace upright
