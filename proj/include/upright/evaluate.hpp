#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "upright/losses.hpp"
#include "upright/rigid_sim.hpp"

namespace upright {

/// Time-averaged deviation of the body's up axis from its initial direction,
/// (1/T) sum_k |R(k dt_q) z - R(0) z| dt_q over k = 0 .. T/dt_q - 1. The
/// trajectory must hold a state at every multiple of `quad_dt` below T.
double trd(const Trajectory& traj, double horizon = 2.0, double quad_dt = 0.02);

/// 0 followed by 12 log-spaced angles from 0.005 to 0.08 rad.
std::vector<double> default_sweep_angles();
/// 0, 0.01, 0.02, 0.04, 0.08 rad.
std::vector<double> table_angles();

/// Perturbation used by trial `trial` of a battery seeded with `seed`:
/// angles uniform in (-phi_max, phi_max), drawn from an mt19937_64 seeded with
/// splitmix64 of (seed, trial).
struct TrialDraw {
  double phi_x = 0.0;
  double phi_y = 0.0;
};
TrialDraw draw_trial(std::uint64_t seed, std::size_t trial, double phi_max);

/// Rotation about x by phi_x, then about y by phi_y.
Mat3 perturbation_rotation(const TrialDraw& d);

struct BatteryOptions {
  SimParams params;
  ContactOptions contact;
  int trials = 100;
  std::uint64_t seed = 0;
  double height_tolerance = 0.03;
  // The untilted drop counts as upright below this trd.
  double trd_threshold = 0.05;
  double quad_dt = 0.02;
};

struct TrialResult {
  TrialDraw draw;
  double final_height = 0.0;
  bool success = false;
  std::string error;  // set when the simulation failed
};

struct BatteryResult {
  double phi_max = 0.0;
  int trials = 0;
  int successes = 0;
  // Max height at the end of the untilted drop when that drop stays upright,
  // else the max height before the drop.
  double upright_height = 0.0;
  std::vector<TrialResult> details;

  double rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
};

/// Drops the mesh on the ground with a random tilt per trial and counts runs
/// whose maximum height at the end stays within the tolerance of the upright
/// maximum height. Throws std::invalid_argument if trials < 1.
BatteryResult perturbation_battery(const TriMesh& mesh, double phi_max, const BatteryOptions& options);

std::vector<BatteryResult> battery_sweep(const TriMesh& mesh, const std::vector<double>& angles,
                                         const BatteryOptions& options);

struct PlatformVerdict {
  Platform platform;
  double trd = 0.0;
  double initial_height = 0.0;  // max vertex height along the surface normal
  double final_height = 0.0;
  bool height_ok = false;
  double slide_distance = 0.0;  // tangential travel of the center of mass
  bool stands = false;
  std::string error;
};

struct PlatformTestOptions {
  SimParams params;
  ContactOptions contact;
  double trd_threshold = 0.05;
  double height_tolerance = 0.03;
  double quad_dt = 0.02;
};

/// Places the mesh upright on `platform`, simulates and returns the verdict
/// TRD < threshold and final height within tolerance.
PlatformVerdict platform_test(const TriMesh& mesh, const Platform& platform, const PlatformTestOptions& options);

/// Full certification protocol.
struct EvalProtocol {
  SimParams params;
  ContactOptions contact;
  TiltProbe probe;
  double trd_threshold = 0.05;
  double height_tolerance = 0.03;
  double quad_dt = 0.02;
  int trials = 100;
  std::uint64_t seed = 0;
  std::vector<double> angles = default_sweep_angles();
  std::vector<Platform> platforms = {Platform::ground(), Platform::incline(10.0 * std::numbers::pi / 180.0),
                                     Platform::sphere(Vec3(0.0, 0.0, -1.0), 1.0)};
  bool run_battery = true;
};

struct EvalReport {
  double trd = 0.0;
  double stable_loss = 0.0;
  std::vector<PlatformVerdict> platforms;
  std::vector<BatteryResult> sweep;
  std::uint64_t seed = 0;
  /// Ground verdict passes and no probe tilt lowers the center of mass.
  bool certified = false;
};

EvalReport evaluate_mesh(const TriMesh& mesh, const EvalProtocol& protocol);

/// Forward-only TRD on the ground with the given parameters.
double ground_trd(const TriMesh& mesh, const SimParams& params, const ContactOptions& contact = {},
                  double quad_dt = 0.02);

}  // namespace upright
