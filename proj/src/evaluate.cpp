#include "upright/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Geometry>

#include "upright/parallel.hpp"

namespace upright {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in the open interval (0, 1) from the top 53 bits.
double unit_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t quad_stride(const SimParams& params, double quad_dt) {
  const double ratio = quad_dt / params.dt;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio) {
    throw std::invalid_argument("TRD quadrature step must be a multiple of dt");
  }
  return m;
}

double max_height(const std::vector<Vec3>& pts, const Vec3& origin, const Vec3& up) {
  double h = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts) h = std::max(h, up.dot(p - origin));
  return h;
}

}  // namespace

double trd(const Trajectory& traj, double horizon, double quad_dt) {
  if (!(horizon > 0.0) || !(quad_dt > 0.0)) throw std::invalid_argument("TRD horizon and step must be positive");
  if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
  const auto samples = static_cast<std::size_t>(std::llround(horizon / quad_dt));
  const double ratio = quad_dt / traj.dt;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio) {
    throw std::invalid_argument("TRD quadrature step must be a multiple of the simulation step");
  }
  if (traj.end_time() < horizon - 0.5 * traj.dt) {
    throw std::invalid_argument("trajectory ends at " + std::to_string(traj.end_time()) + " s, before the TRD horizon");
  }
  const Vec3 z0 = rotation_matrix(traj.states.front().rotation).col(2);
  double sum = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const std::size_t step = k * m;
    auto it = std::lower_bound(traj.steps.begin(), traj.steps.end(), step);
    if (it == traj.steps.end() || *it != step) {
      throw std::invalid_argument("trajectory has no state at step " + std::to_string(step));
    }
    const auto& q = traj.states[static_cast<std::size_t>(it - traj.steps.begin())].rotation;
    sum += (rotation_matrix(q).col(2) - z0).norm();
  }
  return sum * quad_dt / horizon;
}

std::vector<double> default_sweep_angles() {
  std::vector<double> a{0.0};
  const double lo = std::log(0.005), hi = std::log(0.08);
  for (int i = 0; i < 12; ++i) a.push_back(std::exp(lo + (hi - lo) * i / 11.0));
  a.back() = 0.08;
  return a;
}

std::vector<double> table_angles() { return {0.0, 0.01, 0.02, 0.04, 0.08}; }

TrialDraw draw_trial(std::uint64_t seed, std::size_t trial, double phi_max) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(trial))));
  TrialDraw d;
  d.phi_x = phi_max * (2.0 * unit_open(rng) - 1.0);
  d.phi_y = phi_max * (2.0 * unit_open(rng) - 1.0);
  return d;
}

Mat3 perturbation_rotation(const TrialDraw& d) {
  return (Eigen::AngleAxisd(d.phi_y, Vec3::UnitY()) * Eigen::AngleAxisd(d.phi_x, Vec3::UnitX())).toRotationMatrix();
}

BatteryResult perturbation_battery(const TriMesh& mesh, double phi_max, const BatteryOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("battery needs at least one trial");
  if (!(phi_max >= 0.0)) throw std::invalid_argument("phi_max must be >= 0");
  options.params.validate();
  const Platform ground = Platform::ground();

  BatteryResult out;
  out.phi_max = phi_max;
  out.trials = options.trials;
  {
    // Settled reference, so contact compliance does not eat into the
    // tolerance; a mesh that falls untilted keeps its initial height.
    Scene upright = make_scene(mesh, options.params, ground, options.contact);
    Trajectory rest = simulate(upright.body, upright.initial, options.params, ground,
                               quad_stride(options.params, options.quad_dt));
    const bool stays = trd(rest, options.params.end_time, options.quad_dt) < options.trd_threshold;
    out.upright_height = max_height(world_vertices(mesh, upright, stays ? rest.states.back() : upright.initial),
                                    Vec3::Zero(), Vec3::UnitZ());
  }
  out.details.resize(options.trials);
  parallel_for(static_cast<std::size_t>(options.trials), [&](std::size_t t) {
    TrialResult& r = out.details[t];
    r.draw = draw_trial(options.seed, t, phi_max);
    try {
      Scene scene = make_scene(mesh, options.params, ground, options.contact, perturbation_rotation(r.draw));
      const std::size_t n = options.params.step_count();
      Trajectory traj = simulate(scene.body, scene.initial, options.params, ground, n);
      r.final_height = max_height(world_vertices(mesh, scene, traj.states.back()), Vec3::Zero(), Vec3::UnitZ());
      r.success = std::abs(r.final_height - out.upright_height) <= options.height_tolerance * out.upright_height;
    } catch (const std::exception& e) {
      r.error = e.what();
      r.success = false;
    }
  });
  for (const auto& r : out.details) out.successes += r.success ? 1 : 0;
  return out;
}

std::vector<BatteryResult> battery_sweep(const TriMesh& mesh, const std::vector<double>& angles,
                                         const BatteryOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("battery needs at least one trial");
  std::vector<BatteryResult> out;
  out.reserve(angles.size());
  for (double a : angles) out.push_back(perturbation_battery(mesh, a, options));
  return out;
}

PlatformVerdict platform_test(const TriMesh& mesh, const Platform& platform, const PlatformTestOptions& options) {
  PlatformVerdict v;
  v.platform = platform;
  try {
    Scene scene = make_scene(mesh, options.params, platform, options.contact);
    const std::size_t stride = quad_stride(options.params, options.quad_dt);
    Trajectory traj = simulate(scene.body, scene.initial, options.params, platform, stride);
    v.trd = trd(traj, options.params.end_time, options.quad_dt);
    const Vec3& foot = scene.frame.foot;
    const Vec3& up = scene.frame.up;
    v.initial_height = max_height(world_vertices(mesh, scene, scene.initial), foot, up);
    v.final_height = max_height(world_vertices(mesh, scene, traj.states.back()), foot, up);
    v.height_ok = std::abs(v.final_height - v.initial_height) <= options.height_tolerance * v.initial_height;
    const Vec3 travel = traj.states.back().translation - scene.initial.translation;
    v.slide_distance = (travel - up * up.dot(travel)).norm();
    v.stands = v.trd < options.trd_threshold && v.height_ok;
  } catch (const SimulationError& e) {
    v.error = e.what();
    v.trd = std::numeric_limits<double>::infinity();
    v.stands = false;
  }
  return v;
}

double ground_trd(const TriMesh& mesh, const SimParams& params, const ContactOptions& contact, double quad_dt) {
  Scene scene = make_scene(mesh, params, Platform::ground(), contact);
  Trajectory traj = simulate(scene.body, scene.initial, params, Platform::ground(), quad_stride(params, quad_dt));
  return trd(traj, params.end_time, quad_dt);
}

EvalReport evaluate_mesh(const TriMesh& mesh, const EvalProtocol& protocol) {
  EvalReport r;
  r.seed = protocol.seed;
  const MassProperties props = compute_mass_properties(mesh, protocol.params.density);
  r.stable_loss = stable_equilibrium_loss(mesh, props.com, protocol.probe);

  PlatformTestOptions po;
  po.params = protocol.params;
  po.contact = protocol.contact;
  po.trd_threshold = protocol.trd_threshold;
  po.height_tolerance = protocol.height_tolerance;
  po.quad_dt = protocol.quad_dt;
  PlatformVerdict ground = platform_test(mesh, Platform::ground(), po);
  r.trd = ground.trd;
  bool ground_listed = false;
  for (const auto& p : protocol.platforms) {
    if (p.kind == Platform::Kind::Ground) {
      ground_listed = true;
      r.platforms.push_back(ground);
    } else {
      r.platforms.push_back(platform_test(mesh, p, po));
    }
  }
  if (!ground_listed) r.platforms.insert(r.platforms.begin(), ground);

  if (protocol.run_battery) {
    BatteryOptions bo;
    bo.params = protocol.params;
    bo.contact = protocol.contact;
    bo.trials = protocol.trials;
    bo.seed = protocol.seed;
    bo.height_tolerance = protocol.height_tolerance;
    bo.trd_threshold = protocol.trd_threshold;
    bo.quad_dt = protocol.quad_dt;
    r.sweep = battery_sweep(mesh, protocol.angles, bo);
  }
  r.certified = ground.stands && r.stable_loss == 0.0;
  return r;
}

}  // namespace upright
