#include "upright/rigid_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace upright {

namespace {

bool finite(const RigidState& s) {
  return s.translation.allFinite() && s.rotation.coeffs().allFinite() && s.linear_momentum.allFinite() &&
         s.angular_momentum.allFinite();
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

void SimParams::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(end_time >= dt)) throw std::invalid_argument("end_time must be at least dt");
  if (!(contact_stiffness >= 0.0) || !(contact_damping >= 0.0) || !(friction_stiffness >= 0.0)) {
    throw std::invalid_argument("stiffness and damping must be non-negative");
  }
  if (!(friction_coeff >= 0.0)) throw std::invalid_argument("friction coefficient must be non-negative");
  if (!(density > 0.0)) throw std::invalid_argument("density must be positive");
  if (!std::isfinite(gravity)) throw std::invalid_argument("gravity must be finite");
}

std::size_t SimParams::step_count() const {
  return static_cast<std::size_t>(std::ceil(end_time / dt - 1e-9));
}

bool RigidState::operator==(const RigidState& o) const {
  return translation == o.translation && rotation.coeffs() == o.rotation.coeffs() &&
         linear_momentum == o.linear_momentum && angular_momentum == o.angular_momentum;
}

RigidBody RigidBody::from(const MassProperties& props, std::vector<Vec3> contact_points) {
  RigidBody b;
  b.mass = props.mass;
  b.inertia = props.inertia;
  b.inertia_inv = props.inertia.inverse();
  b.contact_points = std::move(contact_points);
  return b;
}

SimulationError::SimulationError(std::size_t step, const std::string& what)
    : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

Mat3 rotation_matrix(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

ContactForce contact_force_detail(const Vec3& x, const Vec3& v, const Platform& platform, const SimParams& params) {
  ContactForce out;
  SdfSample s = platform_sdf(platform, x);
  if (s.distance >= 0.0) return out;

  const Vec3& n = s.normal;
  const double vn = v.dot(n);
  const bool damped = vn < 0.0;
  double fn = params.contact_stiffness * (-s.distance) - params.contact_damping * std::min(vn, 0.0);
  fn = std::max(fn, 0.0);

  const Vec3 vt = v - vn * n;
  Vec3 ft = -params.friction_stiffness * vt;
  const double bound = params.friction_coeff * fn;
  const double ft_norm = ft.norm();
  bool slip = false;
  if (ft_norm > bound) {
    slip = true;
    const double vt_norm = vt.norm();
    ft = vt_norm > 0.0 ? Vec3(-bound * vt / vt_norm) : Vec3::Zero();
  }
  out.force = fn * n + ft;
  out.mode = slip ? (damped ? ContactMode::SlipDamped : ContactMode::Slip)
                  : (damped ? ContactMode::StickDamped : ContactMode::Stick);
  return out;
}

Vec3 contact_force(const Vec3& x, const Vec3& v, const Platform& platform, const SimParams& params) {
  return contact_force_detail(x, v, platform, params).force;
}

RigidState step(const RigidState& state, const RigidBody& body, const Platform& platform, const SimParams& params,
                std::uint64_t* signature) {
  const Mat3 rot = rotation_matrix(state.rotation);
  const Mat3 inertia_world_inv = rot * body.inertia_inv * rot.transpose();
  const Vec3 v = state.linear_momentum / body.mass;
  const Vec3 w = inertia_world_inv * state.angular_momentum;

  Vec3 force(0.0, 0.0, -body.mass * params.gravity);
  Vec3 torque = Vec3::Zero();
  std::uint64_t sig = 0;
  for (std::size_t k = 0; k < body.contact_points.size(); ++k) {
    const Vec3 arm = rot * body.contact_points[k];
    const Vec3 x = arm + state.translation;
    const Vec3 u = v + w.cross(arm);
    ContactForce cf = contact_force_detail(x, u, platform, params);
    if (cf.mode == ContactMode::Separated) continue;
    force += cf.force;
    torque += arm.cross(cf.force);
    if (signature) sig = mix(sig, (static_cast<std::uint64_t>(k) << 3) | static_cast<std::uint64_t>(cf.mode));
  }
  if (signature) *signature = sig;

  RigidState next;
  next.linear_momentum = state.linear_momentum + params.dt * force;
  next.angular_momentum = state.angular_momentum + params.dt * torque;
  const Vec3 v1 = next.linear_momentum / body.mass;
  const Vec3 w1 = inertia_world_inv * next.angular_momentum;
  next.translation = state.translation + params.dt * v1;

  // q += dt/2 (0, w1) (x) q, then renormalize.
  const Quat& q = state.rotation;
  const double h = 0.5 * params.dt;
  const Vec3 qv = q.vec();
  const double pw = -w1.dot(qv);
  const Vec3 pv = q.w() * w1 + w1.cross(qv);
  Quat qt(q.w() + h * pw, q.x() + h * pv.x(), q.y() + h * pv.y(), q.z() + h * pv.z());
  const double len = qt.coeffs().norm();
  next.rotation = Quat(qt.w() / len, qt.x() / len, qt.y() / len, qt.z() / len);
  return next;
}

Trajectory simulate(const RigidBody& body, const RigidState& initial, const SimParams& params,
                    const Platform& platform, std::size_t stride) {
  params.validate();
  if (stride == 0) throw std::invalid_argument("record stride must be >= 1");
  const std::size_t n = params.step_count();
  Trajectory traj;
  traj.dt = params.dt;
  traj.stride = stride;
  traj.steps.reserve(n / stride + 2);
  traj.states.reserve(n / stride + 2);
  traj.steps.push_back(0);
  traj.states.push_back(initial);
  RigidState s = initial;
  for (std::size_t i = 0; i < n; ++i) {
    s = step(s, body, platform, params);
    if (!finite(s)) throw SimulationError(i, "non-finite state (simulation blew up)");
    if ((i + 1) % stride == 0 || i + 1 == n) {
      traj.steps.push_back(i + 1);
      traj.states.push_back(s);
    }
  }
  return traj;
}

Scene make_scene(const TriMesh& mesh, const SimParams& params, const Platform& platform,
                 const ContactOptions& options, const Mat3& tilt) {
  platform.validate();
  Scene scene;
  scene.props = compute_mass_properties(mesh, params.density);
  scene.frame = support_frame(platform);
  scene.initial_rotation = scene.frame.alignment * tilt;
  const Vec3& c = scene.props.com;
  const Mat3& r0 = scene.initial_rotation;
  const Vec3& up = scene.frame.up;

  const std::size_t nv = mesh.vertices.size();
  std::vector<Vec3> offset(nv);
  std::vector<double> clear(nv, std::numeric_limits<double>::infinity());
  double lowest = std::numeric_limits<double>::infinity();
  double top = -std::numeric_limits<double>::infinity();
  double bottom = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nv; ++k) {
    offset[k] = r0 * (mesh.vertices[k] - c);
    top = std::max(top, mesh.vertices[k].z());
    bottom = std::min(bottom, mesh.vertices[k].z());
    Clearance cl = clearance_along(platform, scene.frame.foot + offset[k], up);
    if (!cl.hits) continue;
    clear[k] = cl.value;
    if (cl.value < lowest) {
      lowest = cl.value;
      scene.lowest_vertex = static_cast<std::uint32_t>(k);
      scene.clearance_gradient = cl.gradient;
    }
  }
  if (!std::isfinite(lowest)) throw std::invalid_argument("mesh does not lie over the platform");

  const double shift = options.drop_gap - lowest;
  scene.initial.translation = scene.frame.foot + shift * up;
  scene.initial.rotation = Quat(r0).normalized();

  // Candidates come from the upright rest pose, so a tilted start keeps the
  // whole base; the first vertex to touch is always one of them.
  const double band = options.candidate_band * (top - bottom);
  std::vector<std::uint32_t> candidates;
  for (std::size_t k = 0; k < nv; ++k) {
    if (options.all_vertices || mesh.vertices[k].z() - bottom < band || k == scene.lowest_vertex) {
      candidates.push_back(static_cast<std::uint32_t>(k));
    }
  }
  if (candidates.size() > options.max_points && options.max_points > 0) {
    // Farthest-point subsampling seeded at the lowest vertex.
    std::vector<double> dist(candidates.size(), std::numeric_limits<double>::infinity());
    std::vector<char> taken(candidates.size(), 0);
    std::vector<std::uint32_t> chosen;
    chosen.reserve(options.max_points);
    std::size_t pick = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == scene.lowest_vertex) pick = i;
    }
    while (chosen.size() < options.max_points) {
      taken[pick] = 1;
      chosen.push_back(candidates[pick]);
      const Vec3& p = offset[candidates[pick]];
      std::size_t best = 0;
      double best_d = -1.0;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) continue;
        dist[i] = std::min(dist[i], (offset[candidates[i]] - p).squaredNorm());
        if (dist[i] > best_d) {
          best_d = dist[i];
          best = i;
        }
      }
      if (best_d < 0.0) break;
      pick = best;
    }
    std::sort(chosen.begin(), chosen.end());
    candidates = std::move(chosen);
  }
  scene.contact_vertices = candidates;

  std::vector<Vec3> points;
  points.reserve(candidates.size());
  std::uint64_t sig = mix(0, scene.lowest_vertex);
  for (auto k : candidates) {
    points.push_back(mesh.vertices[k] - c);
    sig = mix(sig, k);
  }
  scene.selection_signature = sig;
  scene.body = RigidBody::from(scene.props, std::move(points));
  return scene;
}

std::vector<Vec3> world_vertices(const TriMesh& mesh, const Scene& scene, const RigidState& state) {
  const Mat3 rot = rotation_matrix(state.rotation);
  std::vector<Vec3> out(mesh.vertices.size());
  for (std::size_t k = 0; k < mesh.vertices.size(); ++k) {
    out[k] = rot * (mesh.vertices[k] - scene.props.com) + state.translation;
  }
  return out;
}

Trajectory simulate_mesh(const TriMesh& mesh, const SimParams& params, const Platform& platform,
                         const ContactOptions& options, std::size_t stride) {
  Scene scene = make_scene(mesh, params, platform, options);
  return simulate(scene.body, scene.initial, params, platform, stride);
}

}  // namespace upright
