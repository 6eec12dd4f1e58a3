#include "upright/diff_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace upright {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

struct ContactAdjoint {
  Vec3 x_bar = Vec3::Zero();
  Vec3 u_bar = Vec3::Zero();
};

// Reverse mode of contact_force_detail. Mirrors its branch structure exactly.
ContactAdjoint contact_force_adjoint(const Vec3& x, const Vec3& u, const Platform& platform, const SimParams& params,
                                     const Vec3& f_bar) {
  ContactAdjoint out;
  SdfSample s = platform_sdf(platform, x);
  if (s.distance >= 0.0) return out;

  const Vec3& n = s.normal;
  const double vn = u.dot(n);
  const bool damped = vn < 0.0;
  const double fn_raw = params.contact_stiffness * (-s.distance) - params.contact_damping * std::min(vn, 0.0);
  const bool pressing = fn_raw >= 0.0;
  const double fn = std::max(fn_raw, 0.0);
  const Vec3 vt = u - vn * n;
  const double bound = params.friction_coeff * fn;
  const double ft_raw_norm = (params.friction_stiffness * vt).norm();
  const bool slip = ft_raw_norm > bound;
  const double vt_norm = vt.norm();

  Vec3 ft;
  if (slip) ft = vt_norm > 0.0 ? Vec3(-bound * vt / vt_norm) : Vec3::Zero();
  else ft = -params.friction_stiffness * vt;

  double fn_bar = f_bar.dot(n);
  Vec3 n_bar = fn * f_bar;
  const Vec3& ft_bar = f_bar;
  Vec3 vt_bar = Vec3::Zero();
  if (slip) {
    if (vt_norm > 0.0) {
      const Vec3 dir = vt / vt_norm;
      const double bound_bar = -dir.dot(ft_bar);
      vt_bar = -bound * (ft_bar - dir * dir.dot(ft_bar)) / vt_norm;
      fn_bar += params.friction_coeff * bound_bar;
    }
  } else {
    vt_bar = -params.friction_stiffness * ft_bar;
  }

  // vt = u - vn n
  out.u_bar += vt_bar;
  double vn_bar = -n.dot(vt_bar);
  n_bar -= vn * vt_bar;

  double d_bar = 0.0;
  if (pressing) {
    d_bar = -params.contact_stiffness * fn_bar;
    if (damped) vn_bar -= params.contact_damping * fn_bar;
  }

  // vn = u . n
  out.u_bar += vn_bar * n;
  n_bar += vn_bar * u;

  out.x_bar = d_bar * n + platform_normal_jacobian(platform, x).transpose() * n_bar;
  return out;
}

std::size_t checked_step(std::size_t s, std::size_t n) {
  if (s > n) {
    throw std::out_of_range("functional references step " + std::to_string(s) + " but only " + std::to_string(n) +
                            " steps are simulated");
  }
  return s;
}

}  // namespace

StateAdjoint& StateAdjoint::operator+=(const StateAdjoint& o) {
  translation += o.translation;
  rotation += o.rotation;
  linear_momentum += o.linear_momentum;
  angular_momentum += o.angular_momentum;
  return *this;
}

bool StateAdjoint::finite() const {
  return translation.allFinite() && rotation.allFinite() && linear_momentum.allFinite() &&
         angular_momentum.allFinite();
}

Eigen::Vector4d rotation_matrix_adjoint(const Quat& q, const Mat3& rb) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Vector4d g;
  g[0] = 2.0 * (-z * rb(0, 1) + y * rb(0, 2) + z * rb(1, 0) - x * rb(1, 2) - y * rb(2, 0) + x * rb(2, 1));
  g[1] = 2.0 * (y * rb(0, 1) + z * rb(0, 2) + y * rb(1, 0) - 2.0 * x * rb(1, 1) - w * rb(1, 2) + z * rb(2, 0) +
                w * rb(2, 1) - 2.0 * x * rb(2, 2));
  g[2] = 2.0 * (-2.0 * y * rb(0, 0) + x * rb(0, 1) + w * rb(0, 2) + x * rb(1, 0) + z * rb(1, 2) - w * rb(2, 0) +
                z * rb(2, 1) - 2.0 * y * rb(2, 2));
  g[3] = 2.0 * (-2.0 * z * rb(0, 0) - w * rb(0, 1) + x * rb(0, 2) + w * rb(1, 0) - 2.0 * z * rb(1, 1) +
                y * rb(1, 2) + x * rb(2, 0) + y * rb(2, 1));
  return g;
}

StateAdjoint step_adjoint(const RigidState& state, const RigidBody& body, const Platform& platform,
                          const SimParams& params, const StateAdjoint& next_bar, BodyAdjoint& body_bar) {
  const double m = body.mass;
  const double dt = params.dt;
  const Quat& q = state.rotation;
  const Mat3 rot = rotation_matrix(q);
  const Mat3 iwi = rot * body.inertia_inv * rot.transpose();
  const Vec3 v = state.linear_momentum / m;
  const Vec3 w = iwi * state.angular_momentum;

  const std::size_t nc = body.contact_points.size();
  std::vector<Vec3> arm(nc), x(nc), u(nc), f(nc);
  std::vector<char> active(nc, 0);
  Vec3 force(0.0, 0.0, -m * params.gravity);
  Vec3 torque = Vec3::Zero();
  for (std::size_t k = 0; k < nc; ++k) {
    arm[k] = rot * body.contact_points[k];
    x[k] = arm[k] + state.translation;
    u[k] = v + w.cross(arm[k]);
    ContactForce cf = contact_force_detail(x[k], u[k], platform, params);
    if (cf.mode == ContactMode::Separated) continue;
    active[k] = 1;
    f[k] = cf.force;
    force += cf.force;
    torque += arm[k].cross(cf.force);
  }
  const Vec3 p1 = state.linear_momentum + dt * force;
  const Vec3 l1 = state.angular_momentum + dt * torque;
  const Vec3 w1 = iwi * l1;
  const double h = 0.5 * dt;
  const Vec3 qv = q.vec();
  const double pw = -w1.dot(qv);
  const Vec3 pv = q.w() * w1 + w1.cross(qv);
  const Eigen::Vector4d qt(q.w() + h * pw, q.x() + h * pv.x(), q.y() + h * pv.y(), q.z() + h * pv.z());
  const double len = qt.norm();
  const Eigen::Vector4d q1 = qt / len;

  StateAdjoint bar;

  // Renormalization.
  const Eigen::Vector4d qt_bar = (next_bar.rotation - q1 * q1.dot(next_bar.rotation)) / len;
  bar.rotation = qt_bar;
  const double pw_bar = h * qt_bar[0];
  const Vec3 pv_bar = h * qt_bar.tail<3>();
  Vec3 w1_bar = -qv * pw_bar + q.w() * pv_bar + qv.cross(pv_bar);
  Vec3 qv_bar = -w1 * pw_bar + pv_bar.cross(w1);
  bar.rotation[0] += w1.dot(pv_bar);
  bar.rotation.tail<3>() += qv_bar;

  // Position update.
  bar.translation = next_bar.translation;
  const Vec3 v1_bar = dt * next_bar.translation;

  Mat3 iwi_bar = w1_bar * l1.transpose();
  const Vec3 l1_bar = next_bar.angular_momentum + iwi.transpose() * w1_bar;
  const Vec3 p1_bar = next_bar.linear_momentum + v1_bar / m;
  body_bar.mass -= v1_bar.dot(p1) / (m * m);

  bar.linear_momentum = p1_bar;
  bar.angular_momentum = l1_bar;
  const Vec3 force_bar = dt * p1_bar;
  const Vec3 torque_bar = dt * l1_bar;
  body_bar.mass -= params.gravity * force_bar.z();

  Vec3 v_bar = Vec3::Zero();
  Vec3 w_bar = Vec3::Zero();
  Mat3 rot_bar = Mat3::Zero();
  for (std::size_t k = 0; k < nc; ++k) {
    if (!active[k]) continue;
    const Vec3 f_bar = force_bar + torque_bar.cross(arm[k]);
    Vec3 arm_bar = f[k].cross(torque_bar);
    ContactAdjoint ca = contact_force_adjoint(x[k], u[k], platform, params, f_bar);
    v_bar += ca.u_bar;
    w_bar += arm[k].cross(ca.u_bar);
    arm_bar += ca.u_bar.cross(w);
    arm_bar += ca.x_bar;
    bar.translation += ca.x_bar;
    rot_bar.noalias() += arm_bar * body.contact_points[k].transpose();
    body_bar.contact_points[k] += rot.transpose() * arm_bar;
  }

  bar.angular_momentum += iwi.transpose() * w_bar;
  iwi_bar.noalias() += w_bar * state.angular_momentum.transpose();
  bar.linear_momentum += v_bar / m;
  body_bar.mass -= v_bar.dot(state.linear_momentum) / (m * m);

  rot_bar.noalias() += iwi_bar * rot * body.inertia_inv.transpose() + iwi_bar.transpose() * rot * body.inertia_inv;
  body_bar.inertia_inv.noalias() += rot.transpose() * iwi_bar * rot;

  bar.rotation += rotation_matrix_adjoint(q, rot_bar);
  return bar;
}

TrajectoryFunctional rotation_deviation_functional(std::size_t final_step, const Mat3& reference) {
  TrajectoryFunctional fn;
  fn.steps = {final_step};
  fn.evaluate = [reference](std::span<const RigidState> s, std::span<StateAdjoint> bar) {
    const Mat3 diff = rotation_matrix(s[0].rotation) - reference;
    bar[0].rotation = rotation_matrix_adjoint(s[0].rotation, 2.0 * diff);
    return diff.squaredNorm();
  };
  return fn;
}

TrajectoryFunctional height_functional(std::size_t at_step) {
  TrajectoryFunctional fn;
  fn.steps = {at_step};
  fn.evaluate = [](std::span<const RigidState> s, std::span<StateAdjoint> bar) {
    bar[0].translation = Vec3::UnitZ();
    return s[0].translation.z();
  };
  return fn;
}

TrajectoryFunctional constant_functional(double value) {
  TrajectoryFunctional fn;
  fn.evaluate = [value](std::span<const RigidState>, std::span<StateAdjoint>) { return value; };
  return fn;
}

TrajectoryFunctional linear_combination(double a, const TrajectoryFunctional& f, double b,
                                        const TrajectoryFunctional& g) {
  TrajectoryFunctional fn;
  fn.steps = f.steps;
  fn.steps.insert(fn.steps.end(), g.steps.begin(), g.steps.end());
  const std::size_t nf = f.steps.size();
  fn.evaluate = [a, b, f, g, nf](std::span<const RigidState> s, std::span<StateAdjoint> bar) {
    std::vector<StateAdjoint> fb(nf), gb(s.size() - nf);
    double value = a * f.evaluate(s.first(nf), fb) + b * g.evaluate(s.subspan(nf), gb);
    for (std::size_t i = 0; i < nf; ++i) {
      bar[i].translation = a * fb[i].translation;
      bar[i].rotation = a * fb[i].rotation;
      bar[i].linear_momentum = a * fb[i].linear_momentum;
      bar[i].angular_momentum = a * fb[i].angular_momentum;
    }
    for (std::size_t i = 0; i < gb.size(); ++i) {
      bar[nf + i].translation = b * gb[i].translation;
      bar[nf + i].rotation = b * gb[i].rotation;
      bar[nf + i].linear_momentum = b * gb[i].linear_momentum;
      bar[nf + i].angular_momentum = b * gb[i].angular_momentum;
    }
    return value;
  };
  return fn;
}

std::size_t Tape::bytes() const {
  return states.size() * sizeof(RigidState) + contact_signatures.size() * sizeof(std::uint64_t);
}

std::size_t full_tape_bytes(std::size_t steps) { return (steps + 1) * sizeof(RigidState); }

Tape record_tape(const TriMesh& mesh, const SimRequest& request) {
  request.params.validate();
  Tape tape;
  tape.scene = make_scene(mesh, request.params, request.platform, request.contact, request.tilt);
  const std::size_t n = request.params.step_count();
  tape.states.reserve(n + 1);
  tape.contact_signatures.reserve(n);
  tape.states.push_back(tape.scene.initial);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t sig = 0;
    RigidState next = step(tape.states.back(), tape.scene.body, request.platform, request.params, &sig);
    if (!next.translation.allFinite() || !next.rotation.coeffs().allFinite() ||
        !next.linear_momentum.allFinite() || !next.angular_momentum.allFinite()) {
      throw SimulationError(i, "non-finite state (simulation blew up)");
    }
    tape.states.push_back(next);
    tape.contact_signatures.push_back(sig);
  }
  return tape;
}

namespace {

std::uint64_t branch_signature(const Scene& scene, const std::vector<std::uint64_t>& sigs) {
  std::uint64_t h = scene.selection_signature;
  for (auto s : sigs) h = mix(h, s);
  return h;
}

// Evaluates the functional on states fetched by `state_at` and returns the
// value plus per-step seeds.
template <class StateAt>
double seed_functional(const TrajectoryFunctional& functional, std::size_t n, StateAt&& state_at,
                       std::map<std::size_t, StateAdjoint>& seeds) {
  std::vector<RigidState> picked;
  picked.reserve(functional.steps.size());
  for (auto s : functional.steps) picked.push_back(state_at(checked_step(s, n)));
  std::vector<StateAdjoint> bars(picked.size());
  double value = functional.evaluate(picked, bars);
  for (std::size_t i = 0; i < picked.size(); ++i) seeds[functional.steps[i]] += bars[i];
  return value;
}

BodyAdjoint zero_body_adjoint(const RigidBody& body) {
  BodyAdjoint b;
  b.contact_points.assign(body.contact_points.size(), Vec3::Zero());
  return b;
}

void accumulate_seed(std::map<std::size_t, StateAdjoint>& seeds, std::size_t step, StateAdjoint& bar) {
  if (auto it = seeds.find(step); it != seeds.end()) bar += it->second;
}

}  // namespace

SimGradient evaluate_through_sim(const TriMesh& mesh, const SimRequest& request,
                                 const TrajectoryFunctional& functional) {
  Tape tape = record_tape(mesh, request);
  SimGradient out;
  out.steps = tape.step_count();
  std::map<std::size_t, StateAdjoint> seeds;
  out.value = seed_functional(functional, out.steps, [&](std::size_t s) { return tape.states[s]; }, seeds);
  out.branch_signature = branch_signature(tape.scene, tape.contact_signatures);
  out.peak_states_stored = tape.states.size();
  return out;
}

SimGradient grad_through_sim(const TriMesh& mesh, const SimRequest& request,
                             const TrajectoryFunctional& functional) {
  Tape tape = record_tape(mesh, request);
  const std::size_t n = tape.step_count();
  SimGradient out;
  out.steps = n;
  out.peak_states_stored = tape.states.size();
  std::map<std::size_t, StateAdjoint> seeds;
  out.value = seed_functional(functional, n, [&](std::size_t s) { return tape.states[s]; }, seeds);
  out.branch_signature = branch_signature(tape.scene, tape.contact_signatures);

  BodyAdjoint body_bar = zero_body_adjoint(tape.scene.body);
  StateAdjoint bar;
  accumulate_seed(seeds, n, bar);
  for (std::size_t i = n; i-- > 0;) {
    bar = step_adjoint(tape.states[i], tape.scene.body, request.platform, request.params, bar, body_bar);
    accumulate_seed(seeds, i, bar);
    if (!bar.finite()) throw SimulationError(i, "non-finite adjoint");
  }
  out.vertex_gradient = scene_adjoint_to_vertices(mesh, tape.scene, request.params, body_bar, bar);
  return out;
}

SimGradient checkpointed_grad(const TriMesh& mesh, const SimRequest& request,
                              const TrajectoryFunctional& functional, std::size_t memory_budget) {
  request.params.validate();
  const std::size_t n = request.params.step_count();
  const std::size_t state_bytes = sizeof(RigidState);
  if (memory_budget >= full_tape_bytes(n)) {
    return grad_through_sim(mesh, request, functional);
  }

  // Segment length minimizing checkpoints + one recomputed segment.
  std::size_t best_len = 0;
  std::size_t best_states = std::numeric_limits<std::size_t>::max();
  for (std::size_t len = 1; len <= n; ++len) {
    std::size_t states = (n + len - 1) / len + len;
    if (states < best_states) {
      best_states = states;
      best_len = len;
    }
  }
  if (best_states * state_bytes > memory_budget) {
    throw std::invalid_argument("memory budget of " + std::to_string(memory_budget) +
                                " bytes cannot hold one checkpoint segment (needs " +
                                std::to_string(best_states * state_bytes) + ")");
  }
  // Prefer the longest segment that still fits.
  std::size_t seg = best_len;
  for (std::size_t len = n; len >= 1; --len) {
    if (((n + len - 1) / len + len) * state_bytes <= memory_budget) {
      seg = len;
      break;
    }
  }

  SimGradient out;
  out.steps = n;
  Scene scene = make_scene(mesh, request.params, request.platform, request.contact, request.tilt);

  // Forward: keep checkpoints and whatever the functional reads.
  std::vector<RigidState> checkpoints;
  checkpoints.reserve(n / seg + 1);
  std::vector<std::uint64_t> sigs;
  sigs.reserve(n);
  std::map<std::size_t, RigidState> wanted;
  for (auto s : functional.steps) wanted[checked_step(s, n)] = RigidState{};
  RigidState s = scene.initial;
  for (std::size_t i = 0; i <= n; ++i) {
    if (i % seg == 0 && i < n) checkpoints.push_back(s);
    if (auto it = wanted.find(i); it != wanted.end()) it->second = s;
    if (i == n) break;
    std::uint64_t sig = 0;
    s = step(s, scene.body, request.platform, request.params, &sig);
    if (!s.translation.allFinite() || !s.rotation.coeffs().allFinite() || !s.linear_momentum.allFinite() ||
        !s.angular_momentum.allFinite()) {
      throw SimulationError(i, "non-finite state (simulation blew up)");
    }
    sigs.push_back(sig);
  }
  std::map<std::size_t, StateAdjoint> seeds;
  out.value = seed_functional(functional, n, [&](std::size_t k) { return wanted.at(k); }, seeds);
  out.branch_signature = branch_signature(scene, sigs);

  BodyAdjoint body_bar = zero_body_adjoint(scene.body);
  StateAdjoint bar;
  accumulate_seed(seeds, n, bar);
  std::vector<RigidState> buffer;
  buffer.reserve(seg);
  out.peak_states_stored = checkpoints.size() + seg;
  for (std::size_t c = checkpoints.size(); c-- > 0;) {
    const std::size_t begin = c * seg;
    const std::size_t end = std::min(n, begin + seg);
    buffer.clear();
    buffer.push_back(checkpoints[c]);
    for (std::size_t i = begin + 1; i < end; ++i) {
      buffer.push_back(step(buffer.back(), scene.body, request.platform, request.params));
    }
    for (std::size_t i = end; i-- > begin;) {
      bar = step_adjoint(buffer[i - begin], scene.body, request.platform, request.params, bar, body_bar);
      accumulate_seed(seeds, i, bar);
      if (!bar.finite()) throw SimulationError(i, "non-finite adjoint");
    }
  }
  out.vertex_gradient = scene_adjoint_to_vertices(mesh, scene, request.params, body_bar, bar);
  return out;
}

std::vector<Vec3> scene_adjoint_to_vertices(const TriMesh& mesh, const Scene& scene, const SimParams& params,
                                            const BodyAdjoint& body_bar, const StateAdjoint& initial_bar) {
  const Mat3& binv = scene.body.inertia_inv;
  MassPropertiesAdjoint seed;
  seed.mass = body_bar.mass;
  seed.inertia = -binv.transpose() * body_bar.inertia_inv * binv.transpose();

  std::vector<Vec3> grad(mesh.vertices.size(), Vec3::Zero());

  // T0 = foot + (gap - clearance(foot + R0 (X_m - c))) up
  const double shift_bar = scene.frame.up.dot(initial_bar.translation);
  const Vec3 dclear = scene.initial_rotation.transpose() * scene.clearance_gradient;
  grad[scene.lowest_vertex] -= shift_bar * dclear;
  seed.com += shift_bar * dclear;

  // r_k = X_k - c
  for (std::size_t k = 0; k < scene.contact_vertices.size(); ++k) {
    grad[scene.contact_vertices[k]] += body_bar.contact_points[k];
    seed.com -= body_bar.contact_points[k];
  }

  std::vector<Vec3> mp = mass_properties_gradient(mesh, params.density, seed);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += mp[i];
  return grad;
}

}  // namespace upright
