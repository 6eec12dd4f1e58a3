#include "upright/optimizer.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "upright/evaluate.hpp"

namespace upright {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TriMesh canonical(const TriMesh& mesh, double density, Vec3* applied = nullptr) {
  const MassProperties props = compute_mass_properties(mesh, density);
  auto [out, t] = ground_and_center(mesh, props.com);
  if (applied) *applied = t;
  return out;
}

CheckRecord run_check(const TriMesh& mesh, const OptimizerConfig& config, const Platform& platform,
                      std::size_t iteration) {
  PlatformTestOptions po;
  po.params = config.params;
  po.contact = config.contact;
  po.quad_dt = config.quad_dt;
  const PlatformVerdict v = platform_test(mesh, platform, po);
  if (!v.error.empty()) throw SimulationError(0, v.error);
  CheckRecord c;
  c.iteration = iteration;
  c.trd = v.trd;
  c.height_change = (v.final_height - v.initial_height) / v.initial_height;
  const MassProperties props = compute_mass_properties(mesh, config.params.density);
  c.stable_loss = stable_equilibrium_loss(mesh, props.com, config.probe);
  const bool height_ok = config.early_stop_height_tolerance <= 0.0 ||
                         std::abs(c.height_change) <= config.early_stop_height_tolerance;
  // with the stable term switched off only the simulation decides
  const bool stable_ok = config.weights.stable <= 0.0 || c.stable_loss == 0.0;
  c.passed = c.trd < config.early_stop_trd && height_ok && stable_ok;
  return c;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("moment decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (stand_stride < 1 || check_stride < 1) throw std::invalid_argument("strides must be >= 1");
  if (!(bottom_fraction >= 0.0)) throw std::invalid_argument("bottom fraction must be >= 0");
  if (!(early_stop_trd > 0.0)) throw std::invalid_argument("early-stop TRD threshold must be positive");
  if (!(early_stop_height_tolerance >= 0.0)) throw std::invalid_argument("early-stop height tolerance must be >= 0");
  if (!(distortion_cap > 0.0)) throw std::invalid_argument("distortion cap must be positive");
  if (!(stand_gradient_ratio > 0.0)) throw std::invalid_argument("stand gradient ratio must be positive");
  if (max_halvings < 0) throw std::invalid_argument("max halvings must be >= 0");
  if (!(stand_horizon >= 0.0) || !std::isfinite(stand_horizon)) throw std::invalid_argument("stand horizon must be >= 0");
  weights.validate();
  params.validate();
  probe.validate();
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Certified: return "certified";
    case StopReason::MaxIterations: return "max-iterations";
    case StopReason::NonFiniteGradient: return "non-finite-gradient";
    case StopReason::SimulationFailure: return "simulation-failure";
  }
  return "unknown";
}

ObjectiveContext make_objective_context(const TriMesh& canonical_reference) {
  ObjectiveContext ctx;
  ctx.reference = canonical_reference;
  ctx.pairs = triangle_pairs(canonical_reference);
  ctx.neighbors = vertex_neighbors(canonical_reference);
  ctx.diagonal = bounding_box(canonical_reference).diagonal();
  return ctx;
}

ObjectiveEvaluation evaluate_objective(const TriMesh& mesh, const ObjectiveContext& ctx,
                                       const OptimizerConfig& config, const Platform& platform,
                                       std::size_t iteration) {
  const LossWeights& w = config.weights;
  ObjectiveEvaluation ev;
  ev.gradient.assign(mesh.vertices.size(), Vec3::Zero());
  auto add = [&](const std::vector<Vec3>& g, double scale) {
    if (scale == 0.0) return;
    for (std::size_t i = 0; i < g.size(); ++i) ev.gradient[i] += scale * g[i];
  };

  LossGrad stable = stable_equilibrium_grad(mesh, config.params.density, config.probe);
  ev.components.stable = stable.value;
  add(stable.gradient, w.stable);

  LossGrad normal = normal_consistency_grad(mesh, ctx.pairs);
  ev.components.normal = normal.value;
  add(normal.gradient, w.normal);

  const Aabb box = bounding_box(mesh);
  const BottomVertexSet bottom = bottom_vertices(mesh, box.lo.z() + config.bottom_fraction * box.extent().z());
  LossGrad lap = bottom_laplacian_grad(mesh, bottom, ctx.neighbors);
  ev.components.bottom_laplacian = lap.value;
  add(lap.gradient, w.bottom_laplacian);

  // Compare against the reference shifted by the mean displacement so that
  // recentering does not register as shape change.
  Vec3 mean_shift = Vec3::Zero();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) mean_shift += mesh.vertices[i] - ctx.reference.vertices[i];
  mean_shift /= static_cast<double>(std::max<std::size_t>(mesh.vertices.size(), 1));
  LossGrad fid = fidelity_grad(mesh, translated(ctx.reference, mean_shift));
  const double inv_d2 = 1.0 / (ctx.diagonal * ctx.diagonal);
  ev.components.fidelity = fid.value * inv_d2;
  add(fid.gradient, w.fidelity * inv_d2);

  const ActiveTerms active = active_terms(iteration, config.stand_stride);
  if (active.stand) {
    SimRequest req;
    req.params = config.params;
    if (config.stand_horizon > 0.0) req.params.end_time = config.stand_horizon;
    req.platform = platform;
    req.contact = config.contact;
    const Mat3 r0 = support_frame(platform).alignment;
    SimGradient sg = grad_through_sim(mesh, req, rotation_deviation_functional(req.params.step_count(), r0));
    ev.components.stand = sg.value;
    // Adjoints of a toppling run can be astronomically large; cap the term's
    // norm relative to the rest of the objective.
    double rest = 0.0, own = 0.0;
    for (std::size_t i = 0; i < ev.gradient.size(); ++i) {
      rest += ev.gradient[i].squaredNorm();
      own += sg.vertex_gradient[i].squaredNorm();
    }
    rest = std::sqrt(rest);
    own = w.stand * std::sqrt(own);
    double scale = w.stand;
    if (std::isfinite(own) && own > config.stand_gradient_ratio * rest && own > 0.0) {
      scale *= config.stand_gradient_ratio * rest / own;
    }
    add(sg.vertex_gradient, scale);
  }

  ev.weighted = total_loss(ev.components, w, iteration, config.stand_stride);
  return ev;
}

OptimizeResult optimize(const TriMesh& input, const OptimizerConfig& config, const Platform& platform,
                        const IterationCallback& on_iteration) {
  config.validate();
  platform.validate();
  require_watertight(input);
  const auto t0 = Clock::now();

  OptimizeResult result;
  RunHistory& h = result.history;
  TriMesh mesh = canonical(input, config.params.density);
  const ObjectiveContext ctx = make_objective_context(mesh);
  const std::size_t nv = mesh.vertices.size();
  const double base_lr = config.learning_rate * ctx.diagonal;
  double lr = base_lr;

  std::vector<Vec3> m1(nv, Vec3::Zero()), m2(nv, Vec3::Zero());
  std::size_t adam_steps = 0;
  int halvings = 0;
  bool stopped = false;
  TriMesh last_good = mesh;

  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    if (it % config.check_stride == 0) {
      CheckRecord c;
      try {
        c = run_check(mesh, config, platform, it);
      } catch (const SimulationError& e) {
        c.iteration = it;
        c.trd = std::numeric_limits<double>::infinity();
      }
      h.checks.push_back(c);
      if (c.passed) {
        h.stop = StopReason::Certified;
        stopped = true;
        break;
      }
    }

    IterationRecord rec;
    rec.iteration = it;
    ObjectiveEvaluation ev;
    try {
      ev = evaluate_objective(mesh, ctx, config, platform, it);
    } catch (const SimulationError& e) {
      h.stop = StopReason::SimulationFailure;
      h.diagnostic = std::string("iteration ") + std::to_string(it) + ": " + e.what();
      mesh = last_good;
      stopped = true;
      break;
    }
    rec.components = ev.components;
    rec.active = ev.weighted.active;
    rec.total = ev.weighted.total;
    double g2 = 0.0;
    bool finite = std::isfinite(ev.weighted.total);
    for (const auto& g : ev.gradient) {
      g2 += g.squaredNorm();
      finite = finite && g.allFinite();
    }
    rec.gradient_norm = std::sqrt(g2);

    if (!finite) {
      rec.skipped = true;
      lr *= 0.5;
      rec.learning_rate = lr;
      rec.seconds = seconds_since(t0);
      h.records.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (++halvings > config.max_halvings) {
        h.stop = StopReason::NonFiniteGradient;
        h.diagnostic = "non-finite gradient at iteration " + std::to_string(it) + " after " +
                       std::to_string(config.max_halvings) + " learning-rate halvings";
        mesh = last_good;
        stopped = true;
        break;
      }
      continue;
    }
    halvings = 0;
    last_good = mesh;

    ++adam_steps;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_steps));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_steps));
    for (std::size_t i = 0; i < nv; ++i) {
      const Vec3& g = ev.gradient[i];
      m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
      m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
      const Vec3 mhat = m1[i] / c1;
      const Vec3 vhat = m2[i] / c2;
      mesh.vertices[i] -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + config.epsilon).matrix());
    }
    try {
      mesh = canonical(mesh, config.params.density);
    } catch (const MeshError& e) {
      h.stop = StopReason::NonFiniteGradient;
      h.diagnostic = std::string("iteration ") + std::to_string(it) + ": " + e.what();
      mesh = last_good;
      stopped = true;
      rec.seconds = seconds_since(t0);
      h.records.push_back(rec);
      if (on_iteration) on_iteration(rec);
      break;
    }
    rec.learning_rate = lr;
    rec.seconds = seconds_since(t0);
    h.records.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }

  if (config.max_iterations == 0) {
    result.mesh = input;
  } else {
    if (h.stop == StopReason::Certified) {
      h.certified = true;
      h.final_trd = h.checks.back().trd;
      h.final_stable_loss = h.checks.back().stable_loss;
    } else if (h.stop == StopReason::MaxIterations || stopped) {
      try {
        CheckRecord c = run_check(mesh, config, platform, h.records.size());
        h.final_trd = c.trd;
        h.final_stable_loss = c.stable_loss;
        h.certified = c.passed && h.stop == StopReason::MaxIterations;
      } catch (const SimulationError& e) {
        h.final_trd = std::numeric_limits<double>::infinity();
        if (h.diagnostic.empty()) h.diagnostic = e.what();
      }
    }
    Vec3 offset = Vec3::Zero();
    for (std::size_t i = 0; i < nv; ++i) offset += input.vertices[i] - mesh.vertices[i];
    result.mesh = translated(mesh, offset / static_cast<double>(std::max<std::size_t>(nv, 1)));
  }

  double disp = 0.0;
  for (std::size_t i = 0; i < nv; ++i) disp += (result.mesh.vertices[i] - input.vertices[i]).norm();
  h.mean_displacement = nv ? disp / static_cast<double>(nv) / ctx.diagonal : 0.0;
  h.distorted = h.mean_displacement > config.distortion_cap;
  h.seconds = seconds_since(t0);
  return result;
}

}  // namespace upright
