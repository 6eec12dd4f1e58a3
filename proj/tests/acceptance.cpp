// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "upright/cut_plane.hpp"
#include "upright/diff_sim.hpp"
#include "upright/evaluate.hpp"
#include "upright/fixtures.hpp"
#include "upright/losses.hpp"
#include "upright/mass_properties.hpp"
#include "upright/optimizer.hpp"
#include "upright/primitives.hpp"

using namespace upright;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int n, bool ok, const std::string& what) {
  std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- gradients

struct Sample {
  double value = 0.0;
  std::uint64_t branch = 0;
};

struct FdSummary {
  int accepted = 0;
  int nontrivial = 0;
  int rejected = 0;
  double worst = 0.0;
  bool zero_gradient = false;
};

// Central differences on random coordinates. A sample counts only when both
// perturbed evaluations take the base evaluation's discrete branch.
FdSummary fd_check(const TriMesh& m, const std::vector<Vec3>& grad, std::uint64_t branch,
                   const std::function<Sample(const TriMesh&)>& eval, double h, int wanted, std::uint64_t seed) {
  FdSummary s;
  std::mt19937_64 rng(seed);
  bool all_zero = true;
  for (const auto& g : grad) all_zero = all_zero && g.isZero(0.0);
  // an identically zero gradient can only be confirmed by zero differences
  for (int t = 0; t < 60 * wanted && (all_zero ? s.accepted : s.nontrivial) < wanted; ++t) {
    const std::size_t v = rng() % m.vertex_count();
    const int c = static_cast<int>(rng() % 3);
    TriMesh a = m, b = m;
    a.vertices[v][c] += h;
    b.vertices[v][c] -= h;
    const Sample fa = eval(a), fb = eval(b);
    if (fa.branch != branch || fb.branch != branch) {
      ++s.rejected;
      continue;
    }
    const double fd = (fa.value - fb.value) / (2 * h);
    const double g = grad[v][c];
    const double err = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
    s.worst = std::max(s.worst, err);
    ++s.accepted;
    if (std::abs(fd) >= 1e-6) ++s.nontrivial;
  }
  s.zero_gradient = all_zero;
  return s;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  const TriMesh cube = box_grid(Vec3(0, 0, 0), Vec3(1, 1, 1), {8, 8, 8});
  const TriMesh lean = make_fixture("leaning-block");
  bool ok = true;
  std::string detail;
  for (const auto& [name, mesh] : {std::pair<std::string, const TriMesh&>{"cube", cube}, {"leaning-block", lean}}) {
    SimRequest req;
    req.params.end_time = 0.2;
    // the resting cube has a zero standability gradient; drop it tilted
    if (name == "cube") req.tilt = Eigen::AngleAxisd(0.1, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    const auto stand_fn = rotation_deviation_functional(200, Mat3::Identity());
    const auto pairs = triangle_pairs(mesh);
    const auto nb = vertex_neighbors(mesh);
    const BottomVertexSet bottom = bottom_vertices(mesh, default_bottom_threshold(mesh));
    const TriMesh ref = deformed(mesh, [](const Vec3& v) { return Vec3(1.02 * v.x(), v.y() - 0.01 * v.z(), v.z()); });
    const TiltProbe probe;
    const double density = req.params.density;

    struct Term {
      std::string name;
      std::vector<Vec3> grad;
      std::uint64_t branch;
      std::function<Sample(const TriMesh&)> eval;
      double h;
    };
    std::vector<Term> terms;
    {
      SimGradient g = grad_through_sim(mesh, req, stand_fn);
      terms.push_back({"stand", g.vertex_gradient, g.branch_signature,
                       [=](const TriMesh& x) {
                         SimGradient e = evaluate_through_sim(x, req, stand_fn);
                         return Sample{e.value, e.branch_signature};
                       },
                       1e-5});
    }
    auto closed = [&](const std::string& n, const LossGrad& g, std::function<LossGrad(const TriMesh&)> f) {
      terms.push_back({n, g.gradient, g.branch,
                       [f](const TriMesh& x) {
                         LossGrad e = f(x);
                         return Sample{e.value, e.branch};
                       },
                       1e-6});
    };
    closed("stable", stable_equilibrium_grad(mesh, density, probe),
           [=](const TriMesh& x) { return stable_equilibrium_grad(x, density, probe); });
    closed("normal", normal_consistency_grad(mesh, pairs),
           [=](const TriMesh& x) { return normal_consistency_grad(x, pairs); });
    closed("b-lap", bottom_laplacian_grad(mesh, bottom, nb),
           [=](const TriMesh& x) { return bottom_laplacian_grad(x, bottom, nb); });
    closed("fid", fidelity_grad(mesh, ref), [=](const TriMesh& x) { return fidelity_grad(x, ref); });

    std::uint64_t seed = 100;
    for (const Term& t : terms) {
      FdSummary s = fd_check(mesh, t.grad, t.branch, t.eval, t.h, 12, seed++);
      const bool good = (s.zero_gradient ? s.accepted >= 12 && s.nontrivial == 0 : s.nontrivial >= 12) &&
                        s.worst <= 1e-3;
      ok = ok && good;
      detail += fmt(" %s/%s %d nonzero of %d accepted, %d rejected, worst %.1e%s;", name.c_str(), t.name.c_str(),
                    s.nontrivial, s.accepted, s.rejected, s.worst, s.zero_gradient ? " (zero gradient)" : "");
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs <= 120.0;
  report(1, ok, fmt("adjoint vs central differences, %.1fs:", secs) + detail);
}

// ------------------------------------------------------------- conservation

RigidBody brick_body(const SimParams& p) {
  TriMesh m = box(Vec3(0, 0, 0), Vec3(0.4, 0.2, 0.1));
  MassProperties props = compute_mass_properties(m, p.density);
  std::vector<Vec3> pts;
  for (const auto& v : m.vertices) pts.push_back(v - props.com);
  return RigidBody::from(props, pts);
}

double kinetic_energy(const RigidBody& b, const RigidState& s) {
  const Mat3 r = rotation_matrix(s.rotation);
  const Vec3 w = r * b.inertia_inv * r.transpose() * s.angular_momentum;
  return s.linear_momentum.squaredNorm() / (2 * b.mass) + 0.5 * s.angular_momentum.dot(w);
}

void criterion_conservation() {
  SimParams p;
  p.gravity = 0.0;
  const RigidBody b = brick_body(p);
  RigidState s0;
  s0.translation = Vec3(0, 0, 10);
  s0.linear_momentum = Vec3(0.3, -0.1, 0.2);
  // spin mostly about the intermediate axis so the brick tumbles
  s0.angular_momentum = Vec3(0.02, 0.6, -0.01);
  const Trajectory t = simulate(b, s0, p, Platform::ground());
  bool exact = t.states.size() == 2001;
  for (const auto& s : t.states) {
    exact = exact && s.linear_momentum == s0.linear_momentum && s.angular_momentum == s0.angular_momentum;
  }
  const Trajectory again = simulate(b, s0, p, Platform::ground());
  const bool same = again.states == t.states;

  // a second pair of runs with contact and gravity
  SimParams g;
  const TriMesh lean = make_fixture("leaning-block");
  const bool same_contact = simulate_mesh(lean, g, Platform::ground()).states ==
                            simulate_mesh(lean, g, Platform::ground()).states;

  const double e0 = kinetic_energy(b, t.states.front());
  double drift = 0.0;
  for (const auto& s : t.states) drift = std::max(drift, std::abs(kinetic_energy(b, s) - e0) / e0);
  const double tumble = (rotation_matrix(t.states.back().rotation) - Mat3::Identity()).norm();
  report(2, exact && same && same_contact && drift <= 0.01,
         fmt("P, L bit-exact over %zu steps: %s; identical reruns: %s (free), %s (contact); KE drift %.2e; "
             "rotation moved %.2f",
             t.states.size() - 1, exact ? "yes" : "no", same ? "yes" : "no", same_contact ? "yes" : "no", drift,
             tumble));
}

// --------------------------------------------------------------------- mass

void criterion_mass() {
  const double rho = 1000.0;
  const double s = 1.3;
  MassProperties c = compute_mass_properties(box(Vec3(0, 0, 0), Vec3(s, s, s)), rho);
  const double mc = rho * s * s * s;
  const double cube_err = (c.inertia - Mat3::Identity() * mc * s * s / 6.0).cwiseAbs().maxCoeff();

  const double r = 0.5;
  MassProperties sp = compute_mass_properties(icosphere(Vec3::Zero(), r, 4), rho);
  const double ms = 4.0 / 3.0 * std::numbers::pi * r * r * r * rho;
  double sphere_err = oracle::relative(sp.mass, ms);
  for (int i = 0; i < 3; ++i) sphere_err = std::max(sphere_err, oracle::relative(sp.inertia(i, i), 0.4 * ms * r * r));

  bool ok = cube_err <= 1e-10 && sphere_err <= 0.02;
  std::string detail = fmt("cube inertia err %.1e; icosphere worst rel %.4f;", cube_err, sphere_err);
  for (const std::string name : {"inverted-cone", "offset-capsule", "short-leg-biped"}) {
    const TriMesh m = make_fixture(name);
    MassProperties p = compute_mass_properties(m, rho);
    oracle::Moments o = oracle::column_moments(m, rho, 200);
    const double em = oracle::relative(o.mass, p.mass);
    const double ec = (o.com - p.com).norm() / bounding_box(m).diagonal();
    const double ei = (o.inertia - p.inertia).norm() / p.inertia.norm();
    ok = ok && em <= 0.01 && ec <= 0.01 && ei <= 0.01;
    detail += fmt(" %s mass %.1e com %.1e inertia %.1e;", name.c_str(), em, ec, ei);
  }
  report(3, ok, detail);
}

// --------------------------------------------------------------- sign tests

void criterion_signs() {
  SimParams p;
  TiltProbe probe;
  const TriMesh cube = box_grid(Vec3(0, 0, 0), Vec3(1, 1, 1), {20, 20, 20});
  const TriMesh cone = make_fixture("inverted-cone");
  const double cube_stable = stable_equilibrium_loss(cube, compute_mass_properties(cube, p.density).com, probe);
  const double cone_stable = stable_equilibrium_loss(cone, compute_mass_properties(cone, p.density).com, probe);
  const double cube_trd = ground_trd(cube, p);
  const double cone_trd = ground_trd(cone, p);
  report(4, cube_stable == 0.0 && cube_trd < 1e-2 && cone_stable > 0.0 && cone_trd > 0.3,
         fmt("cube stable %.3g trd %.2e; cone stable %.3g trd %.3f", cube_stable, cube_trd, cone_stable, cone_trd));
}

// ------------------------------------------------------------- optimization

struct Optimized {
  std::string name;
  TriMesh input;
  OptimizeResult result;
  double initial_trd = 0.0;
  double final_trd = 0.0;
};

// Worst rise of a 100-iteration moving average above its running minimum.
double worst_trend_rise(const RunHistory& h) {
  std::vector<double> t;
  for (const auto& r : h.records) t.push_back(r.total);
  if (t.size() < 100) return 0.0;
  double window = 0.0;
  for (std::size_t i = 0; i < 100; ++i) window += t[i];
  double lowest = window, worst = 0.0;
  for (std::size_t i = 100; i < t.size(); ++i) {
    window += t[i] - t[i - 100];
    worst = std::max(worst, window / lowest - 1.0);
    lowest = std::min(lowest, window);
  }
  return worst;
}

std::vector<Optimized> optimize_fixtures(double stable_weight) {
  std::vector<Optimized> out;
  for (const std::string& name : fixture_names()) {
    Optimized o;
    o.name = name;
    o.input = make_fixture(name);
    OptimizerConfig c;
    c.max_iterations = 2000;
    c.weights.stable = stable_weight;
    o.initial_trd = ground_trd(o.input, c.params, c.contact, c.quad_dt);
    o.result = optimize(o.input, c);
    o.final_trd = ground_trd(o.result.mesh, c.params, c.contact, c.quad_dt);
    out.push_back(std::move(o));
  }
  return out;
}

void criterion_optimization(const std::vector<Optimized>& runs, double secs) {
  bool ok = secs <= 1800.0;
  double init = 0.0, fin = 0.0;
  std::string detail;
  for (const auto& r : runs) {
    const RunHistory& h = r.result.history;
    const bool topology = r.result.mesh.faces == r.input.faces &&
                          r.result.mesh.vertex_count() == r.input.vertex_count();
    ok = ok && r.initial_trd > 0.3 && h.records.size() <= 2000 && topology && h.mean_displacement <= 0.15;
    init += r.initial_trd;
    fin += r.final_trd;
    detail += fmt(" %s trd %.3f->%.3f in %zu it (%s), disp %.3f, topology %s, trend rise %.2f;", r.name.c_str(),
                  r.initial_trd, r.final_trd, h.records.size(), to_string(h.stop).c_str(), h.mean_displacement,
                  topology ? "same" : "CHANGED", worst_trend_rise(h));
  }
  init /= static_cast<double>(runs.size());
  fin /= static_cast<double>(runs.size());
  const double factor = init / std::max(fin, 1e-12);
  ok = ok && fin < 0.06 && factor >= 5.0;
  report(5, ok, fmt("mean trd %.3f->%.3f (x%.1f), %.0fs:", init, fin, factor, secs) + detail);
}

// ------------------------------------------------------------- perturbation

// Two-proportion z bound: a later rate may exceed an earlier one by at most
// two standard errors of the difference under the pooled rate.
bool within_noise(const BatteryResult& earlier, const BatteryResult& later) {
  const double n1 = earlier.trials, n2 = later.trials;
  const double p = (earlier.successes + later.successes) / (n1 + n2);
  const double sigma = std::sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2));
  return later.rate() - earlier.rate() <= 2.0 * sigma + 1e-12;
}

void criterion_perturbation(const std::vector<Optimized>& full, const std::vector<Optimized>& ablated) {
  BatteryOptions o;
  o.trials = 100;
  o.seed = 0;
  bool ok = true;
  std::string detail;
  double full_02 = 0.0, ablated_02 = 0.0;
  std::vector<std::vector<BatteryResult>> tables;
  for (const auto& r : full) {
    std::vector<BatteryResult> rows = battery_sweep(r.result.mesh, table_angles(), o);
    bool mono = true;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = i + 1; j < rows.size(); ++j) mono = mono && within_noise(rows[i], rows[j]);
    ok = ok && rows.front().rate() == 1.0 && mono;
    detail += " " + r.name + " [";
    for (const auto& row : rows) detail += fmt(" %.2f", row.rate());
    detail += mono ? " ] non-increasing;" : " ] RISES;";
    full_02 += rows[2].rate();
  }
  for (const auto& r : ablated) {
    const BatteryResult b = perturbation_battery(r.result.mesh, 0.02, o);
    ablated_02 += b.rate();
    detail += fmt(" %s without stable %.2f;", r.name.c_str(), b.rate());
  }
  full_02 /= static_cast<double>(full.size());
  ablated_02 /= static_cast<double>(ablated.size());
  ok = ok && ablated_02 <= full_02 + 0.05;
  report(6, ok,
         fmt("rates at phi 0/0.01/0.02/0.04/0.08; mean at 0.02 full %.3f, without stable %.3f:", full_02, ablated_02) +
             detail);
}

// ---------------------------------------------------------------- platforms

void criterion_platforms(const TriMesh& lean) {
  const Platform incline = Platform::incline(10.0 * std::numbers::pi / 180.0);
  PlatformTestOptions grip;
  PlatformVerdict a = platform_test(lean, incline, grip);
  PlatformTestOptions slick;
  slick.params.friction_coeff = 0.02;
  PlatformVerdict b = platform_test(lean, incline, slick);
  PlatformVerdict c = platform_test(lean, Platform::sphere(Vec3(0, 0, -1), 1.0), grip);
  // standing on the incline is judged by TRD as stated for this check; the
  // full verdict is printed alongside
  const bool ok = a.trd < 0.05 && (!b.stands || !c.stands);
  auto line = [](const char* n, const PlatformVerdict& v) {
    return fmt("%s: verdict %s (trd %.3f, height %+.1f%%, slide %.2f m)", n, v.stands ? "stands" : "fails", v.trd,
               100.0 * (v.final_height / v.initial_height - 1.0), v.slide_distance);
  };
  report(7, ok,
         line("incline mu 0.5", a) + "; " + line("incline mu 0.02", b) + "; " + line("sphere apex", c));
}

// ---------------------------------------------------------------- cut plane

void criterion_cut(const TriMesh& capsule, const TriMesh& optimized) {
  EvalProtocol protocol;
  protocol.run_battery = false;
  protocol.platforms = {Platform::ground()};
  const double height = bounding_box(capsule).extent().z();
  bool ok = true;
  std::string detail = " cuts:";
  for (int k = 1; k <= 10; ++k) {
    const double frac = 0.01 * k;
    CutResult cut = cut_plane(capsule, frac * height);
    EvalReport r = evaluate_mesh(cut.mesh, protocol);
    ok = ok && !r.certified;
    detail += fmt(" %.2f:%s(trd %.2f)", frac, r.certified ? "CERTIFIED" : "fails", r.trd);
  }
  EvalReport r = evaluate_mesh(optimized, protocol);
  ok = ok && r.certified;
  report(8, ok, fmt("optimizer output %s (trd %.3f, stable %.2g);", r.certified ? "certified" : "NOT certified", r.trd,
                    r.stable_loss) +
                    detail);
}

// --------------------------------------------------------------------- trd

Trajectory closed_form(bool tilt) {
  Trajectory t;
  t.dt = 0.02;
  for (std::size_t k = 0; k <= 100; ++k) {
    RigidState s;
    if (tilt && k > 0) s.rotation = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitX()));
    t.steps.push_back(k);
    t.states.push_back(s);
  }
  return t;
}

void criterion_trd() {
  const double still = trd(closed_form(false), 2.0, 0.02);
  const double tipped = trd(closed_form(true), 2.0, 0.02);
  const double expected = 99.0 * std::numbers::sqrt2 * 0.02 / 2.0;
  report(9, still == 0.0 && std::abs(tipped - expected) <= 1e-12,
         fmt("static %.3g; 90 deg tilt %.15f vs %.15f", still, tipped, expected));
}

}  // namespace

int main() {
  try {
    criterion_gradients();
    criterion_conservation();
    criterion_mass();
    criterion_signs();

    const auto t0 = Clock::now();
    const std::vector<Optimized> full = optimize_fixtures(LossWeights{}.stable);
    criterion_optimization(full, seconds_since(t0));
    const std::vector<Optimized> ablated = optimize_fixtures(0.0);
    criterion_perturbation(full, ablated);

    auto find = [&](const std::string& n) -> const Optimized& {
      return *std::find_if(full.begin(), full.end(), [&](const Optimized& o) { return o.name == n; });
    };
    criterion_platforms(find("leaning-block").result.mesh);
    criterion_cut(find("offset-capsule").input, find("offset-capsule").result.mesh);
    criterion_trd();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
