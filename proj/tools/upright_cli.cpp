// upright: optimize meshes so they stand, and check whether they do.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "upright/config.hpp"
#include "upright/cut_plane.hpp"
#include "upright/evaluate.hpp"
#include "upright/fixtures.hpp"
#include "upright/mesh.hpp"
#include "upright/optimizer.hpp"
#include "upright/parallel.hpp"
#include "upright/rigid_sim.hpp"

namespace fs = std::filesystem;
using namespace upright;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kInput = 2, kUncertified = 3, kNumerical = 4 };

// Thrown for bad flag values so they map to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string input;
  std::string out;
  std::string platform;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App& cmd, Common& c, bool with_platform = true) {
  cmd.add_option("--config", c.config, "JSON run config");
  cmd.add_option("--input", c.input, "input OBJ (overrides the config's mesh)");
  cmd.add_option("--out", c.out, "output location");
  cmd.add_option("--seed", c.seed, "random seed");
  cmd.add_option("--threads", c.threads, "worker thread cap, 0 = all cores");
  if (with_platform) cmd.add_option("--platform", c.platform, "ground | incline:<deg> | sphere:<cx,cy,cz,r>");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (!c.input.empty()) cfg.mesh = c.input;
  if (!c.out.empty()) cfg.output = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (!c.platform.empty()) {
    try {
      cfg.platform = Platform::parse(c.platform);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--platform: ") + e.what());
    }
  }
  return cfg;
}

// Applies the thread cap and rechecks what the flags changed.
void finalize(RunConfig& cfg) {
  cfg.validate();
  set_thread_limit(cfg.threads);
}

TriMesh load_input(const RunConfig& cfg) {
  if (cfg.mesh.empty()) throw UsageError("no input mesh; pass --input or set \"mesh\" in the config");
  TriMesh mesh = load_obj(cfg.mesh);
  require_watertight(mesh);
  return mesh;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.output.empty() ? fs::path(".") : fs::path(cfg.output);
  fs::create_directories(dir);
  return dir;
}

void print_eval(const EvalReport& r) {
  std::printf("trd %.6g  stable %.6g  certified %s\n", r.trd, r.stable_loss, r.certified ? "yes" : "no");
  for (const auto& v : r.platforms) {
    std::printf("  %-28s trd %.4f  height %.4f -> %.4f  %s\n", v.platform.describe().c_str(), v.trd,
                v.initial_height, v.final_height, v.error.empty() ? (v.stands ? "stands" : "falls") : v.error.c_str());
  }
  for (const auto& b : r.sweep) std::printf("  phi %.4f  rate %.2f\n", b.phi_max, b.rate());
}

int cmd_optimize(const Common& c, std::optional<std::size_t> iterations, const std::vector<double>& angles,
                 std::optional<int> trials) {
  RunConfig cfg = resolve(c);
  if (iterations) cfg.optimizer.max_iterations = *iterations;
  if (!angles.empty()) cfg.eval.angles = angles;
  if (trials) cfg.eval.trials = *trials;
  finalize(cfg);
  const TriMesh input = load_input(cfg);
  const fs::path dir = out_dir(cfg);

  std::ofstream history(dir / "history.jsonl", std::ios::binary);
  if (!history) throw std::runtime_error("cannot write " + (dir / "history.jsonl").string());
  auto on_iteration = [&](const IterationRecord& r) {
    history << to_json(r).dump() << '\n';
    if (r.iteration % 100 == 0) {
      std::fprintf(stderr, "iter %5zu  total %.6g  |g| %.3g\n", r.iteration, r.total, r.gradient_norm);
    }
  };
  const OptimizeResult res = optimize(input, cfg.optimizer_config(), cfg.platform, on_iteration);
  history.close();

  const RunHistory& h = res.history;
  for (const auto& ck : h.checks) {
    std::printf("check %5zu  trd %.4f  stable %.3g  height %+.3f  %s\n", ck.iteration, ck.trd, ck.stable_loss,
                ck.height_change, ck.passed ? "pass" : "");
  }
  std::printf("stop: %s%s%s\n", to_string(h.stop).c_str(), h.diagnostic.empty() ? "" : " - ",
              h.diagnostic.c_str());
  if (h.distorted) std::printf("warning: mean displacement %.3f exceeds the distortion cap\n", h.mean_displacement);

  save_obj(res.mesh, dir / "optimized.obj");
  Json report = {{"command", "optimize"}, {"config", to_json(cfg)}, {"seed", cfg.seed}, {"run", summary_json(h)}};
  const bool numerical = h.stop == StopReason::NonFiniteGradient || h.stop == StopReason::SimulationFailure;
  if (!numerical) {
    const EvalReport eval = evaluate_mesh(res.mesh, cfg.eval_protocol());
    print_eval(eval);
    report["evaluation"] = to_json(eval);
    write_text(dir / "sweep.csv", sweep_csv(eval.sweep));
  }
  write_json(dir / "report.json", report);
  if (numerical) return kNumerical;
  return h.certified ? kOk : kUncertified;
}

int cmd_evaluate(const Common& c, const std::vector<double>& angles, std::optional<int> trials, bool no_battery) {
  RunConfig cfg = resolve(c);
  if (!angles.empty()) cfg.eval.angles = angles;
  if (trials) cfg.eval.trials = *trials;
  if (no_battery) cfg.eval.run_battery = false;
  finalize(cfg);
  const TriMesh mesh = load_input(cfg);
  const fs::path dir = out_dir(cfg);
  const EvalReport eval = evaluate_mesh(mesh, cfg.eval_protocol());
  print_eval(eval);
  write_json(dir / "report.json",
             {{"command", "evaluate"}, {"config", to_json(cfg)}, {"seed", cfg.seed}, {"evaluation", to_json(eval)}});
  write_text(dir / "sweep.csv", sweep_csv(eval.sweep));
  return eval.certified ? kOk : kUncertified;
}

int cmd_simulate(const Common& c, std::optional<double> t_end, std::size_t stride) {
  RunConfig cfg = resolve(c);
  if (t_end) cfg.sim.end_time = *t_end;
  if (stride < 1) throw UsageError("--stride must be at least 1");
  finalize(cfg);
  const TriMesh mesh = load_input(cfg);
  const Trajectory traj = simulate_mesh(mesh, cfg.sim, cfg.platform, cfg.contact, stride);
  const fs::path path = cfg.output.empty() ? fs::path("trajectory.json") : fs::path(cfg.output);
  const std::size_t steps = traj.steps.empty() ? 0 : traj.steps.back();
  write_json(path, {{"command", "simulate"},
                    {"config", to_json(cfg)},
                    {"seed", cfg.seed},
                    {"steps", steps},
                    {"stride", stride},
                    {"trajectory", trajectory_json(traj)}});
  std::printf("%zu steps, %zu states -> %s\n", steps, traj.states.size(), path.string().c_str());
  return kOk;
}

int cmd_cutplane(const Common& c, double height) {
  RunConfig cfg = resolve(c);
  finalize(cfg);
  const TriMesh mesh = load_input(cfg);
  const CutResult cut = cut_plane(mesh, height);
  if (cut.shells_dropped > 0) {
    std::fprintf(stderr, "warning: the cut split the mesh; dropped %zu smaller shell(s)\n", cut.shells_dropped);
  }
  const fs::path path = cfg.output.empty() ? fs::path("cut.obj") : fs::path(cfg.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_obj(cut.mesh, path);
  std::printf("%s at %.6g: %zu vertices, %zu faces -> %s\n", cut.cut ? "cut" : "unchanged", cut.plane,
              cut.mesh.vertex_count(), cut.mesh.face_count(), path.string().c_str());
  return kOk;
}

int cmd_fixture(const std::string& name, const std::string& out) {
  TriMesh mesh;
  try {
    mesh = make_fixture(name);
  } catch (const UnknownFixtureError& e) {
    throw UsageError(e.what());
  }
  const fs::path path = out.empty() ? fs::path(name + ".obj") : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_obj(mesh, path);
  std::printf("%s: %zu vertices, %zu faces -> %s\n", name.c_str(), mesh.vertex_count(), mesh.face_count(),
              path.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supporting mesh optimization and standability checks"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> iterations;
  std::vector<double> angles;
  std::optional<int> trials;
  bool no_battery = false;
  std::optional<double> t_end;
  std::size_t stride = 1;
  double height = 0.0;
  std::string fixture_name;
  std::string fixture_out;

  auto* opt = app.add_subcommand("optimize", "optimize vertex positions until the mesh stands");
  add_common(*opt, common);
  opt->add_option("--iterations", iterations, "iteration cap");
  opt->add_option("--angles", angles, "battery angles in radians, comma separated")->delimiter(',');
  opt->add_option("--trials", trials, "trials per battery angle");

  auto* eval = app.add_subcommand("evaluate", "TRD, perturbation battery and platform tests");
  add_common(*eval, common);
  eval->add_option("--angles", angles, "battery angles in radians, comma separated")->delimiter(',');
  eval->add_option("--trials", trials, "trials per battery angle");
  eval->add_flag("--no-battery", no_battery, "skip the perturbation battery");

  auto* sim = app.add_subcommand("simulate", "forward simulation; writes the trajectory as JSON");
  add_common(*sim, common);
  sim->add_option("--t-end", t_end, "simulated seconds");
  sim->add_option("--stride", stride, "record every n-th step")->check(CLI::PositiveNumber);

  auto* cut = app.add_subcommand("cutplane", "cut-plane baseline: slice off the bottom and cap it");
  add_common(*cut, common, false);
  cut->add_option("--height", height, "cut height above the lowest point, meters")->required();

  auto* fix = app.add_subcommand("fixture", "write a built-in test mesh as OBJ");
  fix->add_option("name", fixture_name, "fixture name")->required();
  fix->add_option("--out", fixture_out, "output OBJ");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*opt) return cmd_optimize(common, iterations, angles, trials);
    if (*eval) return cmd_evaluate(common, angles, trials, no_battery);
    if (*sim) return cmd_simulate(common, t_end, stride);
    if (*cut) return cmd_cutplane(common, height);
    if (*fix) return cmd_fixture(fixture_name, fixture_out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const SimulationError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const MeshError& e) {
    std::fprintf(stderr, "invalid mesh: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
