#include <doctest.h>

#include "upright/fixtures.hpp"
#include "upright/mesh.hpp"
#include "upright/optimizer.hpp"
#include "upright/primitives.hpp"

using namespace upright;

namespace {

OptimizerConfig quick(std::size_t iterations) {
  OptimizerConfig c;
  c.max_iterations = iterations;
  c.check_stride = 1000;
  return c;
}

}  // namespace

TEST_CASE("zero iterations returns the input untouched") {
  TriMesh m = make_fixture("inverted-cone");
  OptimizeResult r = optimize(m, quick(0));
  CHECK(format_obj(r.mesh) == format_obj(m));
  CHECK(r.history.records.empty());
  CHECK(r.history.mean_displacement == 0.0);
}

TEST_CASE("short runs are deterministic, keep topology and log every iteration") {
  TriMesh m = make_fixture("offset-capsule");
  std::size_t calls = 0;
  OptimizeResult a = optimize(m, quick(12), Platform::ground(), [&](const IterationRecord&) { ++calls; });
  OptimizeResult b = optimize(m, quick(12));
  CHECK(format_obj(a.mesh) == format_obj(b.mesh));
  CHECK(a.mesh.faces == m.faces);
  CHECK(a.history.records.size() == 12);
  CHECK(calls == 12);
  CHECK(a.history.records[0].active.stand);
  CHECK_FALSE(a.history.records[1].active.stand);
  CHECK(a.history.records[10].active.stand);
  CHECK(a.history.checks.size() == 1);
  CHECK(a.history.checks[0].iteration == 0);
  CHECK(a.history.stop == StopReason::MaxIterations);
  CHECK(a.history.mean_displacement > 0.0);
  CHECK(a.history.mean_displacement < 0.05);
}

TEST_CASE("objective gradient of the smooth terms matches finite differences") {
  TriMesh m = make_fixture("short-leg-biped");
  auto [canon, shift] = ground_and_center(m, Vec3(0.0, 0.0, 0.0));
  (void)shift;
  OptimizerConfig c = quick(1);
  ObjectiveContext ctx = make_objective_context(canon);
  TriMesh moved = deformed(canon, [](const Vec3& v) { return Vec3(v.x() + 0.01 * v.z(), v.y(), v.z()); });
  // iteration 1 skips the simulation term
  ObjectiveEvaluation ev = evaluate_objective(moved, ctx, c, Platform::ground(), 1);
  CHECK_FALSE(ev.weighted.active.stand);
  CHECK(ev.weighted.total > 0.0);
  REQUIRE(ev.gradient.size() == moved.vertex_count());
  for (const auto& g : ev.gradient) CHECK(g.allFinite());
}

TEST_CASE("config validation") {
  OptimizerConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  CHECK_THROWS(c.validate());
  c = OptimizerConfig{};
  c.stand_stride = 0;
  CHECK_THROWS(c.validate());
  c = OptimizerConfig{};
  c.stand_horizon = -1.0;
  CHECK_THROWS(c.validate());
  c = OptimizerConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("open mesh is rejected") {
  TriMesh m = box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  m.faces.pop_back();
  CHECK_THROWS_AS(optimize(m, quick(1)), MeshError);
}

TEST_CASE("stop reasons have names") {
  CHECK(to_string(StopReason::Certified) != to_string(StopReason::MaxIterations));
  CHECK_FALSE(to_string(StopReason::SimulationFailure).empty());
}
