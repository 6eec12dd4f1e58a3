#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "upright/config.hpp"

using namespace upright;

namespace {

std::string error_of(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config keeps the defaults") {
  RunConfig c = parse_config(Json{{"schema_version", 1}});
  CHECK(c.seed == 0);
  CHECK(c.sim.dt == 1e-3);
  CHECK(c.weights.stand == 1e5);
  CHECK(c.weights.stable == 1e5);
  CHECK(c.weights.normal == 1e4);
  CHECK(c.weights.bottom_laplacian == 1e7);
  CHECK(c.probe.angle == 0.05);
  CHECK(c.probe.directions == 20);
  CHECK(c.optimizer.max_iterations == 5000);
  CHECK(c.eval.trials == 100);
  CHECK(c.platform.kind == Platform::Kind::Ground);
}

TEST_CASE("overrides land in the assembled settings") {
  Json j = Json::parse(R"({
    "schema_version": 1, "seed": 42, "platform": "incline:10deg",
    "sim": {"friction_coeff": 0.3, "end_time": 1.5},
    "weights": {"stable": 0},
    "optimizer": {"learning_rate": 0.002, "max_iterations": 10},
    "eval": {"angles": [0, 0.01], "trials": 7, "platforms": ["ground", {"kind": "sphere", "center": [0, 0, -2], "radius": 2}]}
  })");
  RunConfig c = parse_config(j);
  OptimizerConfig o = c.optimizer_config();
  CHECK(o.params.friction_coeff == 0.3);
  CHECK(o.weights.stable == 0.0);
  CHECK(o.learning_rate == 0.002);
  CHECK(o.max_iterations == 10);
  EvalProtocol e = c.eval_protocol();
  CHECK(e.seed == 42);
  CHECK(e.params.end_time == 1.5);
  CHECK(e.trials == 7);
  CHECK(e.angles == std::vector<double>{0.0, 0.01});
  REQUIRE(e.platforms.size() == 2);
  CHECK(e.platforms[1].radius == 2.0);
  CHECK(c.platform.incline_angle == doctest::Approx(10.0 * std::numbers::pi / 180.0));
}

TEST_CASE("round trip through JSON is exact") {
  Json j = Json::parse(R"({"schema_version": 1, "seed": 9, "platform": {"kind": "incline", "angle_rad": 0.1234},
                           "sim": {"dt": 0.0005}, "contact": {"all_vertices": true}})");
  RunConfig c = parse_config(j);
  Json once = to_json(c);
  Json twice = to_json(parse_config(once));
  CHECK(once == twice);
  CHECK(once["platform"]["angle_rad"] == 0.1234);
}

TEST_CASE("unknown and mistyped keys are named") {
  CHECK(error_of(Json{{"schema_version", 1}, {"colour", "red"}}).find("colour") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"sim", {{"dtt", 1}}}}).find("sim.dtt") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"weights", {{"stand", "big"}}}}).find("weights.stand") !=
        std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"eval", {{"trials", -3}}}}).find("eval.trials") != std::string::npos);
  CHECK(error_of(Json{{"sim", Json::object()}}).find("schema_version") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 2}}).find("schema_version") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"platform", "incline:95deg"}}).find("platform") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"sim", {{"dt", -1}}}}).find("sim") != std::string::npos);
  CHECK(error_of(Json{{"schema_version", 1}, {"optimizer", {{"stand_stride", 0}}}}).find("optimizer") !=
        std::string::npos);
}

TEST_CASE("config file loading") {
  auto path = std::filesystem::temp_directory_path() / "upright_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"schema_version": 1, "seed": 3})";
  }
  CHECK(load_config(path).seed == 3);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("report serialization") {
  Trajectory t;
  t.dt = 0.001;
  t.steps = {0, 5};
  t.states.resize(2);
  t.states[1].translation = Vec3(1, 2, 3);
  Json j = trajectory_json(t);
  REQUIRE(j.size() == 2);
  CHECK(j[1]["t"] == 0.005);
  CHECK(j[1]["T"] == Json::array({1.0, 2.0, 3.0}));
  CHECK(j[0]["q"] == Json::array({1.0, 0.0, 0.0, 0.0}));

  BatteryResult b;
  b.phi_max = 0.02;
  b.trials = 4;
  b.successes = 3;
  CHECK(sweep_csv({b}) == "phi_max,success_rate,successes,trials\n0.02,0.75,3,4\n");

  IterationRecord r;
  r.iteration = 3;
  r.total = 2.5;
  Json line = to_json(r);
  CHECK(line["iteration"] == 3);
  CHECK(line["stand"].is_null());
  CHECK(line["total"] == 2.5);
  CHECK(line.contains("bottom_laplacian"));

  EvalReport e;
  e.seed = 12;
  CHECK(to_json(e)["seed"] == 12);
}
