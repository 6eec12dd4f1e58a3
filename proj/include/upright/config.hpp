#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "upright/evaluate.hpp"
#include "upright/optimizer.hpp"

namespace upright {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigSchemaVersion = 1;

/// Bad config file, unknown key, wrong type or out-of-range value. The
/// message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a CLI run depends on. Sections mirror the JSON layout:
///
///   { "schema_version": 1, "mesh": "...", "platform": "ground",
///     "output": "...", "seed": 0, "threads": 0,
///     "sim": {...}, "contact": {...}, "weights": {...}, "probe": {...},
///     "optimizer": {...}, "eval": {...} }
///
/// Every key is optional except schema_version; omitted keys keep defaults.
struct RunConfig {
  std::string mesh;
  Platform platform;
  std::string output;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware default

  SimParams sim;
  ContactOptions contact;
  LossWeights weights;
  TiltProbe probe;
  OptimizerConfig optimizer;  // its sim/contact/weights/probe are ignored
  EvalProtocol eval;          // likewise; the seed comes from `seed`

  /// Optimizer settings with the shared sections filled in.
  OptimizerConfig optimizer_config() const;
  /// Evaluation protocol with the shared sections and seed filled in.
  EvalProtocol eval_protocol() const;

  /// Throws ConfigError naming the first invalid section.
  void validate() const;
};

/// Parses and validates; unknown keys are rejected.
RunConfig parse_config(const Json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Full effective config, defaults included. parse_config(to_json(c)) == c.
Json to_json(const RunConfig& c);

Json to_json(const SimParams& p);
Json to_json(const IterationRecord& r);
Json to_json(const CheckRecord& c);
/// Run summary without the per-iteration records.
Json summary_json(const RunHistory& h);
Json to_json(const PlatformVerdict& v);
Json to_json(const BatteryResult& b, bool with_trials = false);
Json to_json(const EvalReport& r);

/// Trajectory as a JSON array of {t, T, q, P, L}; q is (w, x, y, z).
Json trajectory_json(const Trajectory& traj);

/// "phi_max,success_rate,successes,trials" rows.
std::string sweep_csv(const std::vector<BatteryResult>& sweep);

}  // namespace upright
