#include "upright/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace upright {

namespace {

// Reads the keys of one JSON object and rejects whatever it did not read.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key) + ": expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(key_path(key) + ": must be finite");
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          const auto u = v->get<std::uint64_t>();
          if (u > std::numeric_limits<Int>::max()) throw ConfigError(key_path(key) + ": out of range");
          out = static_cast<Int>(u);
          return;
        }
        if (v->get<std::int64_t>() < 0) throw ConfigError(key_path(key) + ": must be non-negative");
      }
      const auto s = v->get<std::int64_t>();
      if (s < static_cast<std::int64_t>(std::numeric_limits<Int>::min()) ||
          static_cast<std::uint64_t>(s) > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
        throw ConfigError(key_path(key) + ": out of range");
      }
      out = static_cast<Int>(s);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + key_path(it.key()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Platform parse_platform(const Json& v, const std::string& path) {
  try {
    if (v.is_string()) return Platform::parse(v.get<std::string>());
    Section s(v, path);
    std::string kind;
    s.string("kind", kind);
    Platform p;
    if (kind == "ground") {
      p = Platform::ground();
    } else if (kind == "incline") {
      double angle = 0.0;
      s.number("angle_rad", angle);
      p = Platform::incline(angle);
    } else if (kind == "sphere") {
      const Json* c = s.find("center");
      if (!c || !c->is_array() || c->size() != 3) throw ConfigError(path + ".center: expected [x, y, z]");
      for (const auto& x : *c) {
        if (!x.is_number()) throw ConfigError(path + ".center: expected numbers");
      }
      double r = 1.0;
      s.number("radius", r);
      p = Platform::sphere(Vec3((*c)[0].get<double>(), (*c)[1].get<double>(), (*c)[2].get<double>()), r);
    } else {
      throw ConfigError(path + ".kind: expected ground, incline or sphere");
    }
    s.finish();
    p.validate();
    return p;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json platform_json(const Platform& p) {
  switch (p.kind) {
    case Platform::Kind::Ground:
      return {{"kind", "ground"}};
    case Platform::Kind::Incline:
      return {{"kind", "incline"}, {"angle_rad", p.incline_angle}};
    case Platform::Kind::Sphere:
      return {{"kind", "sphere"}, {"center", {p.center.x(), p.center.y(), p.center.z()}}, {"radius", p.radius}};
  }
  return {};
}

void read_sim(Section s, SimParams& p) {
  s.number("dt", p.dt);
  s.number("end_time", p.end_time);
  s.number("contact_stiffness", p.contact_stiffness);
  s.number("contact_damping", p.contact_damping);
  s.number("friction_coeff", p.friction_coeff);
  s.number("friction_stiffness", p.friction_stiffness);
  s.number("density", p.density);
  s.number("gravity", p.gravity);
  s.finish();
}

void read_contact(Section s, ContactOptions& c) {
  s.number("candidate_band", c.candidate_band);
  s.integer("max_points", c.max_points);
  s.boolean("all_vertices", c.all_vertices);
  s.number("drop_gap", c.drop_gap);
  s.finish();
}

Json contact_json(const ContactOptions& c) {
  return {{"candidate_band", c.candidate_band},
          {"max_points", c.max_points},
          {"all_vertices", c.all_vertices},
          {"drop_gap", c.drop_gap}};
}

void read_weights(Section s, LossWeights& w) {
  s.number("fidelity", w.fidelity);
  s.number("stand", w.stand);
  s.number("stable", w.stable);
  s.number("normal", w.normal);
  s.number("bottom_laplacian", w.bottom_laplacian);
  s.finish();
}

Json weights_json(const LossWeights& w) {
  return {{"fidelity", w.fidelity},
          {"stand", w.stand},
          {"stable", w.stable},
          {"normal", w.normal},
          {"bottom_laplacian", w.bottom_laplacian}};
}

void read_probe(Section s, TiltProbe& p) {
  s.number("angle", p.angle);
  s.integer("directions", p.directions);
  s.finish();
}

void read_optimizer(Section s, OptimizerConfig& o) {
  s.integer("max_iterations", o.max_iterations);
  s.number("learning_rate", o.learning_rate);
  s.number("beta1", o.beta1);
  s.number("beta2", o.beta2);
  s.number("epsilon", o.epsilon);
  s.integer("stand_stride", o.stand_stride);
  s.number("stand_gradient_ratio", o.stand_gradient_ratio);
  s.number("stand_horizon", o.stand_horizon);
  s.number("bottom_fraction", o.bottom_fraction);
  s.number("early_stop_trd", o.early_stop_trd);
  s.number("early_stop_height_tolerance", o.early_stop_height_tolerance);
  s.integer("check_stride", o.check_stride);
  s.number("quad_dt", o.quad_dt);
  s.number("distortion_cap", o.distortion_cap);
  s.integer("max_halvings", o.max_halvings);
  s.finish();
}

Json optimizer_json(const OptimizerConfig& o) {
  return {{"max_iterations", o.max_iterations},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon},
          {"stand_stride", o.stand_stride},
          {"stand_gradient_ratio", o.stand_gradient_ratio},
          {"stand_horizon", o.stand_horizon},
          {"bottom_fraction", o.bottom_fraction},
          {"early_stop_trd", o.early_stop_trd},
          {"early_stop_height_tolerance", o.early_stop_height_tolerance},
          {"check_stride", o.check_stride},
          {"quad_dt", o.quad_dt},
          {"distortion_cap", o.distortion_cap},
          {"max_halvings", o.max_halvings}};
}

void read_eval(Section s, EvalProtocol& e) {
  s.number("trd_threshold", e.trd_threshold);
  s.number("height_tolerance", e.height_tolerance);
  s.number("quad_dt", e.quad_dt);
  s.integer("trials", e.trials);
  s.boolean("run_battery", e.run_battery);
  if (const Json* a = s.find("angles")) {
    if (!a->is_array()) throw ConfigError(s.key_path("angles") + ": expected an array of numbers");
    e.angles.clear();
    for (const auto& x : *a) {
      if (!x.is_number()) throw ConfigError(s.key_path("angles") + ": expected an array of numbers");
      e.angles.push_back(x.get<double>());
    }
  }
  if (const Json* p = s.find("platforms")) {
    if (!p->is_array()) throw ConfigError(s.key_path("platforms") + ": expected an array");
    e.platforms.clear();
    for (std::size_t i = 0; i < p->size(); ++i) {
      e.platforms.push_back(parse_platform((*p)[i], s.key_path("platforms") + "[" + std::to_string(i) + "]"));
    }
  }
  s.finish();
}

Json eval_json(const EvalProtocol& e) {
  Json platforms = Json::array();
  for (const auto& p : e.platforms) platforms.push_back(platform_json(p));
  return {{"trd_threshold", e.trd_threshold},
          {"height_tolerance", e.height_tolerance},
          {"quad_dt", e.quad_dt},
          {"trials", e.trials},
          {"run_battery", e.run_battery},
          {"angles", e.angles},
          {"platforms", platforms}};
}

template <typename F>
void checked(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

OptimizerConfig RunConfig::optimizer_config() const {
  OptimizerConfig o = optimizer;
  o.params = sim;
  o.contact = contact;
  o.weights = weights;
  o.probe = probe;
  return o;
}

EvalProtocol RunConfig::eval_protocol() const {
  EvalProtocol e = eval;
  e.params = sim;
  e.contact = contact;
  e.probe = probe;
  e.seed = seed;
  return e;
}

void RunConfig::validate() const {
  checked("platform", [&] { platform.validate(); });
  checked("sim", [&] { sim.validate(); });
  checked("contact", [&] {
    if (!(contact.candidate_band > 0.0)) throw ConfigError("contact.candidate_band: must be positive");
    if (contact.max_points < 1) throw ConfigError("contact.max_points: must be at least 1");
    if (!(contact.drop_gap >= 0.0)) throw ConfigError("contact.drop_gap: must be non-negative");
  });
  checked("weights", [&] { weights.validate(); });
  checked("probe", [&] { probe.validate(); });
  checked("optimizer", [&] { optimizer_config().validate(); });
  checked("eval", [&] {
    if (eval.trials < 1) throw ConfigError("eval.trials: must be at least 1");
    if (!(eval.trd_threshold > 0.0)) throw ConfigError("eval.trd_threshold: must be positive");
    if (!(eval.height_tolerance > 0.0)) throw ConfigError("eval.height_tolerance: must be positive");
    if (!(eval.quad_dt > 0.0)) throw ConfigError("eval.quad_dt: must be positive");
    for (double a : eval.angles) {
      if (!(a >= 0.0 && a < std::numbers::pi / 2.0)) throw ConfigError("eval.angles: each angle must lie in [0, pi/2)");
    }
    for (const auto& p : eval.platforms) p.validate();
  });
}

RunConfig parse_config(const Json& j) {
  Section root(j, "");
  const Json* version = root.find("schema_version");
  if (!version) throw ConfigError("schema_version: missing");
  if (!version->is_number_integer() || version->get<std::int64_t>() != kConfigSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kConfigSchemaVersion));
  }
  RunConfig c;
  root.string("mesh", c.mesh);
  root.string("output", c.output);
  root.integer("seed", c.seed);
  root.integer("threads", c.threads);
  if (const Json* p = root.find("platform")) c.platform = parse_platform(*p, "platform");
  if (const Json* s = root.find("sim")) read_sim(Section(*s, "sim"), c.sim);
  if (const Json* s = root.find("contact")) read_contact(Section(*s, "contact"), c.contact);
  if (const Json* s = root.find("weights")) read_weights(Section(*s, "weights"), c.weights);
  if (const Json* s = root.find("probe")) read_probe(Section(*s, "probe"), c.probe);
  if (const Json* s = root.find("optimizer")) read_optimizer(Section(*s, "optimizer"), c.optimizer);
  if (const Json* s = root.find("eval")) read_eval(Section(*s, "eval"), c.eval);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

Json to_json(const SimParams& p) {
  return {{"dt", p.dt},
          {"end_time", p.end_time},
          {"contact_stiffness", p.contact_stiffness},
          {"contact_damping", p.contact_damping},
          {"friction_coeff", p.friction_coeff},
          {"friction_stiffness", p.friction_stiffness},
          {"density", p.density},
          {"gravity", p.gravity}};
}

Json to_json(const RunConfig& c) {
  return {{"schema_version", kConfigSchemaVersion},
          {"mesh", c.mesh},
          {"platform", platform_json(c.platform)},
          {"output", c.output},
          {"seed", c.seed},
          {"threads", c.threads},
          {"sim", to_json(c.sim)},
          {"contact", contact_json(c.contact)},
          {"weights", weights_json(c.weights)},
          {"probe", {{"angle", c.probe.angle}, {"directions", c.probe.directions}}},
          {"optimizer", optimizer_json(c.optimizer)},
          {"eval", eval_json(c.eval)}};
}

Json to_json(const IterationRecord& r) {
  const auto& c = r.components;
  const auto& a = r.active;
  Json j = {{"iteration", r.iteration},
            {"stand", a.stand ? Json(c.stand) : Json(nullptr)},
            {"stable", c.stable},
            {"normal", c.normal},
            {"bottom_laplacian", c.bottom_laplacian},
            {"fidelity", c.fidelity},
            {"total", r.total},
            {"gradient_norm", r.gradient_norm},
            {"learning_rate", r.learning_rate},
            {"seconds", r.seconds}};
  if (r.skipped) j["skipped"] = true;
  return j;
}

Json to_json(const CheckRecord& c) {
  return {{"iteration", c.iteration},
          {"trd", c.trd},
          {"stable_loss", c.stable_loss},
          {"height_change", c.height_change},
          {"passed", c.passed}};
}

Json summary_json(const RunHistory& h) {
  Json checks = Json::array();
  for (const auto& c : h.checks) checks.push_back(to_json(c));
  return {{"stop", to_string(h.stop)},
          {"diagnostic", h.diagnostic},
          {"certified", h.certified},
          {"iterations", h.records.size()},
          {"final_trd", h.final_trd},
          {"final_stable_loss", h.final_stable_loss},
          {"mean_displacement", h.mean_displacement},
          {"distorted", h.distorted},
          {"seconds", h.seconds},
          {"checks", checks}};
}

Json to_json(const PlatformVerdict& v) {
  Json j = {{"platform", v.platform.describe()},
            {"trd", v.trd},
            {"initial_height", v.initial_height},
            {"final_height", v.final_height},
            {"height_ok", v.height_ok},
            {"slide_distance", v.slide_distance},
            {"stands", v.stands}};
  if (!v.error.empty()) j["error"] = v.error;
  return j;
}

Json to_json(const BatteryResult& b, bool with_trials) {
  Json j = {{"phi_max", b.phi_max},
            {"trials", b.trials},
            {"successes", b.successes},
            {"success_rate", b.rate()},
            {"upright_height", b.upright_height}};
  if (with_trials) {
    Json t = Json::array();
    for (const auto& d : b.details) {
      Json row = {{"phi_x", d.draw.phi_x}, {"phi_y", d.draw.phi_y}, {"final_height", d.final_height},
                  {"success", d.success}};
      if (!d.error.empty()) row["error"] = d.error;
      t.push_back(row);
    }
    j["details"] = t;
  }
  return j;
}

Json to_json(const EvalReport& r) {
  Json platforms = Json::array();
  for (const auto& v : r.platforms) platforms.push_back(to_json(v));
  Json sweep = Json::array();
  for (const auto& b : r.sweep) sweep.push_back(to_json(b));
  return {{"certified", r.certified},
          {"trd", r.trd},
          {"stable_loss", r.stable_loss},
          {"seed", r.seed},
          {"platforms", platforms},
          {"sweep", sweep}};
}

Json trajectory_json(const Trajectory& traj) {
  Json out = Json::array();
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const RigidState& s = traj.states[i];
    out.push_back({{"t", traj.time(i)},
                   {"T", vec(s.translation)},
                   {"q", Json::array({s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z()})},
                   {"P", vec(s.linear_momentum)},
                   {"L", vec(s.angular_momentum)}});
  }
  return out;
}

std::string sweep_csv(const std::vector<BatteryResult>& sweep) {
  std::ostringstream os;
  os.precision(17);
  os << "phi_max,success_rate,successes,trials\n";
  for (const auto& b : sweep) os << b.phi_max << ',' << b.rate() << ',' << b.successes << ',' << b.trials << '\n';
  return os.str();
}

}  // namespace upright
