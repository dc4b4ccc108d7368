#include "threetank/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace threetank::harness {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(what + " must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = number(j[static_cast<std::size_t>(i)], what);
  return v;
}

// A scalar s means s * ones.
Vec3 vec3_or_scalar(const json& j, const std::string& what) {
  if (j.is_number()) return Vec3::Constant(j.get<double>());
  return vector_of<3>(j, what);
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != R) {
    throw ConfigError(what + " must be a " + std::to_string(R) + "x" + std::to_string(C) + " array");
  }
  Eigen::Matrix<double, R, C> m;
  for (int r = 0; r < R; ++r) {
    const auto row = vector_of<C>(j[static_cast<std::size_t>(r)], what);
    m.row(r) = row.transpose();
  }
  return m;
}

// A scalar s means s * I.
Mat3 mat3_or_scalar(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>() * Mat3::Identity();
  return matrix_of<3, 3>(j, what);
}

std::complex<double> pole_of(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], "pole"), number(j[1], "pole")};
  throw ConfigError("pole must be a number or a [re, im] pair");
}

std::vector<Segment> segments_of(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of [t_start, level] pairs");
  std::vector<Segment> out;
  for (const auto& item : j) {
    const auto pair = vector_of<2>(item, what);
    out.push_back({pair[0], pair[1]});
  }
  return out;
}

void parse_plant(const json& j, plant::PlantParams& p) {
  reject_unknown(j, {"tank_area", "pipe_area", "mu13", "mu32", "mu20", "gravity", "q_max", "h_max"}, "plant");
  if (j.contains("tank_area")) p.tank_area = number(j["tank_area"], "plant.tank_area");
  if (j.contains("pipe_area")) p.pipe_area = number(j["pipe_area"], "plant.pipe_area");
  if (j.contains("mu13")) p.mu13 = number(j["mu13"], "plant.mu13");
  if (j.contains("mu32")) p.mu32 = number(j["mu32"], "plant.mu32");
  if (j.contains("mu20")) p.mu20 = number(j["mu20"], "plant.mu20");
  if (j.contains("gravity")) p.gravity = number(j["gravity"], "plant.gravity");
  if (j.contains("q_max")) p.q_max = number(j["q_max"], "plant.q_max");
  if (j.contains("h_max")) p.h_max = number(j["h_max"], "plant.h_max");
}

void parse_akf(const json& j, ScenarioConfig& cfg) {
  reject_unknown(j, {"window", "x0", "P0", "Q0", "R", "q_bounds", "r_bounds", "adapt", "estimator"}, "akf");
  auto& a = cfg.akf;
  if (j.contains("window")) {
    if (!j["window"].is_number_integer()) throw ConfigError("akf.window must be an integer");
    a.window = j["window"].get<int>();
  }
  if (j.contains("x0")) cfg.akf_x0 = vector_of<3>(j["x0"], "akf.x0");
  if (j.contains("P0")) a.P0 = mat3_or_scalar(j["P0"], "akf.P0");
  if (j.contains("Q0")) a.Q0 = mat3_or_scalar(j["Q0"], "akf.Q0");
  if (j.contains("R")) a.R = mat3_or_scalar(j["R"], "akf.R");
  if (j.contains("q_bounds")) {
    const auto b = vector_of<2>(j["q_bounds"], "akf.q_bounds");
    a.q_min = b[0];
    a.q_max = b[1];
  }
  if (j.contains("r_bounds")) {
    const auto b = vector_of<2>(j["r_bounds"], "akf.r_bounds");
    a.r_min = b[0];
    a.r_max = b[1];
  }
  if (j.contains("adapt")) {
    if (!j["adapt"].is_boolean()) throw ConfigError("akf.adapt must be a boolean");
    a.adapt = j["adapt"].get<bool>();
  }
  if (j.contains("estimator")) {
    const auto name = j["estimator"].is_string() ? j["estimator"].get<std::string>() : "";
    if (name == "state-correction") a.estimator = akf::QEstimator::StateCorrection;
    else if (name == "residual-projection") a.estimator = akf::QEstimator::ResidualProjection;
    else throw ConfigError("akf.estimator must be 'state-correction' or 'residual-projection'");
  }
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root,
                 {"mode", "duration", "t_s", "max_substep", "seed", "plant", "operating_point",
                  "initial_levels", "reference", "noise", "tracking", "decoupling", "akf",
                  "open_loop", "metrics"},
                 "config");

  ScenarioConfig cfg;
  if (!root.contains("mode") || !root["mode"].is_string()) throw ConfigError("config.mode is required");
  cfg.mode = parse_mode(root["mode"].get<std::string>());
  if (root.contains("duration")) cfg.duration = number(root["duration"], "duration");
  if (root.contains("t_s")) cfg.t_s = number(root["t_s"], "t_s");
  if (root.contains("max_substep")) cfg.max_substep = number(root["max_substep"], "max_substep");
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("plant")) parse_plant(root["plant"], cfg.plant);
  if (root.contains("operating_point")) {
    const auto& op = root["operating_point"];
    reject_unknown(op, {"y0", "u0"}, "operating_point");
    if (op.contains("y0")) cfg.y0 = vector_of<3>(op["y0"], "operating_point.y0");
    if (op.contains("u0")) cfg.u0 = vector_of<2>(op["u0"], "operating_point.u0");
  }
  if (root.contains("initial_levels")) cfg.initial_levels = vector_of<3>(root["initial_levels"], "initial_levels");

  const Vec3 y0 = cfg.y0;
  cfg.reference.channels[0] = {{0.0, y0[0]}};
  cfg.reference.channels[1] = {{0.0, y0[1]}};
  if (root.contains("reference")) {
    const auto& ref = root["reference"];
    reject_unknown(ref, {"y1", "y2"}, "reference");
    if (ref.contains("y1")) cfg.reference.channels[0] = segments_of(ref["y1"], "reference.y1");
    if (ref.contains("y2")) cfg.reference.channels[1] = segments_of(ref["y2"], "reference.y2");
  }
  if (root.contains("noise")) {
    const auto& n = root["noise"];
    reject_unknown(n, {"measurement_sigma", "process_sigma"}, "noise");
    if (n.contains("measurement_sigma")) cfg.measurement_sigma = vec3_or_scalar(n["measurement_sigma"], "noise.measurement_sigma");
    if (n.contains("process_sigma")) cfg.process_sigma = vec3_or_scalar(n["process_sigma"], "noise.process_sigma");
  }
  if (root.contains("tracking")) {
    const auto& t = root["tracking"];
    reject_unknown(t, {"poles", "gain", "anti_windup"}, "tracking");
    if (t.contains("poles")) {
      if (!t["poles"].is_array()) throw ConfigError("tracking.poles must be an array");
      cfg.poles.clear();
      for (const auto& p : t["poles"]) cfg.poles.push_back(pole_of(p));
    }
    if (t.contains("gain")) cfg.gain = matrix_of<2, 5>(t["gain"], "tracking.gain");
    if (t.contains("anti_windup")) {
      if (!t["anti_windup"].is_boolean()) throw ConfigError("tracking.anti_windup must be a boolean");
      cfg.anti_windup = t["anti_windup"].get<bool>();
    }
  }
  if (root.contains("decoupling")) {
    const auto& d = root["decoupling"];
    reject_unknown(d, {"outer_gains", "realization"}, "decoupling");
    if (d.contains("outer_gains")) cfg.outer_gains = vector_of<2>(d["outer_gains"], "decoupling.outer_gains");
    if (d.contains("realization")) {
      const auto name = d["realization"].is_string() ? d["realization"].get<std::string>() : "";
      if (name == "continuous") cfg.realization = Realization::Continuous;
      else if (name == "sampled") cfg.realization = Realization::Sampled;
      else throw ConfigError("decoupling.realization must be 'continuous' or 'sampled'");
    }
  }
  if (root.contains("akf")) parse_akf(root["akf"], cfg);
  if (root.contains("open_loop")) {
    const auto& o = root["open_loop"];
    reject_unknown(o, {"input"}, "open_loop");
    if (o.contains("input")) cfg.open_loop_input = vector_of<2>(o["input"], "open_loop.input");
  }
  if (root.contains("metrics")) {
    const auto& m = root["metrics"];
    reject_unknown(m, {"burn_in", "settle_band"}, "metrics");
    if (m.contains("burn_in")) cfg.metrics.burn_in = number(m["burn_in"], "metrics.burn_in");
    if (m.contains("settle_band")) cfg.metrics.settle_band = number(m["settle_band"], "metrics.settle_band");
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace threetank::harness
