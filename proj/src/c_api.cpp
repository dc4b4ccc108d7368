#include "threetank/threetank.h"

#include "threetank/config.hpp"
#include "threetank/linmodel.hpp"
#include "threetank/plant.hpp"
#include "threetank/scenario.hpp"
#include "threetank/tracking.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>
#include <string>

struct tt_scenario {
  threetank::harness::ScenarioConfig config;
};

struct tt_result {
  threetank::harness::ScenarioResult result;
};

namespace {

using namespace threetank;
using nlohmann::json;

thread_local std::string g_last_error;

tt_status fail(tt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
tt_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const ConfigError& e) {
    return fail(TT_ERROR_CONFIG, e.what());
  } catch (const NumericalError& e) {
    return fail(TT_ERROR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(TT_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TT_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(TT_ERROR_INTERNAL, "unknown error");
  }
}

char* duplicate(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

plant::PlantParams to_params(const tt_plant_params* p) {
  plant::PlantParams out;
  if (p != nullptr) {
    out.tank_area = p->tank_area;
    out.pipe_area = p->pipe_area;
    out.mu13 = p->mu13;
    out.mu32 = p->mu32;
    out.mu20 = p->mu20;
    out.gravity = p->gravity;
    out.q_max = p->q_max;
    out.h_max = p->h_max;
  }
  out.validate();
  return out;
}

template <typename M>
json matrix_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <typename V>
json vector_json(const V& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json spectrum_json(const tracking::Spectrum& s) {
  json out = json::array();
  for (const auto& p : s) out.push_back(json::array({p.real(), p.imag()}));
  return out;
}

}  // namespace

extern "C" {

const char* tt_version(void) { return "0.1.0"; }

const char* tt_last_error(void) { return g_last_error.c_str(); }

void tt_string_free(char* s) { std::free(s); }

void tt_plant_params_default(tt_plant_params* out) {
  if (out == nullptr) return;
  const plant::PlantParams p;
  *out = tt_plant_params{p.tank_area, p.pipe_area, p.mu13, p.mu32, p.mu20, p.gravity, p.q_max, p.h_max};
}

tt_status tt_plant_derivatives(const tt_plant_params* params, const double h[3], const double q[2],
                               double dhdt[3]) {
  if (h == nullptr || q == nullptr || dhdt == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    const auto p = to_params(params);
    const auto u = plant::clamp_input(plant::PumpInput{Vec2(q[0], q[1])}, p);
    const Vec3 d = plant::derivatives(plant::PlantState{Vec3(h[0], h[1], h[2])}, u, p);
    for (int i = 0; i < 3; ++i) dhdt[i] = d[i];
    return TT_OK;
  });
}

tt_status tt_plant_advance(const tt_plant_params* params, const double h[3], const double q[2],
                           double duration, double max_dt, double h_out[3], int sat_out[2]) {
  if (h == nullptr || q == nullptr || h_out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    const auto p = to_params(params);
    plant::Saturation sat;
    const auto next = plant::advance(plant::PlantState{Vec3(h[0], h[1], h[2])},
                                     plant::PumpInput{Vec2(q[0], q[1])}, duration, p, max_dt, &sat);
    for (int i = 0; i < 3; ++i) h_out[i] = next.h[i];
    if (sat_out != nullptr) {
      sat_out[0] = sat.input[0] ? 1 : 0;
      sat_out[1] = sat.input[1] ? 1 : 0;
    }
    return TT_OK;
  });
}

tt_status tt_scenario_default(tt_scenario** out) {
  if (out == nullptr) return fail(TT_ERROR_ARGUMENT, "null output pointer");
  return guarded([&] {
    *out = new tt_scenario{harness::parse_config(R"({"mode": "linear-tracking"})")};
    return TT_OK;
  });
}

tt_status tt_scenario_from_json(const char* text, tt_scenario** out) {
  if (text == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    *out = new tt_scenario{harness::parse_config(text)};
    return TT_OK;
  });
}

tt_status tt_scenario_from_file(const char* path, tt_scenario** out) {
  if (path == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    *out = new tt_scenario{harness::load_config(path)};
    return TT_OK;
  });
}

void tt_scenario_free(tt_scenario* scenario) { delete scenario; }

tt_status tt_scenario_set_operating_point(tt_scenario* scenario, const double y0[3], const double u0[2]) {
  if (scenario == nullptr || y0 == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    auto cfg = scenario->config;
    cfg.y0 = Vec3(y0[0], y0[1], y0[2]);
    if (u0 != nullptr) cfg.u0 = Vec2(u0[0], u0[1]);
    else cfg.u0.reset();
    cfg.validate();
    scenario->config = cfg;
    return TT_OK;
  });
}

tt_status tt_scenario_set_sample_time(tt_scenario* scenario, double t_s) {
  if (scenario == nullptr) return fail(TT_ERROR_ARGUMENT, "null scenario");
  return guarded([&] {
    auto cfg = scenario->config;
    cfg.t_s = t_s;
    cfg.validate();
    scenario->config = cfg;
    return TT_OK;
  });
}

tt_status tt_scenario_set_poles(tt_scenario* scenario, const double* real, const double* imag, size_t count) {
  if (scenario == nullptr || (real == nullptr && count > 0)) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    tracking::Spectrum poles;
    for (size_t i = 0; i < count; ++i) poles.emplace_back(real[i], imag != nullptr ? imag[i] : 0.0);
    harness::ScenarioConfig next = scenario->config;
    next.poles = poles;
    next.gain.reset();
    next.validate();
    scenario->config = next;
    return TT_OK;
  });
}

tt_status tt_scenario_set_gain(tt_scenario* scenario, const double gain[10]) {
  if (scenario == nullptr || gain == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    Mat25 k;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 5; ++c) k(r, c) = gain[r * 5 + c];
    if (!k.allFinite()) throw ConfigError("gain must be finite");
    scenario->config.gain = k;
    return TT_OK;
  });
}

tt_status tt_linearize_json(const tt_scenario* scenario, char** out) {
  if (scenario == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    const auto& cfg = scenario->config;
    const auto op = cfg.operating_point();
    const auto cm = linmodel::jacobian_at(cfg.plant, op.y0);
    const auto dm = linmodel::discretize(cm, cfg.t_s);
    json j;
    j["t_s"] = cfg.t_s;
    j["y0"] = vector_json(op.y0);
    j["u0"] = vector_json(op.u0);
    j["F"] = matrix_json(cm.F);
    j["B"] = matrix_json(cm.B);
    j["C"] = matrix_json(cm.C);
    j["A_d"] = matrix_json(dm.A_d);
    j["B_d"] = matrix_json(dm.B_d);
    *out = duplicate(j.dump(2));
    return TT_OK;
  });
}

tt_status tt_design_json(const tt_scenario* scenario, char** out) {
  if (scenario == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    const auto& cfg = scenario->config;
    const auto op = cfg.operating_point();
    const auto dm = linmodel::discretize(linmodel::jacobian_at(cfg.plant, op.y0), cfg.t_s);
    const auto am = tracking::augment(dm);
    const auto gain = cfg.gain ? tracking::TrackingGain{*cfg.gain} : tracking::place_poles(am, cfg.poles);
    const auto achieved = tracking::eigenvalues(tracking::closed_loop_matrix(am, gain));
    double radius = 0.0;
    for (const auto& p : achieved) radius = std::max(radius, std::abs(p));
    json j;
    j["source"] = cfg.gain ? "fixed-gain" : "pole-placement";
    if (!cfg.gain) {
      j["requested_poles"] = spectrum_json(cfg.poles);
      j["max_pole_error"] = tracking::spectrum_distance(achieved, cfg.poles);
      if (!tracking::inside_unit_disk(cfg.poles)) {
        j["warning"] = "requested poles on or outside the unit disk: closed loop is not stable";
      }
    }
    j["K"] = matrix_json(gain.K);
    j["K1"] = matrix_json(gain.K1());
    j["K2"] = matrix_json(gain.K2());
    j["closed_loop_eigenvalues"] = spectrum_json(achieved);
    j["spectral_radius"] = radius;
    j["stable"] = radius < 1.0;
    *out = duplicate(j.dump(2));
    return TT_OK;
  });
}

tt_status tt_scenario_run(const tt_scenario* scenario, tt_result** out) {
  if (scenario == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    *out = new tt_result{harness::run_scenario(scenario->config)};
    return TT_OK;
  });
}

void tt_result_free(tt_result* result) { delete result; }

size_t tt_result_rows(const tt_result* result) {
  return result == nullptr ? 0 : result->result.records.size();
}

tt_status tt_result_row(const tt_result* result, size_t index, double values[TT_ROW_WIDTH]) {
  if (result == nullptr || values == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  if (index >= result->result.records.size()) return fail(TT_ERROR_ARGUMENT, "row index out of range");
  const auto& r = result->result.records[index];
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double* v = values;
  *v++ = r.t;
  for (int i = 0; i < 3; ++i) *v++ = r.h[i];
  for (int i = 0; i < 3; ++i) *v++ = r.y[i];
  for (int i = 0; i < 2; ++i) *v++ = r.y_r ? (*r.y_r)[i] : nan;
  for (int i = 0; i < 2; ++i) *v++ = r.u[i];
  for (int i = 0; i < 2; ++i) *v++ = r.zeta ? (*r.zeta)[i] : nan;
  for (int i = 0; i < 3; ++i) *v++ = r.x_hat ? (*r.x_hat)[i] : nan;
  for (int i = 0; i < 2; ++i) *v++ = r.z ? (*r.z)[i] : nan;
  *v++ = r.sat[0] ? 1.0 : 0.0;
  *v++ = r.sat[1] ? 1.0 : 0.0;
  return TT_OK;
}

tt_status tt_result_csv(const tt_result* result, char** out) {
  if (result == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    std::ostringstream buffer;
    harness::write_csv(buffer, result->result.records);
    *out = duplicate(buffer.str());
    return TT_OK;
  });
}

tt_status tt_result_write_csv(const tt_result* result, const char* path) {
  if (result == nullptr || path == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError(std::string("cannot open '") + path + "' for writing");
    harness::write_csv(file, result->result.records);
    file.flush();
    if (!file) throw ConfigError(std::string("failed writing '") + path + "'");
    return TT_OK;
  });
}

tt_status tt_result_metrics_json(const tt_result* result, char** out) {
  if (result == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    *out = duplicate(harness::metrics_to_json(result->result.metrics));
    return TT_OK;
  });
}

tt_status tt_metrics_from_csv(const char* csv_path, double burn_in, double settle_band, char** out) {
  if (csv_path == nullptr || out == nullptr) return fail(TT_ERROR_ARGUMENT, "null pointer");
  return guarded([&] {
    if (!(settle_band > 0.0) || !(burn_in >= 0.0)) {
      throw ConfigError("settle band must be > 0 and burn-in >= 0");
    }
    std::ifstream file(csv_path, std::ios::binary);
    if (!file) throw ConfigError(std::string("cannot open '") + csv_path + "'");
    const auto records = harness::read_csv(file);
    *out = duplicate(harness::metrics_to_json(
        harness::compute_metrics(records, harness::MetricsOptions{burn_in, settle_band})));
    return TT_OK;
  });
}

}  // extern "C"
