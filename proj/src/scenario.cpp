#include "threetank/scenario.hpp"

#include "threetank/decoupling.hpp"
#include "threetank/noise.hpp"

#include <algorithm>
#include <cmath>

namespace threetank::harness {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::OpenLoop: return "open-loop";
    case Mode::LinearTracking: return "linear-tracking";
    case Mode::NonlinearDecoupling: return "nonlinear-decoupling";
    case Mode::AkfEstimation: return "akf-estimation";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  if (text == "open-loop") return Mode::OpenLoop;
  if (text == "linear-tracking") return Mode::LinearTracking;
  if (text == "nonlinear-decoupling") return Mode::NonlinearDecoupling;
  if (text == "akf-estimation") return Mode::AkfEstimation;
  throw ConfigError("unknown mode '" + text +
                    "' (expected open-loop, linear-tracking, nonlinear-decoupling or akf-estimation)");
}

void ScenarioConfig::validate() const {
  plant.validate();
  if (!std::isfinite(duration) || !(duration > 0.0)) throw ConfigError("duration must be > 0");
  if (!std::isfinite(t_s) || !(t_s > 0.0)) throw ConfigError("t_s must be > 0");
  if (!std::isfinite(max_substep) || !(max_substep > 0.0)) throw ConfigError("max_substep must be > 0");
  if (duration / t_s > 1e8) throw ConfigError("duration / t_s is too large");
  if (!measurement_sigma.allFinite() || (measurement_sigma.array() < 0.0).any()) {
    throw ConfigError("measurement sigma must be finite and >= 0");
  }
  if (!process_sigma.allFinite() || (process_sigma.array() < 0.0).any()) {
    throw ConfigError("process sigma must be finite and >= 0");
  }
  if (!y0.allFinite()) throw ConfigError("operating point y0 must be finite");
  if (u0 && !u0->allFinite()) throw ConfigError("operating point u0 must be finite");
  if (initial_levels) {
    if (!initial_levels->allFinite() || (initial_levels->array() < 0.0).any() ||
        (initial_levels->array() > plant.h_max).any()) {
      throw ConfigError("initial levels must lie in [0, h_max]");
    }
  }
  reference.validate(plant.h_max);
  if (!(metrics.settle_band > 0.0) || !(metrics.burn_in >= 0.0)) {
    throw ConfigError("metrics.settle_band must be > 0 and metrics.burn_in >= 0");
  }
  const bool needs_model = mode == Mode::LinearTracking || mode == Mode::AkfEstimation;
  if (needs_model && !linmodel::admits_ordering(y0)) {
    throw ConfigError("operating point y0 must satisfy h1 > h3 > h2 > 0 for linearization");
  }
  if (needs_model && gain && !gain->allFinite()) throw ConfigError("tracking.gain must be finite");
  if (needs_model && !gain && poles.size() != 5) {
    throw ConfigError("tracking.poles must list 5 poles, got " + std::to_string(poles.size()));
  }
  if (mode == Mode::NonlinearDecoupling &&
      (!(outer_gains[0] > 0.0) || !(outer_gains[1] > 0.0) || !outer_gains.allFinite())) {
    throw ConfigError("decoupling.outer_gains must be > 0");
  }
  if (mode == Mode::AkfEstimation) {
    akf.validate();
    if (!akf_x0.allFinite()) throw ConfigError("akf.x0 must be finite");
  }
  if (open_loop_input && !open_loop_input->allFinite()) throw ConfigError("open_loop.input must be finite");
}

linmodel::OperatingPoint ScenarioConfig::operating_point() const {
  linmodel::OperatingPoint op;
  op.y0 = y0;
  op.u0 = u0 ? *u0 : plant::equilibrium_input(y0, plant).q;
  return op;
}

std::size_t ScenarioConfig::sample_count() const {
  const auto n = std::llround(duration / t_s);
  return static_cast<std::size_t>(std::max(1LL, n));
}

namespace {

Vec2 head2(const Vec3& v) { return v.head<2>(); }

Vec2 reference_at(const ScenarioConfig& cfg, double t) {
  return Vec2(generate_reference(cfg.reference, 0, t), generate_reference(cfg.reference, 1, t));
}

StepDiagnostics diagnose(const akf::AkfState& st) {
  Eigen::SelfAdjointEigenSolver<Mat3> q(st.Q_hat, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Mat3> p(st.P, Eigen::EigenvaluesOnly);
  return StepDiagnostics{q.eigenvalues().minCoeff(), q.eigenvalues().maxCoeff(),
                         p.eigenvalues().minCoeff()};
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto& params = cfg.plant;
  const auto op = cfg.operating_point();
  const std::size_t n = cfg.sample_count();
  const bool estimating = cfg.mode == Mode::AkfEstimation;
  const bool linear_control = cfg.mode == Mode::LinearTracking || estimating;

  ScenarioResult result;
  result.records.reserve(n);

  std::optional<linmodel::DiscreteModel> model;
  std::optional<tracking::TrackingGain> gain;
  if (linear_control) {
    model = linmodel::discretize(linmodel::jacobian_at(params, op.y0), cfg.t_s);
    const auto am = tracking::augment(*model);
    gain = cfg.gain ? tracking::TrackingGain{*cfg.gain} : tracking::place_poles(am, cfg.poles);
    result.gain = gain;
    result.closed_loop_poles = tracking::eigenvalues(tracking::closed_loop_matrix(am, *gain));
  }
  std::optional<decoupling::DecouplingLaw> law;
  if (cfg.mode == Mode::NonlinearDecoupling) {
    law = decoupling::make_decoupling_law(params, cfg.outer_gains, op.y0);
  }

  GaussianSource rng(cfg.seed);
  plant::PlantState state{cfg.initial_levels.value_or(op.y0)};
  tracking::TrackingState integrator;
  akf::AkfState filter;
  Vec2 last_u_dev = Vec2::Zero();
  const bool process_noise = (cfg.process_sigma.array() > 0.0).any();

  for (std::size_t k = 0; k < n; ++k) {
    SimRecord rec;
    rec.t = static_cast<double>(k) * cfg.t_s;
    rec.h = state.h;
    rec.y = add_measurement_noise(state.h, cfg.measurement_sigma, rng);
    plant::Saturation sat;

    switch (cfg.mode) {
      case Mode::OpenLoop: {
        const plant::PumpInput input{cfg.open_loop_input.value_or(op.u0)};
        const auto applied = plant::clamp_input(input, params, &sat);
        rec.u = applied.q;
        state = plant::advance(state, applied, cfg.t_s, params, cfg.max_substep, &sat);
        break;
      }
      case Mode::LinearTracking:
      case Mode::AkfEstimation: {
        const Vec2 y_r = reference_at(cfg, rec.t);
        rec.y_r = y_r;
        const auto dev = linmodel::to_deviation(rec.y, Vec2::Zero(), op);
        const Vec2 u_dev = tracking::control(*gain, dev.y, integrator);
        const auto applied = plant::clamp_input(
            plant::PumpInput{linmodel::from_deviation(dev.y, u_dev, op).U}, params, &sat);
        rec.u = applied.q;
        rec.z = integrator.z;
        const std::array<bool, 2> freeze = cfg.anti_windup ? sat.input : std::array<bool, 2>{false, false};
        integrator = tracking::integrator_step(integrator, y_r, head2(rec.y), cfg.t_s, freeze);

        if (estimating) {
          if (k == 0) {
            filter = akf::update(akf::initial_state(cfg.akf_x0 - op.y0, cfg.akf), dev.y, model->C,
                                 cfg.akf.R);
          } else {
            filter = akf::akf_step(filter, *model, last_u_dev, dev.y, cfg.akf);
          }
          rec.x_hat = filter.x_hat + op.y0;
          result.diagnostics.push_back(diagnose(filter));
          last_u_dev = applied.q - op.u0;
        }
        state = plant::advance(state, applied, cfg.t_s, params, cfg.max_substep, &sat);
        break;
      }
      case Mode::NonlinearDecoupling: {
        const Vec2 y_r = reference_at(cfg, rec.t);
        rec.y_r = y_r;
        const auto& lw = *law;
        const Vec2 zeta = decoupling::outer_loop(lw, y_r, head2(rec.y));
        const auto cmd = decoupling::linearizing_feedback(lw, rec.y, zeta);
        rec.zeta = zeta;
        const auto applied = plant::clamp_input(plant::PumpInput{cmd.u_raw}, params, &sat);
        rec.u = applied.q;
        if (cfg.realization == Realization::Sampled) {
          state = plant::advance(state, applied, cfg.t_s, params, cfg.max_substep, &sat);
        } else {
          // measurement noise of this period is held while the law runs continuously
          const Vec3 noise = rec.y - state.h;
          const plant::FeedbackPolicy policy = [&lw, noise, y_r](const plant::PlantState& s) {
            const Vec3 measured = s.h + noise;
            const Vec2 z = decoupling::outer_loop(lw, y_r, head2(measured));
            return plant::PumpInput{decoupling::linearizing_feedback(lw, measured, z).u_raw};
          };
          state = plant::advance(state, policy, cfg.t_s, params, cfg.max_substep, &sat);
        }
        break;
      }
    }

    if (process_noise) {
      for (int i = 0; i < 3; ++i) {
        const double w = cfg.process_sigma[i] * rng.standard_normal();
        state.h[i] = std::clamp(state.h[i] + w, 0.0, params.h_max);
      }
    }
    if (!state.h.allFinite()) throw NumericalError("plant state became non-finite");
    rec.sat = sat.input;
    result.records.push_back(std::move(rec));
  }

  result.metrics = compute_metrics(result.records, cfg.metrics);
  return result;
}

}  // namespace threetank::harness
