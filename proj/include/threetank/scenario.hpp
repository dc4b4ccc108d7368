#pragma once

#include "threetank/akf.hpp"
#include "threetank/linmodel.hpp"
#include "threetank/plant.hpp"
#include "threetank/reference.hpp"
#include "threetank/tracking.hpp"
#include "threetank/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace threetank::harness {

enum class Mode { OpenLoop, LinearTracking, NonlinearDecoupling, AkfEstimation };

// How the decoupling law is realized on the plant: evaluated at every
// integrator stage, or computed once per control period and held.
enum class Realization { Continuous, Sampled };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct MetricsOptions {
  double burn_in = 200.0;      // [s] estimation RMSE ignores t < burn_in
  double settle_band = 1e-3;   // [m]
};

struct ScenarioConfig {
  Mode mode = Mode::LinearTracking;
  plant::PlantParams plant;
  Vec3 y0 = Vec3(0.40, 0.20, 0.30);
  std::optional<Vec2> u0;               // derived equilibrium input when absent
  std::optional<Vec3> initial_levels;   // y0 when absent
  double t_s = 1.0;
  double duration = 1000.0;
  double max_substep = 0.1;

  ReferenceProgram reference;

  Vec3 measurement_sigma = Vec3::Zero();  // [m]
  Vec3 process_sigma = Vec3::Zero();      // [m per period], added to the true levels
  std::uint64_t seed = 1;

  // linear tracking
  tracking::Spectrum poles{0.92, 0.97, 0.90, 0.95, 0.94};
  std::optional<Mat25> gain;  // fixed K, bypasses pole placement
  bool anti_windup = true;

  // decoupling
  Vec2 outer_gains = Vec2(0.02, 0.02);
  Realization realization = Realization::Continuous;

  // estimation
  akf::AkfConfig akf;
  Vec3 akf_x0 = Vec3(0.9, 0.55, 0.5);  // absolute levels [m]

  // open loop; defaults to the operating-point input
  std::optional<Vec2> open_loop_input;

  MetricsOptions metrics;

  // Throws ConfigError on invalid values.
  void validate() const;
  linmodel::OperatingPoint operating_point() const;
  std::size_t sample_count() const;
};

struct SimRecord {
  double t = 0.0;
  Vec3 h = Vec3::Zero();  // true levels
  Vec3 y = Vec3::Zero();  // measured levels
  std::optional<Vec2> y_r;
  Vec2 u = Vec2::Zero();  // applied (clamped) pump flows
  std::optional<Vec2> zeta;
  std::optional<Vec3> x_hat;
  std::optional<Vec2> z;
  std::array<bool, 2> sat{false, false};
};

struct SettlingEvent {
  int channel = 0;        // 0 or 1
  double t_event = 0.0;   // start of the constant-reference segment
  double t_end = 0.0;     // last sample of the segment
  double step = 0.0;      // reference change on this channel at t_event
  std::optional<double> settling_time;  // [s] after t_event; empty if never settled
  double final_error = 0.0;             // |y_r - h| at the last sample of the segment
};

struct MetricsReport {
  std::size_t samples = 0;
  std::array<std::optional<double>, 2> tracking_rmse;
  std::array<std::optional<double>, 3> estimation_rmse;
  std::vector<SettlingEvent> settling;
  std::size_t saturated_samples = 0;
};

struct StepDiagnostics {
  double q_hat_min_eig = 0.0;
  double q_hat_max_eig = 0.0;
  double p_min_eig = 0.0;
};

struct ScenarioResult {
  std::vector<SimRecord> records;
  MetricsReport metrics;
  std::vector<StepDiagnostics> diagnostics;  // estimation mode only
  std::optional<tracking::TrackingGain> gain;
  tracking::Spectrum closed_loop_poles;
};

// Runs one scenario. Deterministic for a given configuration.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Summary statistics over the records:
//   tracking_rmse[i]   = sqrt(mean((y_r,i - h_i)^2)) over all samples with a reference;
//   estimation_rmse[j] = sqrt(mean((x_hat_j - h_j)^2)) over samples with t >= burn_in;
//   settling           = one entry per channel per constant-reference segment, where a
//                        segment starts whenever either reference changes.
MetricsReport compute_metrics(const std::vector<SimRecord>& records, const MetricsOptions& opts);

// CSV with header
// t,h1,h2,h3,y1,y2,y3,yr1,yr2,u1,u2,zeta1,zeta2,xhat1,xhat2,xhat3,z1,z2,sat1,sat2
// Values use the shortest round-trip decimal form; absent values are empty.
extern const char* const kCsvHeader;
void write_csv(std::ostream& out, const std::vector<SimRecord>& records);
std::vector<SimRecord> read_csv(std::istream& in);

std::string metrics_to_json(const MetricsReport& report);

}  // namespace threetank::harness
