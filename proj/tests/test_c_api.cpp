#include "threetank/threetank.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

namespace {

using nlohmann::json;

struct ScenarioDeleter {
  void operator()(tt_scenario* s) const { tt_scenario_free(s); }
};
struct ResultDeleter {
  void operator()(tt_result* r) const { tt_result_free(r); }
};
using Scenario = std::unique_ptr<tt_scenario, ScenarioDeleter>;
using Result = std::unique_ptr<tt_result, ResultDeleter>;

Scenario scenario_from(const char* text) {
  tt_scenario* raw = nullptr;
  EXPECT_EQ(tt_scenario_from_json(text, &raw), TT_OK) << tt_last_error();
  return Scenario(raw);
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  tt_string_free(s);
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("threetank_c_api_" + name);
}

TEST(CApi, Version) { EXPECT_STREQ(tt_version(), "0.1.0"); }

TEST(CApi, PlantDerivatives) {
  tt_plant_params p;
  tt_plant_params_default(&p);
  EXPECT_EQ(p.tank_area, 0.0154);
  const double h[3] = {0.4, 0.2, 0.3};
  const double q[2] = {0.0, 0.0};
  double d[3];
  ASSERT_EQ(tt_plant_derivatives(&p, h, q, d), TT_OK);
  EXPECT_NEAR(d[0], -2.273886531804303e-03, 1e-17);
}

TEST(CApi, PlantAdvance) {
  tt_plant_params p;
  tt_plant_params_default(&p);
  const double h[3] = {0.61, 0.2, 0.3};
  const double q[2] = {1.0, 0.0};
  double out[3];
  int sat[2] = {0, 0};
  ASSERT_EQ(tt_plant_advance(&p, h, q, 10.0, 0.1, out, sat), TT_OK);
  EXPECT_EQ(sat[0], 1);
  EXPECT_EQ(sat[1], 0);
  EXPECT_LE(out[0], p.h_max);
}

TEST(CApi, ArgumentErrors) {
  EXPECT_EQ(tt_plant_derivatives(nullptr, nullptr, nullptr, nullptr), TT_ERROR_ARGUMENT);
  EXPECT_STRNE(tt_last_error(), "");
  EXPECT_EQ(tt_scenario_from_json(nullptr, nullptr), TT_ERROR_ARGUMENT);
  EXPECT_EQ(tt_scenario_run(nullptr, nullptr), TT_ERROR_ARGUMENT);
  EXPECT_EQ(tt_result_rows(nullptr), 0u);
  tt_scenario_free(nullptr);
  tt_result_free(nullptr);
  tt_string_free(nullptr);
}

TEST(CApi, PlantParameterErrors) {
  tt_plant_params p;
  tt_plant_params_default(&p);
  p.mu20 = 2.0;
  const double h[3] = {0.4, 0.2, 0.3};
  const double q[2] = {0.0, 0.0};
  double d[3];
  EXPECT_EQ(tt_plant_derivatives(&p, h, q, d), TT_ERROR_CONFIG);
}

TEST(CApi, ConfigErrorsCarryMessages) {
  tt_scenario* raw = nullptr;
  EXPECT_EQ(tt_scenario_from_json(R"({"mode": "open-loop", "bogus": 1})", &raw), TT_ERROR_CONFIG);
  EXPECT_EQ(raw, nullptr);
  EXPECT_NE(std::string(tt_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(tt_scenario_from_file("/nonexistent.json", &raw), TT_ERROR_CONFIG);
}

TEST(CApi, NumericalErrorStatus) {
  auto s = scenario_from(R"({"mode": "linear-tracking", "tracking": {"poles": [0.9, 0.9, 0.9, 0.9, 0.9]}})");
  tt_result* raw = nullptr;
  EXPECT_EQ(tt_scenario_run(s.get(), &raw), TT_ERROR_NUMERIC);
  EXPECT_EQ(raw, nullptr);
}

TEST(CApi, LinearizeJson) {
  tt_scenario* raw = nullptr;
  ASSERT_EQ(tt_scenario_default(&raw), TT_OK);
  Scenario s(raw);
  char* out = nullptr;
  ASSERT_EQ(tt_linearize_json(s.get(), &out), TT_OK);
  const json j = json::parse(take(out));
  EXPECT_NEAR(j["F"][0][0].get<double>(), -0.01136943, 5e-9);
  EXPECT_NEAR(j["A_d"][0][0].get<double>(), 0.988758616, 1e-8);
  EXPECT_NEAR(j["B_d"][2][1].get<double>(), 0.363659, 1e-5);
  EXPECT_EQ(j["t_s"].get<double>(), 1.0);
}

TEST(CApi, OperatingPointAndSampleTime) {
  tt_scenario* raw = nullptr;
  ASSERT_EQ(tt_scenario_default(&raw), TT_OK);
  Scenario s(raw);
  const double bad_y0[3] = {0.2, 0.4, 0.3};
  EXPECT_EQ(tt_scenario_set_operating_point(s.get(), bad_y0, nullptr), TT_ERROR_CONFIG);
  EXPECT_EQ(tt_scenario_set_sample_time(s.get(), -1.0), TT_ERROR_CONFIG);
  const double y0[3] = {0.5, 0.1, 0.3};
  ASSERT_EQ(tt_scenario_set_operating_point(s.get(), y0, nullptr), TT_OK);
  ASSERT_EQ(tt_scenario_set_sample_time(s.get(), 2.0), TT_OK);
  char* out = nullptr;
  ASSERT_EQ(tt_linearize_json(s.get(), &out), TT_OK);
  const json j = json::parse(take(out));
  EXPECT_EQ(j["t_s"].get<double>(), 2.0);
  EXPECT_EQ(j["y0"][0].get<double>(), 0.5);
  EXPECT_GT(j["u0"][0].get<double>(), 0.0);
}

TEST(CApi, DesignPlacesRequestedPoles) {
  tt_scenario* raw = nullptr;
  ASSERT_EQ(tt_scenario_default(&raw), TT_OK);
  Scenario s(raw);
  const double re[5] = {0.9, 0.93, 0.93, 0.95, 0.96};
  const double im[5] = {0.0, 0.01, -0.01, 0.0, 0.0};
  ASSERT_EQ(tt_scenario_set_poles(s.get(), re, im, 5), TT_OK);
  char* out = nullptr;
  ASSERT_EQ(tt_design_json(s.get(), &out), TT_OK);
  const json j = json::parse(take(out));
  EXPECT_LT(j["max_pole_error"].get<double>(), 1e-8);
  EXPECT_TRUE(j["stable"].get<bool>());
  EXPECT_EQ(j["K"].size(), 2u);
  EXPECT_EQ(j["K"][0].size(), 5u);
  EXPECT_EQ(tt_scenario_set_poles(s.get(), re, im, 3), TT_ERROR_CONFIG);
}

TEST(CApi, DesignAnalysesFixedGain) {
  tt_scenario* raw = nullptr;
  ASSERT_EQ(tt_scenario_default(&raw), TT_OK);
  Scenario s(raw);
  const double k[10] = {21.6e-4, 3e-4, -5e-4, -0.95e-4, -0.32e-4, 2.9e-4, 19e-4, -4e-4, -0.30e-4, -0.91e-4};
  ASSERT_EQ(tt_scenario_set_gain(s.get(), k), TT_OK);
  char* out = nullptr;
  ASSERT_EQ(tt_design_json(s.get(), &out), TT_OK);
  const json j = json::parse(take(out));
  EXPECT_TRUE(j["stable"].get<bool>());
  EXPECT_NEAR(j["spectral_radius"].get<double>(), 0.97113, 1e-4);
  EXPECT_EQ(j["K"][1][1].get<double>(), 19e-4);
}

TEST(CApi, RunRowsCsvAndMetrics) {
  auto s = scenario_from(R"({"mode": "linear-tracking", "duration": 30,
                             "reference": {"y1": [[0, 0.4], [10, 0.41]], "y2": [[0, 0.2]]}})");
  tt_result* raw = nullptr;
  ASSERT_EQ(tt_scenario_run(s.get(), &raw), TT_OK) << tt_last_error();
  Result r(raw);
  ASSERT_EQ(tt_result_rows(r.get()), 30u);
  double row[TT_ROW_WIDTH];
  ASSERT_EQ(tt_result_row(r.get(), 10, row), TT_OK);
  EXPECT_EQ(row[0], 10.0);
  EXPECT_EQ(row[7], 0.41);
  EXPECT_TRUE(std::isnan(row[11]));  // zeta absent in linear tracking
  EXPECT_TRUE(std::isnan(row[13]));  // no estimate either
  EXPECT_FALSE(std::isnan(row[16]));
  EXPECT_EQ(tt_result_row(r.get(), 30, row), TT_ERROR_ARGUMENT);

  char* csv = nullptr;
  ASSERT_EQ(tt_result_csv(r.get(), &csv), TT_OK);
  const std::string text = take(csv);
  EXPECT_EQ(text.rfind("t,h1,h2,h3,y1,y2,y3,yr1,yr2,u1,u2,zeta1,zeta2,xhat1,xhat2,xhat3,z1,z2,sat1,sat2\n", 0), 0u);

  const auto path = temp_path("run.csv");
  ASSERT_EQ(tt_result_write_csv(r.get(), path.c_str()), TT_OK);
  std::ifstream in(path);
  const std::string on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(on_disk, text);

  char* report = nullptr;
  ASSERT_EQ(tt_result_metrics_json(r.get(), &report), TT_OK);
  const json direct = json::parse(take(report));
  char* from_csv = nullptr;
  ASSERT_EQ(tt_metrics_from_csv(path.c_str(), 200.0, 1e-3, &from_csv), TT_OK);
  const json recomputed = json::parse(take(from_csv));
  EXPECT_EQ(direct["samples"], recomputed["samples"]);
  EXPECT_EQ(direct["tracking_rmse"], recomputed["tracking_rmse"]);
  std::filesystem::remove(path);
}

TEST(CApi, MetricsFromBadCsv) {
  const auto path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "not,a,log\n";
  }
  char* out = nullptr;
  EXPECT_EQ(tt_metrics_from_csv(path.c_str(), 200.0, 1e-3, &out), TT_ERROR_CONFIG);
  EXPECT_EQ(tt_metrics_from_csv("/nonexistent.csv", 200.0, 1e-3, &out), TT_ERROR_CONFIG);
  std::filesystem::remove(path);
}

}  // namespace
