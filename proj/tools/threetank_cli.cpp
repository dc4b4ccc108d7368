// Command-line front end. Talks to the library exclusively through the C API.
#include "threetank/threetank.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

int exit_code(tt_status status) {
  switch (status) {
    case TT_OK: return kExitOk;
    case TT_ERROR_CONFIG:
    case TT_ERROR_ARGUMENT: return kExitConfig;
    case TT_ERROR_NUMERIC:
    case TT_ERROR_INTERNAL: return kExitNumeric;
  }
  return kExitNumeric;
}

struct ScenarioDeleter {
  void operator()(tt_scenario* s) const { tt_scenario_free(s); }
};
struct ResultDeleter {
  void operator()(tt_result* r) const { tt_result_free(r); }
};
struct StringDeleter {
  void operator()(char* s) const { tt_string_free(s); }
};
using ScenarioPtr = std::unique_ptr<tt_scenario, ScenarioDeleter>;
using ResultPtr = std::unique_ptr<tt_result, ResultDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

// Thrown to unwind with a status; the message is already in tt_last_error.
struct Failure {
  tt_status status;
};

void check(tt_status status, const char* what) {
  if (status != TT_OK) {
    std::cerr << "threetank: " << what << ": " << tt_last_error() << '\n';
    throw Failure{status};
  }
}

struct ModelOptions {
  std::string config;
  std::vector<double> y0;
  std::vector<double> u0;
  double t_s = 0.0;
};

void add_model_options(CLI::App* cmd, ModelOptions& opts) {
  cmd->add_option("-c,--config", opts.config, "Scenario JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--y0", opts.y0, "Operating-point levels h1 h2 h3 [m]")->expected(3);
  cmd->add_option("--u0", opts.u0, "Operating-point pump flows q1 q2 [m^3/s]")->expected(2);
  cmd->add_option("--ts", opts.t_s, "Sampling time [s]")->check(CLI::PositiveNumber);
}

ScenarioPtr load_scenario(const ModelOptions& opts) {
  tt_scenario* raw = nullptr;
  if (opts.config.empty()) {
    check(tt_scenario_default(&raw), "default scenario");
  } else {
    check(tt_scenario_from_file(opts.config.c_str(), &raw), "loading config");
  }
  ScenarioPtr scenario(raw);
  if (!opts.y0.empty()) {
    check(tt_scenario_set_operating_point(scenario.get(), opts.y0.data(),
                                          opts.u0.empty() ? nullptr : opts.u0.data()),
          "operating point");
  }
  if (opts.t_s > 0.0) check(tt_scenario_set_sample_time(scenario.get(), opts.t_s), "sampling time");
  return scenario;
}

void print(StringPtr text) { std::cout << text.get() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-tank simulation, control design and estimation workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tt_version()));

  ModelOptions lin_opts;
  auto* linearize = app.add_subcommand("linearize", "Print F, B, A_d, B_d at an operating point");
  add_model_options(linearize, lin_opts);

  ModelOptions design_opts;
  std::vector<double> lambda;
  std::vector<double> lambda_imag;
  std::vector<double> gain;
  auto* design = app.add_subcommand("design", "Place the tracking poles and print K");
  add_model_options(design, design_opts);
  design->add_option("--lambda", lambda, "Desired closed-loop poles (real parts)")->expected(5);
  design->add_option("--lambda-imag", lambda_imag, "Imaginary parts matching --lambda")->expected(5);
  design->add_option("--gain", gain, "Fixed 2x5 gain, row-major, to analyse instead of placing")->expected(10);

  std::string sim_config;
  std::string sim_out = "-";
  std::string sim_metrics;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the CSV log");
  simulate->add_option("-c,--config", sim_config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", sim_out, "CSV output path, '-' for stdout");
  simulate->add_option("-m,--metrics", sim_metrics, "Write the metrics report (JSON) to this path");

  std::string csv_path;
  double burn_in = 200.0;
  double band = 1e-3;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a simulation CSV");
  metrics->add_option("csv", csv_path, "CSV produced by 'simulate'")->required()->check(CLI::ExistingFile);
  metrics->add_option("--burn-in", burn_in, "Ignore estimation errors before this time [s]");
  metrics->add_option("--band", band, "Settling band [m]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*linearize) {
      auto scenario = load_scenario(lin_opts);
      char* out = nullptr;
      check(tt_linearize_json(scenario.get(), &out), "linearize");
      print(StringPtr(out));
    } else if (*design) {
      auto scenario = load_scenario(design_opts);
      if (!gain.empty()) {
        check(tt_scenario_set_gain(scenario.get(), gain.data()), "gain");
      } else if (!lambda.empty()) {
        check(tt_scenario_set_poles(scenario.get(), lambda.data(),
                                    lambda_imag.empty() ? nullptr : lambda_imag.data(), lambda.size()),
              "poles");
      }
      char* out = nullptr;
      check(tt_design_json(scenario.get(), &out), "design");
      print(StringPtr(out));
    } else if (*simulate) {
      tt_scenario* raw = nullptr;
      check(tt_scenario_from_file(sim_config.c_str(), &raw), "loading config");
      ScenarioPtr scenario(raw);
      tt_result* raw_result = nullptr;
      check(tt_scenario_run(scenario.get(), &raw_result), "simulation");
      ResultPtr result(raw_result);
      if (sim_out == "-") {
        char* csv = nullptr;
        check(tt_result_csv(result.get(), &csv), "csv");
        StringPtr owned(csv);
        std::fputs(owned.get(), stdout);
      } else {
        check(tt_result_write_csv(result.get(), sim_out.c_str()), "writing csv");
      }
      char* report = nullptr;
      check(tt_result_metrics_json(result.get(), &report), "metrics");
      StringPtr owned_report(report);
      if (!sim_metrics.empty()) {
        std::FILE* f = std::fopen(sim_metrics.c_str(), "wb");
        if (f == nullptr) {
          std::cerr << "threetank: cannot write '" << sim_metrics << "'\n";
          return kExitConfig;
        }
        std::fputs(owned_report.get(), f);
        std::fputc('\n', f);
        std::fclose(f);
      } else if (sim_out != "-") {
        std::cout << owned_report.get() << '\n';
      }
    } else if (*metrics) {
      char* out = nullptr;
      check(tt_metrics_from_csv(csv_path.c_str(), burn_in, band, &out), "metrics");
      print(StringPtr(out));
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return kExitOk;
}
