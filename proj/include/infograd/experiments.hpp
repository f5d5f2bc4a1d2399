#pragma once

// The five validation experiments, as data-returning functions plus CSV emission.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "infograd/config.hpp"
#include "infograd/csv.hpp"
#include "infograd/optimize.hpp"

namespace infograd {

DsmConfig dsm_config_from(const ExperimentConfig& cfg, double t);
AscentConfig ascent_config_from(const ExperimentConfig& cfg, ScoreSource scores);

struct E1Result {
  Vector alpha;
  Vector grad_analytic;
  Vector grad_vjp;
  Vector grad_stderr;
  Vector mi_analytic;
  Vector mi_path;
};

struct E2Result {
  Matrix a;
  Vector alpha;
  Vector grad_analytic;
  std::optional<Vector> grad_true;
  std::optional<Vector> stderr_true;
  std::optional<Vector> grad_learned;
  std::optional<Vector> stderr_learned;
  std::optional<Vector> stein_c;
};

struct E3Result {
  double i_star = 0.0;
  Matrix initial;
  std::optional<AscentResult> analytic;
  std::optional<AscentResult> learned;
};

struct E4Result {
  Matrix initial;
  AscentResult run;
};

struct E5Result {
  Matrix w;
  Matrix initial;
  AscentResult run;
};

// `log` receives one progress line per grid point or outer iteration when non-null.
E1Result run_e1(const ExperimentConfig& cfg, std::ostream* log = nullptr);
E2Result run_e2(const ExperimentConfig& cfg, std::ostream* log = nullptr);
E3Result run_e3(const ExperimentConfig& cfg, std::ostream* log = nullptr);
E4Result run_e4(const ExperimentConfig& cfg, std::ostream* log = nullptr);
E5Result run_e5(const ExperimentConfig& cfg, std::ostream* log = nullptr);

CsvTable e1_table(const E1Result& r);
CsvTable e2_table(const E2Result& r);
CsvTable e3_table(const AscentResult& run, double i_star, double initial_frob);
CsvTable e4_table(const E4Result& r);
CsvTable e5_table(const E5Result& r);

double metric(const std::vector<Metric>& metrics, std::string_view name);

// Runs one experiment, writes its CSV file(s) and <experiment>.config into out_dir.
// Returns 0 on success and 3 when a run was truncated by a non-finite loss.
int run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace infograd
