#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bvecchia/kernels.hpp"

namespace bvecchia::cli {

// Every knob of every subcommand. Fields a command does not use are ignored
// by it but still echoed, so a record carries everything needed to rerun it.
struct ExperimentConfig {
  std::size_t n = 0;
  std::size_t dim = 2;
  std::vector<std::size_t> bc;
  std::vector<std::size_t> cs;
  std::vector<std::string> ordering{"random"};
  double sigma2 = 1.0;
  double beta = 0.1;
  double nu = 0.5;
  std::optional<std::string> table1;  // "<nu>,<low|medium|high>"
  std::optional<std::uint64_t> seed;
  std::size_t rounds = 1000;
  std::size_t threads = 0;  // 0: one per hardware thread
  double train_frac = 0.9;
  std::string input;
  std::string output;
  std::string predictions;
  std::string layout = "uniform";  // uniform | grid
  bool dense_check = false;
  std::size_t max_evals = 2000;
  double tol = 1e-7;
  std::size_t pred_bc = 0;  // 0: one block per ten test points
  std::size_t reps = 3;
  std::optional<std::array<double, 3>> init;  // estimate start, defaults to theta
  std::string simulation = "univariate";      // univariate | joint
};

nlohmann::json to_json(const ExperimentConfig& config);

// Accepts a config object, or a result record (its "config" member is used).
ExperimentConfig config_from_json(const nlohmann::json& j);

// Reads a JSON file; for JSON-lines input the first non-empty line is used.
ExperimentConfig load_config_file(const std::string& path);

// Applies the table1 selector, if any, and validates the parameters.
MaternParams resolved_theta(const ExperimentConfig& config);

}  // namespace bvecchia::cli
