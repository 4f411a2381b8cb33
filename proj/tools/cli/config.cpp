#include "config.hpp"

#include <fstream>
#include <sstream>

#include "bvecchia/error.hpp"

namespace bvecchia::cli {

using nlohmann::json;

json to_json(const ExperimentConfig& c) {
  json j;
  j["n"] = c.n;
  j["dim"] = c.dim;
  j["bc"] = c.bc;
  j["cs"] = c.cs;
  j["ordering"] = c.ordering;
  j["sigma2"] = c.sigma2;
  j["beta"] = c.beta;
  j["nu"] = c.nu;
  j["table1"] = c.table1 ? json(*c.table1) : json(nullptr);
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["rounds"] = c.rounds;
  j["threads"] = c.threads;
  j["train_frac"] = c.train_frac;
  j["input"] = c.input;
  j["output"] = c.output;
  j["predictions"] = c.predictions;
  j["layout"] = c.layout;
  j["dense_check"] = c.dense_check;
  j["max_evals"] = c.max_evals;
  j["tol"] = c.tol;
  j["pred_bc"] = c.pred_bc;
  j["reps"] = c.reps;
  j["init"] = c.init ? json(*c.init) : json(nullptr);
  j["simulation"] = c.simulation;
  return j;
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

// Scalars are accepted where lists are expected ("bc": 32 == "bc": [32]).
template <class T>
void read_list(const json& j, const char* key, std::vector<T>& out) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    if (it->is_array()) {
      out = it->get<std::vector<T>>();
    } else {
      out = {it->get<T>()};
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& input) {
  if (!input.is_object()) throw InvalidArgument("config: expected a JSON object");
  const json& j = input.contains("config") && input["config"].is_object() ? input["config"] : input;
  ExperimentConfig c;
  read_field(j, "n", c.n);
  read_field(j, "dim", c.dim);
  read_list(j, "bc", c.bc);
  read_list(j, "cs", c.cs);
  read_list(j, "ordering", c.ordering);
  read_field(j, "sigma2", c.sigma2);
  read_field(j, "beta", c.beta);
  read_field(j, "nu", c.nu);
  if (j.contains("table1") && !j["table1"].is_null()) c.table1 = j["table1"].get<std::string>();
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
  read_field(j, "rounds", c.rounds);
  read_field(j, "threads", c.threads);
  read_field(j, "train_frac", c.train_frac);
  read_field(j, "input", c.input);
  read_field(j, "output", c.output);
  read_field(j, "predictions", c.predictions);
  read_field(j, "layout", c.layout);
  read_field(j, "dense_check", c.dense_check);
  read_field(j, "max_evals", c.max_evals);
  read_field(j, "tol", c.tol);
  read_field(j, "pred_bc", c.pred_bc);
  read_field(j, "reps", c.reps);
  if (j.contains("init") && !j["init"].is_null()) c.init = j["init"].get<std::array<double, 3>>();
  read_field(j, "simulation", c.simulation);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return config_from_json(json::parse(text));
  } catch (const json::parse_error&) {
    // JSON lines: take the first record.
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        return config_from_json(json::parse(line));
      } catch (const json::parse_error& e) {
        throw IoError("config file '" + path + "' is not valid JSON: " + e.what());
      }
    }
    throw IoError("config file '" + path + "' is empty");
  }
}

MaternParams resolved_theta(const ExperimentConfig& c) {
  MaternParams theta{c.sigma2, c.beta, c.nu};
  if (c.table1) {
    const std::string& sel = *c.table1;
    const auto comma = sel.find(',');
    if (comma == std::string::npos) {
      throw InvalidArgument("--table1 expects <nu>,<low|medium|high>, got '" + sel + "'");
    }
    double nu = 0.0;
    try {
      std::size_t used = 0;
      nu = std::stod(sel.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw InvalidArgument("--table1: cannot parse smoothness in '" + sel + "'");
    }
    theta.nu = nu;
    theta.beta = table1_beta(nu, parse_range_level(sel.substr(comma + 1)));
  }
  theta.validate();
  return theta;
}

}  // namespace bvecchia::cli
