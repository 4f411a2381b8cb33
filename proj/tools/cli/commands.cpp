#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "bvecchia/bvecchia.hpp"
#include "dataset_io.hpp"

namespace bvecchia::cli {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

constexpr std::uint64_t kBenchNoiseStream = 6;

std::uint64_t require_seed(const ExperimentConfig& c) {
  if (!c.seed) throw InvalidArgument("--seed is required");
  return *c.seed;
}

std::size_t single(const std::vector<std::size_t>& v, const char* name) {
  if (v.size() != 1) throw InvalidArgument(std::string("--") + name + " takes exactly one value here");
  return v.front();
}

Ordering single_ordering(const ExperimentConfig& c) {
  if (c.ordering.size() != 1) throw InvalidArgument("--ordering takes exactly one value here");
  return parse_ordering(c.ordering.front());
}

Parallelism threads_of(const ExperimentConfig& c) { return Parallelism{c.threads}; }

LocationSet make_locations(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.n == 0) throw InvalidArgument("--n must be positive");
  if (c.dim != 2 && c.dim != 3) throw InvalidArgument("--dim must be 2 or 3");
  if (c.layout == "uniform") return uniform_locations(c.n, c.dim, seed);
  if (c.layout == "grid") {
    const auto side = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(c.n), 1.0 / static_cast<double>(c.dim))));
    std::size_t total = 1;
    for (std::size_t k = 0; k < c.dim; ++k) total *= side;
    if (total != c.n) throw InvalidArgument("--layout grid needs n to be a perfect square (2D) or cube (3D)");
    return grid_locations(side, c.dim);
  }
  throw InvalidArgument("--layout must be uniform or grid");
}

struct Observed {
  LocationSet points;
  std::vector<double> y;
};

// Reads --input, or simulates a field on generated locations.
Observed acquire(const ExperimentConfig& c, const MaternParams& theta, std::uint64_t seed,
                 json& timings) {
  if (!c.input.empty()) {
    Stopwatch sw;
    Dataset d = read_csv(c.input);
    timings["read"] = sw.seconds();
    return {std::move(d.points), std::move(d.values)};
  }
  Stopwatch sw;
  LocationSet points = make_locations(c, seed);
  std::vector<double> y = simulate_grf(points, theta, seed);
  timings["simulation"] = sw.seconds();
  return {std::move(points), std::move(y)};
}

void put_theta(json& j, const MaternParams& t);

// The recorded config carries the resolved theta, so a table1 selector shows its values.
json new_record(const std::string& command, const std::string& id, const ExperimentConfig& c) {
  json config = to_json(c);
  try {
    put_theta(config, resolved_theta(c));
  } catch (const InvalidArgument&) {
  }
  return json{{"experiment_id", id},     {"command", command},
              {"config", config},        {"metrics", json::object()},
              {"timings", json::object()}, {"error", nullptr}};
}

std::string id_of(const std::string& command, const ExperimentConfig& c) {
  std::ostringstream id;
  id << command;
  if (!c.bc.empty() && c.bc.size() == 1) id << ":bc=" << c.bc.front();
  if (!c.cs.empty() && c.cs.size() == 1) id << ":cs=" << c.cs.front();
  if (c.ordering.size() == 1) id << ':' << c.ordering.front();
  if (c.seed) id << ":seed=" << *c.seed;
  return id.str();
}

void put_theta(json& j, const MaternParams& t) {
  j["sigma2"] = t.sigma2;
  j["beta"] = t.beta;
  j["nu"] = t.nu;
}

std::vector<json> cmd_simulate(const ExperimentConfig& c) {
  const std::uint64_t seed = require_seed(c);
  const MaternParams theta = resolved_theta(c);
  if (c.output.empty()) throw InvalidArgument("simulate needs --output <csv>");
  json rec = new_record("simulate", id_of("simulate", c), c);
  Stopwatch sw;
  const LocationSet points = make_locations(c, seed);
  const std::vector<double> y = simulate_grf(points, theta, seed);
  rec["timings"]["simulation"] = sw.seconds();
  Stopwatch io;
  write_csv(c.output, points, y);
  rec["timings"]["write"] = io.seconds();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  rec["metrics"] = {{"n", points.size()}, {"dim", points.dim()}, {"mean", mean}, {"variance", var}};
  return {rec};
}

std::vector<json> cmd_loglik(const ExperimentConfig& c) {
  const std::uint64_t seed = require_seed(c);
  const MaternParams theta = resolved_theta(c);
  const PlanConfig pc{single(c.bc, "bc"), single(c.cs, "cs"), single_ordering(c), seed};
  json rec = new_record("loglik", id_of("loglik", c), c);
  const Observed data = acquire(c, theta, seed, rec["timings"]);

  PlanTimings pt;
  const VecchiaPlan plan = build_plan(data.points, pc, &pt, threads_of(c));
  rec["timings"]["clustering"] = pt.clustering;
  rec["timings"]["ordering"] = pt.ordering;
  rec["timings"]["nn_search"] = pt.neighbors;
  Stopwatch sw;
  const LogLikResult ll = block_loglik(plan, data.y, theta, threads_of(c));
  rec["timings"]["likelihood"] = sw.seconds();
  rec["metrics"] = {{"loglik", ll.loglik}, {"jitter_events", ll.jitter_events},
                    {"n", plan.size()},     {"bc", plan.block_count()},
                    {"cs", plan.cs}};
  if (c.dense_check) {
    Stopwatch dsw;
    const double exact = exact_loglik(data.points, data.y, theta);
    rec["timings"]["exact"] = dsw.seconds();
    rec["metrics"]["exact_loglik"] = exact;
    rec["metrics"]["abs_diff"] = std::abs(exact - ll.loglik);
  }
  return {rec};
}

std::vector<json> cmd_kl_study(const ExperimentConfig& c) {
  const std::uint64_t seed = require_seed(c);
  const MaternParams theta = resolved_theta(c);
  if (c.bc.empty() || c.cs.empty() || c.ordering.empty()) {
    throw InvalidArgument("kl-study needs --bc, --cs and --ordering lists");
  }
  std::vector<Ordering> orderings;
  for (const auto& name : c.ordering) orderings.push_back(parse_ordering(name));

  LocationSet points;
  if (!c.input.empty()) {
    points = read_csv(c.input).points;
  } else {
    points = make_locations(c, seed);
  }

  std::unique_ptr<DenseGP> exact;
  std::string exact_error;
  double factor_seconds = 0.0;
  try {
    Stopwatch sw;
    exact = std::make_unique<DenseGP>(points, theta);
    exact->factor();
    factor_seconds = sw.seconds();
  } catch (const std::exception& e) {
    exact_error = e.what();
  }

  std::vector<json> records;
  for (std::size_t bc : c.bc) {
    for (std::size_t cs : c.cs) {
      for (std::size_t k = 0; k < orderings.size(); ++k) {
        ExperimentConfig cell = c;
        cell.bc = {bc};
        cell.cs = {cs};
        cell.ordering = {c.ordering[k]};
        json rec = new_record("kl-study", id_of("kl-study", cell), cell);
        try {
          if (!exact) throw InvalidArgument(exact_error);
          PlanTimings pt;
          const VecchiaPlan plan = build_plan(points, {bc, cs, orderings[k], seed}, &pt, threads_of(c));
          rec["timings"]["clustering"] = pt.clustering;
          rec["timings"]["ordering"] = pt.ordering;
          rec["timings"]["nn_search"] = pt.neighbors;
          rec["timings"]["exact_factor"] = factor_seconds;
          Stopwatch sw;
          const KLReport kl = kl_vecchia(plan, *exact, threads_of(c));
          rec["timings"]["likelihood"] = sw.seconds();
          rec["metrics"] = {{"kl", kl.kl}, {"method", to_string(kl.method)}, {"n", kl.n},
                            {"bc", kl.bc}, {"cs", kl.cs}, {"strategy", to_string(kl.strategy)}};
          if (c.dense_check) {
            Stopwatch dsw;
            const KLReport dense = kl_vecchia_dense(plan, *exact, threads_of(c));
            rec["timings"]["dense"] = dsw.seconds();
            rec["metrics"]["kl_dense"] = dense.kl;
            rec["metrics"]["trace_gap"] = *dense.trace_gap;
          }
        } catch (const std::exception& e) {
          rec["error"] = e.what();
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

void write_predictions(const std::string& path, const LocationSet& points,
                       std::span<const double> truth, const PredictionResult& pred,
                       const IntervalSet& iv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << (points.dim() == 3 ? "x,y,z" : "x,y") << ",truth,mean,sd,lower,upper\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < points.dim(); ++k) out << format_double(points(i, k)) << ',';
    out << format_double(truth[i]) << ',' << format_double(pred.y_star[i]) << ','
        << format_double(pred.sd[i]) << ',' << format_double(iv.lower[i]) << ','
        << format_double(iv.upper[i]) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<json> cmd_fit_predict(const std::string& command, const ExperimentConfig& c, bool fit) {
  const std::uint64_t seed = require_seed(c);
  const MaternParams theta = resolved_theta(c);
  const std::size_t bc = single(c.bc, "bc");
  const std::size_t cs = single(c.cs, "cs");
  const Ordering ordering = single_ordering(c);
  SimulationMode mode = SimulationMode::univariate;
  if (c.simulation == "joint") {
    mode = SimulationMode::joint;
  } else if (c.simulation != "univariate") {
    throw InvalidArgument("--simulation must be univariate or joint");
  }

  json rec = new_record(command, id_of(command, c), c);
  json& timings = rec["timings"];
  const Observed data = acquire(c, theta, seed, timings);
  const TrainTestSplit split = train_test_split(data.points.size(), c.train_frac, seed);
  const LocationSet train = data.points.subset(split.train);
  const LocationSet test = data.points.subset(split.test);
  std::vector<double> y_train, y_test;
  for (std::size_t i : split.train) y_train.push_back(data.y[i]);
  for (std::size_t i : split.test) y_test.push_back(data.y[i]);

  MaternParams theta_used = theta;
  json& metrics = rec["metrics"];
  if (fit) {
    FitOptions fo;
    fo.tol = c.tol;
    fo.max_evals = c.max_evals;
    fo.parallelism = threads_of(c);
    const MaternParams init = c.init ? MaternParams::from_array(*c.init) : theta;
    const EstimationResult est = fit_mle(train, y_train, {bc, cs, ordering, seed}, init, {}, fo);
    theta_used = est.theta_hat;
    timings["clustering"] = est.plan_timings.clustering;
    timings["ordering"] = est.plan_timings.ordering;
    timings["nn_search"] = est.plan_timings.neighbors;
    timings["optimization"] = est.optimization_seconds;
    metrics["loglik_at_opt"] = est.loglik_at_opt;
    metrics["evaluations"] = est.evaluations;
    metrics["converged"] = est.converged;
  }
  json th;
  put_theta(th, theta_used);
  metrics["theta"] = th;

  const std::size_t pred_bc = c.pred_bc != 0 ? c.pred_bc : default_prediction_blocks(test.size());
  Stopwatch psw;
  const PredictionResult pred =
      predict_blocks(train, y_train, theta_used, test, pred_bc, std::min(cs, train.size()), seed,
                     threads_of(c));
  timings["prediction"] = psw.seconds();
  Stopwatch ssw;
  const IntervalSet iv = conditional_simulate(pred, c.rounds, seed, 0.05, mode, threads_of(c));
  timings["conditional_simulation"] = ssw.seconds();
  const Metrics m = compute_metrics(y_test, pred.y_star, iv);
  metrics["mspe"] = m.mspe;
  metrics["mape"] = m.mape;
  metrics["picp"] = m.picp;
  metrics["mpiw"] = m.mpiw;
  metrics["n_train"] = train.size();
  metrics["n_test"] = test.size();
  metrics["pred_bc"] = pred_bc;
  if (!c.predictions.empty()) write_predictions(c.predictions, test, y_test, pred, iv);
  return {rec};
}

bool bitwise_equal(const LogLikResult& a, const LogLikResult& b) {
  return std::memcmp(&a.loglik, &b.loglik, sizeof(double)) == 0 &&
         a.per_block.size() == b.per_block.size() &&
         std::memcmp(a.per_block.data(), b.per_block.data(), a.per_block.size() * sizeof(double)) == 0;
}

std::vector<json> cmd_bench(const ExperimentConfig& c) {
  const std::uint64_t seed = require_seed(c);
  const MaternParams theta = resolved_theta(c);
  ExperimentConfig base = c;
  if (base.n == 0) base.n = 20000;
  if (base.bc.empty()) base.bc = {1500};
  if (base.cs.empty()) base.cs = {30, 60, 120};
  if (base.reps == 0) throw InvalidArgument("--reps must be positive");
  const Ordering ordering = single_ordering(base);

  LocationSet points;
  std::vector<double> y;
  if (!base.input.empty()) {
    Dataset d = read_csv(base.input);
    points = std::move(d.points);
    y = std::move(d.values);
  } else {
    points = make_locations(base, seed);
    // Timing does not depend on the values; white noise avoids a dense simulation.
    CounterRng rng(seed, kBenchNoiseStream);
    y.resize(points.size());
    for (double& v : y) v = std::sqrt(theta.sigma2) * rng.normal();
  }
  const std::size_t par_threads = Parallelism{base.threads}.resolved();

  std::vector<json> records;
  for (std::size_t bc : base.bc) {
    for (std::size_t cs : base.cs) {
      ExperimentConfig cell = base;
      cell.bc = {bc};
      cell.cs = {cs};
      json rec = new_record("bench", id_of("bench", cell), cell);
      try {
        PlanTimings pt;
        const VecchiaPlan plan = build_plan(points, {bc, cs, ordering, seed}, &pt, Parallelism{par_threads});
        rec["timings"]["clustering"] = pt.clustering;
        rec["timings"]["ordering"] = pt.ordering;
        rec["timings"]["nn_search"] = pt.neighbors;

        auto time_loglik = [&](std::size_t threads, LogLikResult& result) {
          double best = 0.0;
          for (std::size_t r = 0; r < base.reps; ++r) {
            Stopwatch sw;
            result = block_loglik(plan, y, theta, Parallelism{threads});
            const double t = sw.seconds();
            best = r == 0 ? t : std::min(best, t);
          }
          return best;
        };
        LogLikResult seq, par;
        const double t_seq = time_loglik(1, seq);
        const double t_par = time_loglik(par_threads, par);
        const ComplexityEstimate model = complexity_estimate(points.size(), bc, cs);
        rec["timings"]["likelihood_sequential"] = t_seq;
        rec["timings"]["likelihood_parallel"] = t_par;
        rec["metrics"] = {{"loglik", seq.loglik},
                          {"threads", par_threads},
                          {"speedup", t_seq / t_par},
                          {"bitwise_identical", bitwise_equal(seq, par)},
                          {"model_flops_block", model.flops_block},
                          {"model_flops_classic", model.flops_classic},
                          {"model_memory_block", model.memory_bytes_block},
                          {"model_memory_classic", model.memory_bytes_classic},
                          {"model_flops_per_second", model.flops_block / t_seq}};
      } catch (const std::exception& e) {
        rec["error"] = e.what();
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

// Binds a flag to a scratch config; after parsing, only flags that were
// actually given overwrite the effective config.
class FlagBinder {
 public:
  explicit FlagBinder(CLI::App* app) : app_(app) {}

  template <class T>
  void add(const std::string& name, T ExperimentConfig::*member, const std::string& help) {
    CLI::Option* opt = app_->add_option(name, scratch_.*member, help);
    if constexpr (requires(T t) { t.push_back({}); typename T::value_type; }) {
      if constexpr (!std::is_same_v<T, std::string>) opt->delimiter(',');
    }
    appliers_.push_back([this, opt, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = scratch_.*member;
    });
  }
  void add_switch(const std::string& name, bool ExperimentConfig::*member, const std::string& help) {
    CLI::Option* opt = app_->add_flag(name, scratch_.*member, help);
    appliers_.push_back([this, opt, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = scratch_.*member;
    });
  }
  void add_extras() {
    CLI::Option* seed = app_->add_option("--seed", seed_, "Seed for every random choice");
    CLI::Option* table1 = app_->add_option("--table1", table1_, "Design-grid theta: <nu>,<low|medium|high>");
    CLI::Option* init = app_->add_option("--init", init_, "Starting theta sigma2,beta,nu")->delimiter(',')->expected(3);
    app_->add_option("--config", config_path_, "JSON config file or result record");
    appliers_.push_back([this, seed, table1, init](ExperimentConfig& c) {
      if (seed->count() > 0) c.seed = seed_;
      if (table1->count() > 0) c.table1 = table1_;
      if (init->count() > 0) c.init = std::array<double, 3>{init_[0], init_[1], init_[2]};
    });
  }

  CLI::App* app() const noexcept { return app_; }

  ExperimentConfig effective() const {
    ExperimentConfig c = config_path_.empty() ? ExperimentConfig{} : load_config_file(config_path_);
    for (const auto& apply : appliers_) apply(c);
    return c;
  }

 private:
  CLI::App* app_;
  ExperimentConfig scratch_;
  std::uint64_t seed_ = 0;
  std::string table1_;
  std::vector<double> init_;
  std::string config_path_;
  std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

void add_common_flags(FlagBinder& b) {
  b.add("--n", &ExperimentConfig::n, "Number of locations");
  b.add("--dim", &ExperimentConfig::dim, "Spatial dimension (2 or 3)");
  b.add("--bc", &ExperimentConfig::bc, "Block count (comma list for sweeps)");
  b.add("--cs", &ExperimentConfig::cs, "Conditioning size (comma list for sweeps)");
  b.add("--ordering", &ExperimentConfig::ordering, "morton|hilbert|random|maxmin|kdtree (comma list)");
  b.add("--sigma2", &ExperimentConfig::sigma2, "Matern variance");
  b.add("--beta", &ExperimentConfig::beta, "Matern range");
  b.add("--nu", &ExperimentConfig::nu, "Matern smoothness");
  b.add("--rounds", &ExperimentConfig::rounds, "Conditional simulation rounds");
  b.add("--threads", &ExperimentConfig::threads, "Worker threads (0: all hardware threads)");
  b.add("--train-frac", &ExperimentConfig::train_frac, "Training fraction of the split");
  b.add("--input", &ExperimentConfig::input, "Input CSV (x,y[,z],value)");
  b.add("--output", &ExperimentConfig::output, "Output path (CSV for simulate, JSON lines otherwise)");
  b.add("--predictions", &ExperimentConfig::predictions, "Write per-location predictions to this CSV");
  b.add("--layout", &ExperimentConfig::layout, "Generated locations: uniform or grid");
  b.add_switch("--dense-check", &ExperimentConfig::dense_check, "Cross-check against the dense oracle");
  b.add("--max-evals", &ExperimentConfig::max_evals, "Likelihood evaluation cap for fitting");
  b.add("--tol", &ExperimentConfig::tol, "Relative objective tolerance for fitting");
  b.add("--pred-bc", &ExperimentConfig::pred_bc, "Prediction block count (0: n_test / 10)");
  b.add("--reps", &ExperimentConfig::reps, "Timing repetitions (best is reported)");
  b.add("--simulation", &ExperimentConfig::simulation, "Conditional simulation: univariate or joint");
  b.add_extras();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "loglik",  "kl-study",
                                              "estimate", "predict", "bench"};
  return names;
}

std::vector<json> run_command(const std::string& command, const ExperimentConfig& config) {
  if (command == "simulate") return cmd_simulate(config);
  if (command == "loglik") return cmd_loglik(config);
  if (command == "kl-study") return cmd_kl_study(config);
  if (command == "estimate") return cmd_fit_predict(command, config, true);
  if (command == "predict") return cmd_fit_predict(command, config, false);
  if (command == "bench") return cmd_bench(config);
  throw InvalidArgument("unknown command '" + command + "'");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block Vecchia Gaussian-process likelihoods, estimation and prediction", "bvecchia"};
  app.require_subcommand(1);
  static const std::map<std::string, std::string> help{
      {"simulate", "Simulate a Gaussian random field and write it as CSV"},
      {"loglik", "Evaluate the block Vecchia log-likelihood"},
      {"kl-study", "Sweep block count, conditioning size and ordering; report KL divergence"},
      {"estimate", "Fit theta by maximum likelihood, then predict held-out points"},
      {"predict", "Predict held-out points with a fixed theta"},
      {"bench", "Time the likelihood against the complexity model"}};
  std::vector<std::unique_ptr<FlagBinder>> binders;
  for (const auto& name : command_names()) {
    binders.push_back(std::make_unique<FlagBinder>(app.add_subcommand(name, help.at(name))));
    add_common_flags(*binders.back());
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  const FlagBinder* chosen = nullptr;
  for (const auto& b : binders) {
    if (b->app()->parsed()) chosen = b.get();
  }
  const std::string command = chosen->app()->get_name();

  try {
    const ExperimentConfig config = chosen->effective();
    const std::vector<json> records = run_command(command, config);
    const bool to_file = command != "simulate" && !config.output.empty();
    std::ofstream file;
    if (to_file) {
      file.open(config.output, std::ios::binary);
      if (!file) throw IoError("cannot open '" + config.output + "' for writing");
    }
    std::ostream& sink = to_file ? static_cast<std::ostream&>(file) : out;
    for (const auto& r : records) sink << r.dump() << '\n';
    sink.flush();
    if (!sink) throw IoError("failed writing records");
    return kExitOk;
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
}

int exit_code_for(std::exception_ptr failure, std::ostream& err) {
  try {
    std::rethrow_exception(failure);
  } catch (const NotPositiveDefinite& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InvalidData& e) {
    err << "invalid data: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace bvecchia::cli
