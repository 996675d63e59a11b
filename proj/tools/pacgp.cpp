// pacgp: train, compare, evaluate and self-check certified GP regressors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacgp/errors.hpp"
#include "pacgp/experiment.hpp"
#include "pacgp/log.hpp"
#include "pacgp/selfcheck.hpp"
#include "pacgp/serialize.hpp"

namespace fs = std::filesystem;
using namespace pacgp;

namespace {

// Flags shared by train, compare and restarts. Enumerations are collected as
// strings and resolved after parsing so that bad values map to exit code 2.
struct RunFlags {
  RunSpec spec;
  std::string objective = "pac-kl";
  std::string loss = "zero-one";
  std::string optimizer = "lbfgs";
  std::string standardize = "train-only";
  bool absolute_band = false;
  double epsilon = 0.6;

  void add(CLI::App& app, bool with_method) {
    app.add_option("--dataset", spec.dataset,
                   "CSV path or builtin (boston, demo-1d, demo-1d-half, synthetic-gp, "
                   "pol-surrogate, pol)")
        ->capture_default_str();
    app.add_option("--target", spec.target_column, "target column name or index (default: last)");
    if (with_method) {
      app.add_option("--model", spec.model, "full or sparse")->capture_default_str();
      app.add_option("--objective", objective, "pac-kl, pac-sqrt, mle, vfe, fitc, dtc")
          ->capture_default_str();
      app.add_option("--num-inducing", spec.num_inducing, "M (sparse only)");
      app.add_flag("--free-form", spec.free_form, "free a_M and B_MM (sparse PAC objectives)");
    }
    app.add_option("--loss", loss, "zero-one, clipped-square, inv-gauss, band-rel")
        ->capture_default_str();
    app.add_flag("--absolute-band", absolute_band, "band-rel loss with y +/- eps instead of y +/- eps|y|");
    app.add_option("--epsilon", epsilon, "accuracy scale of the loss")->capture_default_str();
    app.add_flag("--ard", spec.ard, "one lengthscale per input dimension");
    app.add_option("--alpha", spec.alpha, "sparse posterior parametrization in [0,1]")
        ->capture_default_str();
    app.add_flag("--optimize-alpha", spec.train.optimize_alpha, "train alpha as well");
    app.add_option("--delta", spec.bound.delta, "confidence parameter")->capture_default_str();
    app.add_option("--grid-L", spec.bound.grid_half_width, "hyperparameter grid half-width L")
        ->capture_default_str();
    app.add_option("--grid-digits", spec.bound.grid_digits, "hyperparameter grid digits r")
        ->capture_default_str();
    app.add_option("--seed", spec.seed, "base seed; repeat i uses seed + i")->capture_default_str();
    app.add_option("--repeats", spec.repeats, "number of random splits")->capture_default_str();
    app.add_option("--subsample", spec.subsample,
                   "cap on the number of rows (training size for generated sets); 0 = all")
        ->capture_default_str();
    app.add_option("--minibatch", spec.train.minibatch_size, "minibatch size (0 = full batch)")
        ->capture_default_str();
    app.add_option("--optimizer", optimizer, "lbfgs or adam")->capture_default_str();
    app.add_option("--max-iters", spec.train.max_iters, "optimizer iterations")->capture_default_str();
    app.add_option("--learning-rate", spec.train.learning_rate, "Adam step size")
        ->capture_default_str();
    app.add_option("--restart-count", spec.train.restart_count,
                   "independent restarts per training, best one kept")
        ->capture_default_str();
    app.add_option("--train-fraction", spec.train_fraction, "training share of each split")
        ->capture_default_str();
    app.add_option("--standardize", standardize, "train-only, full or none")->capture_default_str();
    app.add_option("--init-log-lengthscale", spec.init_log_lengthscale,
                   "initial ln(l^2) of every lengthscale")
        ->capture_default_str();
  }

  RunSpec resolve() const {
    RunSpec s = spec;
    s.objective = parse_objective(objective);
    s.bound.loss.kind = parse_loss_kind(loss);
    s.bound.loss.epsilon = epsilon;
    s.bound.loss.relative = !absolute_band;
    s.train.optimizer = parse_optimizer(optimizer);
    if (standardize == "train-only") {
      s.standardization = Standardization::kTrainOnly;
    } else if (standardize == "full") {
      s.standardization = Standardization::kFull;
    } else if (standardize == "none") {
      s.standardization = Standardization::kNone;
    } else {
      throw UsageError("--standardize must be train-only, full or none");
    }
    s.validate();
    return s;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

// First failing repeat decides the exit code; results already written stay.
int run_exit_code(const std::vector<RunOutcome>& runs) {
  for (const RunOutcome& run : runs) {
    for (const RepeatOutcome& r : run.repeats) {
      if (r.failed) return r.exit_code;
    }
  }
  return 0;
}

int cmd_train(const RunFlags& flags, const std::string& out_dir) {
  const RunSpec spec = flags.resolve();
  const RunOutcome run = run_experiment(spec);
  std::cout << format_aggregate(run);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    write_json((dir / "report.json").string(), to_json(run));
    for (const RepeatOutcome& r : run.repeats) {
      if (r.failed) continue;
      const std::string i = std::to_string(r.repeat);
      write_json((dir / ("model_" + i + ".json")).string(), to_json(r.model));
      write_trace_csv((dir / ("trace_" + i + ".csv")).string(), r.training.trace);
    }
  }
  return run_exit_code({run});
}

// "model:objective[:M]", e.g. full:pac-kl or sparse:fitc:100.
RunSpec method_spec(const RunFlags& base, const std::string& method) {
  RunFlags f = base;
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = method.find(':', start);
    parts.push_back(method.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 3) {
    throw UsageError("method '" + method + "' is not of the form model:objective[:M]");
  }
  f.spec.model = parts[0];
  f.objective = parts[1];
  if (parts.size() == 3) {
    try {
      f.spec.num_inducing = std::stol(parts[2]);
    } catch (const std::exception&) {
      throw UsageError("bad inducing-point count in method '" + method + "'");
    }
  }
  return f.resolve();
}

int cmd_compare(const RunFlags& flags, const std::vector<std::string>& methods,
                const std::string& out_dir) {
  if (methods.empty()) throw UsageError("compare needs at least one --method");
  std::vector<RunSpec> specs;
  for (const std::string& m : methods) specs.push_back(method_spec(flags, m));
  std::vector<RunOutcome> runs;
  for (const RunSpec& s : specs) {
    runs.push_back(run_experiment(s));
    std::cout << format_aggregate(runs.back());
  }
  const std::string csv = comparison_csv(runs);
  if (out_dir.empty()) {
    std::cout << '\n' << csv;
  } else {
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    write_text(dir / "comparison.csv", csv);
    nlohmann::json all = nlohmann::json::array();
    for (const RunOutcome& r : runs) all.push_back(to_json(r));
    write_json((dir / "comparison.json").string(),
               {{"schema_version", kSchemaVersion}, {"runs", all}});
  }
  return run_exit_code(runs);
}

int cmd_restarts(const RunFlags& flags, int restarts, const std::string& out) {
  const RunSpec spec = flags.resolve();
  const TrainResult result = restart_study(spec, restarts);
  const std::string csv = restarts_csv(result);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
    const RestartOutcome& best = result.restarts.at(static_cast<size_t>(result.best_restart));
    std::cout << spec.label() << ": " << result.restarts.size() << " restarts, best #"
              << best.restart << " objective " << best.objective << " sigma_n^2 "
              << best.noise_variance << '\n';
  }
  return 0;
}

int cmd_evaluate(const std::string& model_file, const std::string& dataset,
                 const std::string& target, const std::string& out) {
  const StoredModel model = model_from_json(read_json(model_file));
  BoundReport rep;
  if (dataset.empty()) {
    rep = evaluate_model(model);
  } else {
    const Dataset raw = load_dataset(dataset, target);
    rep = evaluate_model(model, &raw);
    rep.metadata.dataset = dataset;
  }
  const nlohmann::json j = to_json(rep);
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
  }
  return 0;
}

int cmd_sweep(const SweepSpec& spec, const std::string& out) {
  const std::vector<SweepRow> rows = discretization_sweep(spec);
  const std::string csv = sweep_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
  }
  return 0;
}

int cmd_selfcheck() {
  const std::vector<CheckResult> results = run_selfcheck();
  std::cout << format_checks(results);
  for (const CheckResult& r : results) {
    if (!r.passed) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayes certified Gaussian process regression"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  RunFlags train_flags;
  std::string train_out;
  CLI::App* train = app.add_subcommand("train", "train and certify a model over repeated splits");
  train_flags.add(*train, true);
  train->add_option("--out", train_out, "output directory for report.json, model_i.json, trace_i.csv");

  RunFlags compare_flags;
  std::vector<std::string> methods;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "compare several methods on one dataset and loss");
  compare_flags.add(*compare, false);
  compare->add_option("--method", methods, "model:objective[:M], repeatable (e.g. sparse:fitc:100)");
  compare->add_option("--out", compare_out, "output directory for comparison.csv and comparison.json");

  RunFlags restart_flags;
  int restarts = 100;
  std::string restart_out;
  CLI::App* restart =
      app.add_subcommand("restarts", "multi-restart study with log-uniform sigma_n^2 initializations");
  restart_flags.add(*restart, true);
  restart->add_option("--restarts", restarts, "number of restarts")->capture_default_str();
  restart->add_option("--out", restart_out, "CSV file (default: stdout)");

  SweepSpec sweep_spec;
  std::string sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "discretization study on synthetic SE-ARD data");
  sweep->add_option("--grid-L", sweep_spec.half_widths, "half-widths L")->capture_default_str();
  sweep->add_option("--grid-digits", sweep_spec.digits, "digits r")->capture_default_str();
  sweep->add_option("--n-train", sweep_spec.n_train, "training size")->capture_default_str();
  sweep->add_option("--n-test", sweep_spec.n_test, "test size")->capture_default_str();
  sweep->add_option("--dim", sweep_spec.dim, "input dimension")->capture_default_str();
  sweep->add_option("--noise", sweep_spec.noise_variance, "noise variance")->capture_default_str();
  sweep->add_option("--epsilon", sweep_spec.epsilon, "zero-one loss epsilon")->capture_default_str();
  sweep->add_option("--delta", sweep_spec.delta, "confidence parameter")->capture_default_str();
  sweep->add_option("--seed", sweep_spec.seed, "base seed")->capture_default_str();
  sweep->add_option("--repeats", sweep_spec.repeats, "independent data draws")->capture_default_str();
  sweep->add_option("--max-iters", sweep_spec.train.max_iters, "optimizer iterations")
      ->capture_default_str();
  sweep->add_option("--out", sweep_out, "CSV file (default: stdout)");

  std::string model_file, eval_dataset, eval_target, eval_out;
  CLI::App* evaluate = app.add_subcommand("evaluate", "re-certify a stored model, optionally on new data");
  evaluate->add_option("--model-file", model_file, "model_i.json written by train")->required();
  evaluate->add_option("--dataset", eval_dataset, "test data (CSV or builtin), original scale");
  evaluate->add_option("--target", eval_target, "target column name or index");
  evaluate->add_option("--out", eval_out, "report JSON file (default: stdout)");

  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the numerical property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }
  set_verbose(verbose);

  try {
    if (*train) return cmd_train(train_flags, train_out);
    if (*compare) return cmd_compare(compare_flags, methods, compare_out);
    if (*restart) return cmd_restarts(restart_flags, restarts, restart_out);
    if (*sweep) return cmd_sweep(sweep_spec, sweep_out);
    if (*evaluate) return cmd_evaluate(model_file, eval_dataset, eval_target, eval_out);
    if (*selfcheck) return cmd_selfcheck();
  } catch (const UsageError& e) {
    std::cerr << "pacgp: usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const IoError& e) {
    std::cerr << "pacgp: I/O error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "pacgp: error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumeric);
  }
  return static_cast<int>(ExitCode::kUsage);
}
