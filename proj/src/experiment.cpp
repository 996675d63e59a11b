#include "pacgp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "pacgp/binary_kl.hpp"
#include "pacgp/errors.hpp"
#include "pacgp/log.hpp"
#include "pacgp/report.hpp"

#ifndef PACGP_DATA_DIR
#define PACGP_DATA_DIR "data"
#endif

namespace pacgp {

std::string RunSpec::label() const {
  std::ostringstream os;
  os << (model == "sparse" ? "sparse/" : "full/") << to_string(objective);
  if (model == "sparse") os << "/M=" << num_inducing;
  if (free_form) os << "/free-form";
  os << "/eps=" << bound.loss.epsilon;
  if (ard) os << "/ard";
  return os.str();
}

void RunSpec::validate() const {
  bound.validate();
  train.validate();
  if (model != "full" && model != "sparse") throw UsageError("--model must be full or sparse");
  if (repeats < 1) throw UsageError("--repeats must be >= 1");
  if (subsample < 0) throw UsageError("--subsample must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw UsageError("train fraction must lie in (0,1]");
  }
  if (model == "full") {
    if (num_inducing != 0) throw UsageError("--num-inducing applies to sparse models only");
    if (objective == ObjectiveKind::kVfe || objective == ObjectiveKind::kFitc ||
        objective == ObjectiveKind::kDtc) {
      throw UsageError("vfe, fitc and dtc are sparse objectives; use --model sparse");
    }
  } else {
    if (num_inducing < 1) throw UsageError("sparse models need --num-inducing >= 1");
    if (objective == ObjectiveKind::kNll) {
      throw UsageError("mle is a full-GP objective; sparse models use vfe, fitc or dtc");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("--alpha must lie in [0,1]");
    if (free_form && !is_pac(objective)) {
      throw UsageError("free-form posteriors need a PAC objective (pac-kl or pac-sqrt)");
    }
  }
  if (free_form && model != "sparse") throw UsageError("--free-form applies to sparse models only");
}

RunSpec run_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("run configuration must be a JSON object");
  RunSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") s.dataset = v.get<std::string>();
      else if (key == "target") s.target_column = v.get<std::string>();
      else if (key == "model") s.model = v.get<std::string>();
      else if (key == "objective") s.objective = parse_objective(v.get<std::string>());
      else if (key == "loss") s.bound.loss.kind = parse_loss_kind(v.get<std::string>());
      else if (key == "epsilon") s.bound.loss.epsilon = v.get<double>();
      else if (key == "absolute_band") s.bound.loss.relative = !v.get<bool>();
      else if (key == "ard") s.ard = v.get<bool>();
      else if (key == "num_inducing") s.num_inducing = v.get<Eigen::Index>();
      else if (key == "alpha") s.alpha = v.get<double>();
      else if (key == "optimize_alpha") s.train.optimize_alpha = v.get<bool>();
      else if (key == "free_form") s.free_form = v.get<bool>();
      else if (key == "delta") s.bound.delta = v.get<double>();
      else if (key == "grid_L") s.bound.grid_half_width = v.get<double>();
      else if (key == "grid_digits") s.bound.grid_digits = v.get<int>();
      else if (key == "seed") s.seed = v.get<unsigned long long>();
      else if (key == "repeats") s.repeats = v.get<int>();
      else if (key == "subsample") s.subsample = v.get<Eigen::Index>();
      else if (key == "minibatch") s.train.minibatch_size = v.get<Eigen::Index>();
      else if (key == "optimizer") s.train.optimizer = parse_optimizer(v.get<std::string>());
      else if (key == "max_iters") s.train.max_iters = v.get<int>();
      else if (key == "learning_rate") s.train.learning_rate = v.get<double>();
      else if (key == "restart_count") s.train.restart_count = v.get<int>();
      else if (key == "train_fraction") s.train_fraction = v.get<double>();
      else if (key == "init_log_lengthscale") s.init_log_lengthscale = v.get<double>();
      else if (key == "standardize") {
        const std::string m = v.get<std::string>();
        if (m == "train-only") s.standardization = Standardization::kTrainOnly;
        else if (m == "full") s.standardization = Standardization::kFull;
        else if (m == "none") s.standardization = Standardization::kNone;
        else throw UsageError("standardize must be train-only, full or none");
      } else {
        throw UsageError("unknown run configuration key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad run configuration value: ") + e.what());
  }
  s.validate();
  return s;
}

int default_workers() {
  if (const char* env = std::getenv("PACGP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string data_dir() {
  if (const char* env = std::getenv("PACGP_DATA_DIR")) return env;
  return PACGP_DATA_DIR;
}

Dataset with_name(Dataset ds, const std::string& name) {
  ds.name = name;
  return ds;
}

bool is_generated(const std::string& name) {
  return name == "synthetic-gp" || name == "pol-surrogate";
}

}  // namespace

Dataset load_dataset(const std::string& name, const std::string& target_column,
                     unsigned long long seed, Eigen::Index n_train) {
  if (name == "boston") {
    const std::string path = data_dir() + "/boston.csv";
    if (!std::filesystem::exists(path)) {
      throw IoError("boston.csv not found in " + data_dir() + " (set PACGP_DATA_DIR)");
    }
    return with_name(load_csv(path, target_column), "boston");
  }
  if (name == "demo-1d") return demo_1d(false);
  if (name == "demo-1d-half") return demo_1d(true);
  if (name == "pol") {
    const char* env = std::getenv("PACGP_POL_CSV");
    if (!env) throw IoError("dataset 'pol' needs PACGP_POL_CSV pointing at the CSV file");
    return with_name(load_csv(env, target_column), "pol");
  }
  if (is_generated(name)) {
    // concatenation of the generated train and test parts
    const Eigen::Index n = n_train > 0 ? n_train : 2000;
    SyntheticGP g = name == "pol-surrogate" ? pol_surrogate(n, std::max<Eigen::Index>(n / 4, 1), seed)
                                            : sample_synthetic_gp(n, 10000, 3, seed);
    Dataset all = g.train;
    all.X.conservativeResize(g.train.size() + g.test.size(), Eigen::NoChange);
    all.X.bottomRows(g.test.size()) = g.test.X;
    all.y.conservativeResize(g.train.size() + g.test.size());
    all.y.tail(g.test.size()) = g.test.y;
    all.name = name;
    return all;
  }
  if (!std::filesystem::exists(name)) {
    throw IoError("no such dataset file or builtin name: '" + name + "'");
  }
  return load_csv(name, target_column);
}

Split prepare_split(const RunSpec& spec, int repeat) {
  const unsigned long long seed = spec.seed + static_cast<unsigned long long>(repeat);
  if (is_generated(spec.dataset)) {
    // generated sets come with their own held-out draws on the unit scale
    const Eigen::Index n = spec.subsample > 0 ? spec.subsample : (spec.dataset == "pol-surrogate" ? 3000 : 2000);
    SyntheticGP g = spec.dataset == "pol-surrogate"
                        ? pol_surrogate(n, std::max<Eigen::Index>(n / 4, 1), seed)
                        : sample_synthetic_gp(n, 10000, 3, seed);
    return {g.train, g.test};
  }
  Dataset ds = load_dataset(spec.dataset, spec.target_column, seed);
  if (spec.subsample > 0) ds = subsample(ds, spec.subsample, seed);
  if (spec.train_fraction >= 1.0) {
    if (spec.standardization == Standardization::kNone) return {ds, ds};
    // whole set standardized with its own statistics, used for both roles
    Dataset s = ds;
    const Eigen::VectorXd mean = s.X.colwise().mean().transpose();
    const double n = static_cast<double>(s.size());
    const Eigen::VectorXd sd =
        ((s.X.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / n).cwiseSqrt();
    const double ym = s.y.mean();
    const double ys = std::sqrt((s.y.array() - ym).square().sum() / n);
    Eigen::VectorXd sd_safe = sd;
    for (Eigen::Index j = 0; j < s.dim(); ++j) {
      if (!(sd(j) > 0.0)) sd_safe(j) = 1.0;
      s.X.col(j) = (s.X.col(j).array() - mean(j)) / sd_safe(j);
    }
    s.y = (s.y.array() - ym) / ys;
    s.feature_means = mean;
    s.feature_sds = sd_safe;
    s.target_mean = ym;
    s.target_sd = ys;
    s.standardized = true;
    return {s, s};
  }
  auto [train, test] = split_and_standardize(ds, spec.train_fraction, seed, spec.standardization);
  return {train, test};
}

namespace {

std::string standardization_name(const RunSpec& spec) {
  if (is_generated(spec.dataset) || spec.standardization == Standardization::kNone) return "none";
  if (spec.train_fraction >= 1.0 || spec.standardization == Standardization::kFull) return "full";
  return "train-only";
}

Eigen::MatrixXd initial_inducing(const Dataset& train, Eigen::Index m, unsigned long long seed) {
  if (m > train.size()) {
    throw UsageError("--num-inducing (" + std::to_string(m) + ") exceeds the training size (" +
                     std::to_string(train.size()) + ")");
  }
  const std::vector<Eigen::Index> perm = seeded_permutation(train.size(), seed ^ 0x5bd1e995ULL);
  Eigen::MatrixXd Z(m, train.dim());
  for (Eigen::Index i = 0; i < m; ++i) Z.row(i) = train.X.row(perm[static_cast<size_t>(i)]);
  return Z;
}

HyperParams initial_hyper(const RunSpec& spec, Eigen::Index dim) {
  const double l0 = spec.init_log_lengthscale;
  return spec.ard ? HyperParams::with_ard(dim, l0, 0.0) : HyperParams::isotropic(l0, 0.0);
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const UsageError&) {
    return static_cast<int>(ExitCode::kUsage);
  } catch (const IoError&) {
    return static_cast<int>(ExitCode::kIo);
  } catch (...) {
    return static_cast<int>(ExitCode::kNumeric);
  }
}

}  // namespace

RepeatOutcome run_repeat(const RunSpec& spec, int repeat) {
  RepeatOutcome out;
  out.repeat = repeat;
  const unsigned long long seed = spec.seed + static_cast<unsigned long long>(repeat);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    spec.validate();
    const Split split = prepare_split(spec, repeat);
    TrainConfig tc = spec.train;
    tc.objective = spec.objective;
    tc.init_seed = seed;

    StoredModel model;
    model.kind = spec.model;
    model.objective = to_string(spec.objective);
    model.bound = spec.bound;
    model.feature_names = split.train.feature_names;
    model.feature_means = split.train.feature_means;
    model.feature_sds = split.train.feature_sds;
    model.target_mean = split.train.target_mean;
    model.target_sd = split.train.target_sd;

    BoundReport rep;
    double undiscretized_risk = 0.0;
    if (spec.model == "full") {
      FullGPState init;
      init.hyper = initial_hyper(spec, split.train.dim());
      init.train_inputs = split.train.X;
      init.train_targets = split.train.y;
      const FullGPState trained = train_full(init, tc, spec.bound, &out.training);
      undiscretized_risk = train_gibbs_risk(trained, spec.bound.loss);
      model.full = discretized(trained, spec.bound);
      rep = build_report(model.full, split.test, spec.bound);
    } else {
      SparseGPState init;
      init.hyper = initial_hyper(spec, split.train.dim());
      init.inducing_inputs = initial_inducing(split.train, spec.num_inducing, seed);
      init.alpha = spec.alpha;
      if (spec.free_form) init.init_free_form_at_prior();
      const SparseGPState trained =
          train_sparse(init, split.train.X, split.train.y, tc, spec.bound, &out.training);
      undiscretized_risk = train_gibbs_risk(trained, split.train, spec.bound.loss);
      model.sparse = discretized(trained, spec.bound);
      model.train_inputs = split.train.X;
      model.train_targets = split.train.y;
      rep = build_report(model.sparse, split.train, split.test, spec.bound);
    }
    rep.gibbs_train_undiscretized = undiscretized_risk;
    auto& md = rep.metadata;
    md.seed = seed;
    md.dataset = spec.dataset;
    md.objective = to_string(spec.objective);
    md.standardization = standardization_name(spec);
    md.synthetic = split.train.synthetic;
    md.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report = rep;
    out.model = std::move(model);
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    out.exit_code = exit_code_for(std::current_exception());
    log_warning("repeat " + std::to_string(repeat) + " (" + spec.label() + ") failed: " + e.what());
  }
  return out;
}

const std::vector<std::string>& report_fields() {
  static const std::vector<std::string> fields = {
      "B",       "B_pinsker",  "gibbs_train", "gibbs_test",  "mse_test",
      "kl_over_n", "sigma_n_sq", "bayes_bound", "gibbs_train_undiscretized", "wall_time_seconds"};
  return fields;
}

double report_field(const BoundReport& r, const std::string& f) {
  if (f == "B") return r.B;
  if (f == "B_pinsker") return r.B_pinsker;
  if (f == "gibbs_train") return r.gibbs_train;
  if (f == "gibbs_test") return r.gibbs_test;
  if (f == "mse_test") return r.mse_test;
  if (f == "kl_over_n") return r.kl_over_n;
  if (f == "sigma_n_sq") return r.sigma_n_sq;
  if (f == "bayes_bound") return r.bayes_bound;
  if (f == "gibbs_train_undiscretized") return r.gibbs_train_undiscretized;
  if (f == "wall_time_seconds") return r.metadata.wall_time_seconds;
  throw UsageError("unknown report field '" + f + "'");
}

std::map<std::string, FieldStat> aggregate_reports(const std::vector<BoundReport>& reports) {
  std::map<std::string, FieldStat> agg;
  for (const std::string& f : report_fields()) {
    FieldStat s;
    s.n = static_cast<int>(reports.size());
    if (s.n == 0) {
      agg[f] = s;
      continue;
    }
    double sum = 0.0;
    for (const BoundReport& r : reports) sum += report_field(r, f);
    s.mean = sum / s.n;
    if (s.n > 1) {
      double ss = 0.0;
      for (const BoundReport& r : reports) ss += std::pow(report_field(r, f) - s.mean, 2);
      s.stderr_ = std::sqrt(ss / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    }
    agg[f] = s;
  }
  return agg;
}

RunOutcome run_experiment(const RunSpec& spec, int workers) {
  spec.validate();
  if (workers <= 0) workers = default_workers();
  RunOutcome run;
  run.spec = spec;
  run.repeats.resize(static_cast<size_t>(spec.repeats));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.repeats; i = next++) {
      run.repeats[static_cast<size_t>(i)] = run_repeat(spec, i);
    }
  };
  const int n_threads = std::min(workers, spec.repeats);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  std::vector<BoundReport> ok;
  for (const RepeatOutcome& r : run.repeats) {
    if (r.failed) {
      ++run.failures;
    } else {
      ok.push_back(r.report);
    }
  }
  run.aggregate = aggregate_reports(ok);
  return run;
}

nlohmann::json to_json(const RunOutcome& run) {
  nlohmann::json reports = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const RepeatOutcome& r : run.repeats) {
    if (r.failed) {
      failures.push_back({{"repeat", r.repeat}, {"error", r.error}, {"exit_code", r.exit_code}});
    } else {
      reports.push_back(to_json(r.report));
    }
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [field, s] : run.aggregate) {
    agg[field] = {{"mean", s.mean}, {"stderr", s.stderr_}, {"n", s.n}};
  }
  return {{"schema_version", kSchemaVersion},
          {"label", run.spec.label()},
          {"reports", reports},
          {"aggregate", agg},
          {"failures", failures}};
}

std::string format_aggregate(const RunOutcome& run) {
  std::ostringstream os;
  os << run.spec.label() << "  (" << (run.spec.repeats - run.failures) << "/" << run.spec.repeats
     << " repeats)\n";
  if (run.failures == run.spec.repeats) {
    os << "  no successful repeats\n";
    return os.str();
  }
  os << std::fixed << std::setprecision(4);
  for (const std::string& f : report_fields()) {
    const auto it = run.aggregate.find(f);
    if (it == run.aggregate.end()) continue;
    os << "  " << std::left << std::setw(26) << f << std::right << std::setw(10) << it->second.mean
       << " +/- " << it->second.stderr_ << '\n';
  }
  return os.str();
}

std::string comparison_csv(const std::vector<RunOutcome>& runs) {
  std::ostringstream os;
  os.precision(10);
  os << "label,dataset,model,objective,loss,epsilon,num_inducing,ard,repeats,failures";
  for (const std::string& f : report_fields()) os << ',' << f << ',' << f << "_stderr";
  os << '\n';
  for (const RunOutcome& r : runs) {
    const RunSpec& s = r.spec;
    os << s.label() << ',' << s.dataset << ',' << s.model << ',' << to_string(s.objective) << ','
       << to_string(s.bound.loss.kind) << ',' << s.bound.loss.epsilon << ',' << s.num_inducing << ','
       << (s.ard ? 1 : 0) << ',' << s.repeats << ',' << r.failures;
    for (const std::string& f : report_fields()) {
      const FieldStat& st = r.aggregate.at(f);
      os << ',' << st.mean << ',' << st.stderr_;
    }
    os << '\n';
  }
  return os.str();
}

TrainResult restart_study(const RunSpec& spec, int restarts) {
  spec.validate();
  if (restarts < 1) throw UsageError("--restarts must be >= 1");
  const Split split = prepare_split(spec, 0);
  TrainConfig tc = spec.train;
  tc.objective = spec.objective;
  tc.init_seed = spec.seed;
  if (spec.model == "full") {
    FullGPState init;
    init.hyper = initial_hyper(spec, split.train.dim());
    init.train_inputs = split.train.X;
    init.train_targets = split.train.y;
    FullProblem problem(init, spec.objective, spec.bound);
    return multi_restart_study(problem, tc, restarts);
  }
  SparseGPState init;
  init.hyper = initial_hyper(spec, split.train.dim());
  init.inducing_inputs = initial_inducing(split.train, spec.num_inducing, spec.seed);
  init.alpha = spec.alpha;
  if (spec.free_form) init.init_free_form_at_prior();
  SparseLayout layout;
  layout.optimize_alpha = tc.optimize_alpha;
  layout.optimize_inducing = tc.optimize_inducing;
  SparseProblem problem(init, split.train.X, split.train.y, spec.objective, spec.bound, layout);
  return multi_restart_study(problem, tc, restarts);
}

std::string restarts_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "restart,init_noise_variance,noise_variance,objective,kl_over_n,risk,failed,best\n";
  for (const RestartOutcome& r : result.restarts) {
    os << r.restart << ',' << r.init_noise_variance << ',' << r.noise_variance << ',' << r.objective
       << ',' << r.kl_over_n << ',' << r.risk << ',' << (r.failed ? 1 : 0) << ','
       << (r.restart == result.best_restart ? 1 : 0) << '\n';
  }
  return os.str();
}

namespace {

Dataset align_columns(const StoredModel& model, const Dataset& raw, Eigen::Index dim) {
  if (model.feature_names.empty() || raw.feature_names.empty()) {
    if (raw.dim() != dim) {
      throw UsageError("evaluation data has " + std::to_string(raw.dim()) +
                       " features, the model expects " + std::to_string(dim));
    }
    return raw;
  }
  Dataset out = raw;
  out.X.resize(raw.size(), dim);
  out.feature_names = model.feature_names;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const std::string& name = model.feature_names[static_cast<size_t>(j)];
    const auto it = std::find(raw.feature_names.begin(), raw.feature_names.end(), name);
    if (it == raw.feature_names.end()) {
      throw UsageError("evaluation data lacks the feature column '" + name + "'");
    }
    out.X.col(j) = raw.X.col(it - raw.feature_names.begin());
  }
  return out;
}

}  // namespace

BoundReport evaluate_model(const StoredModel& model, const Dataset* raw_test) {
  const bool full = model.kind == "full";
  const Eigen::MatrixXd& train_x = full ? model.full.train_inputs : model.train_inputs;
  const Eigen::VectorXd& train_y = full ? model.full.train_targets : model.train_targets;
  Dataset train;
  train.X = train_x;
  train.y = train_y;
  Dataset test = train;
  if (raw_test) {
    test = align_columns(model, *raw_test, train_x.cols());
    if (model.feature_means.size() == test.dim() && model.feature_sds.size() == test.dim()) {
      for (Eigen::Index j = 0; j < test.dim(); ++j) {
        test.X.col(j) = (test.X.col(j).array() - model.feature_means(j)) / model.feature_sds(j);
      }
      test.y = (test.y.array() - model.target_mean) / model.target_sd;
    }
  }
  BoundReport rep = full ? build_report(model.full, test, model.bound)
                         : build_report(model.sparse, train, test, model.bound);
  rep.metadata.objective = model.objective;
  rep.gibbs_train_undiscretized = rep.gibbs_train;
  return rep;
}

std::vector<SweepRow> discretization_sweep(const SweepSpec& spec, int workers) {
  if (spec.half_widths.empty() || spec.digits.empty()) throw UsageError("empty sweep grid");
  for (double L : spec.half_widths) {
    if (!(L > 0.0)) throw UsageError("grid half-widths must be positive");
  }
  for (int r : spec.digits) {
    if (r < 0) throw UsageError("grid digits must be >= 0");
  }
  if (spec.repeats < 1) throw UsageError("repeats must be >= 1");
  if (workers <= 0) workers = default_workers();

  const size_t cells = spec.half_widths.size() * spec.digits.size();
  std::vector<SweepRow> rows(cells * static_cast<size_t>(spec.repeats));
  std::vector<std::string> errors;
  std::mutex err_mu;

  auto run_one = [&](int rep) {
    const unsigned long long seed = spec.seed + static_cast<unsigned long long>(rep);
    const SyntheticGP g =
        sample_synthetic_gp(spec.n_train, spec.n_test, spec.dim, seed, spec.noise_variance);
    BoundConfig base;
    base.delta = spec.delta;
    base.loss.kind = LossKind::kZeroOne;
    base.loss.epsilon = spec.epsilon;
    TrainConfig tc = spec.train;
    tc.objective = ObjectiveKind::kPacKl;
    tc.init_seed = seed;
    FullGPState init;
    init.hyper = HyperParams::with_ard(spec.dim, 0.0, 0.0);
    init.train_inputs = g.train.X;
    init.train_targets = g.train.y;
    const FullGPState reference = train_full(init, tc, base, nullptr);

    TrainConfig warm = tc;
    warm.restart_count = 1;
    size_t k = 0;
    for (double L : spec.half_widths) {
      for (int r : spec.digits) {
        BoundConfig cfg = base;
        cfg.grid_half_width = L;
        cfg.grid_digits = r;
        const FullGPState pre = train_full(reference, warm, cfg, nullptr);
        const FullGP gp_pre(pre);
        const FullGPState post_state = discretized(pre, cfg);
        const BoundReport post = build_report(post_state, g.test, cfg);
        SweepRow row;
        row.half_width = L;
        row.digits = r;
        row.repeat = rep;
        row.ln_theta_card = post.penalty.ln_theta_card;
        row.B = post.B;
        row.B_pinsker = post.B_pinsker;
        row.gibbs_train_pre = gibbs_risk(cfg.loss, g.train.y, gp_pre.predict_train());
        row.gibbs_test_pre = gibbs_risk(cfg.loss, g.test.y, gp_pre.predict(g.test.X));
        const double kl_pre = gp_pre.kl();
        row.kl_over_n_pre = kl_pre / static_cast<double>(spec.n_train);
        const PenaltyTerms pen_pre = penalty(spec.n_train, pre.hyper.component_count(), kl_pre, cfg);
        row.B_pre = pac_bound(row.gibbs_train_pre, kl_pre, pen_pre, spec.n_train);
        row.gibbs_train_post = post.gibbs_train;
        row.gibbs_test_post = post.gibbs_test;
        row.kl_over_n_post = post.kl_over_n;
        rows[static_cast<size_t>(rep) * cells + k++] = row;
      }
    }
  };

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.repeats; i = next++) {
      try {
        run_one(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        errors.push_back("repeat " + std::to_string(i) + ": " + e.what());
      }
    }
  };
  const int n_threads = std::min(workers, spec.repeats);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (!errors.empty()) throw NumericError("discretization sweep failed: " + errors.front());
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "L,r,repeat,ln_theta_card,B,B_pinsker,B_pre,gibbs_train_pre,gibbs_train_post,"
        "gibbs_test_pre,gibbs_test_post,kl_over_n_pre,kl_over_n_post\n";
  for (const SweepRow& r : rows) {
    os << r.half_width << ',' << r.digits << ',' << r.repeat << ',' << r.ln_theta_card << ','
       << r.B << ',' << r.B_pinsker << ',' << r.B_pre << ',' << r.gibbs_train_pre << ','
       << r.gibbs_train_post << ',' << r.gibbs_test_pre << ',' << r.gibbs_test_post << ','
       << r.kl_over_n_pre << ',' << r.kl_over_n_post << '\n';
  }
  return os.str();
}

}  // namespace pacgp
