#include "pacgp/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <ceres/ceres.h>

#include "pacgp/errors.hpp"
#include "pacgp/log.hpp"

namespace pacgp {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "lbfgs";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "lbfgs" || name == "l-bfgs") return OptimizerKind::kLbfgs;
  if (name == "adam") return OptimizerKind::kAdam;
  throw UsageError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (max_iters < 1) throw UsageError("max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (restart_count < 1) throw UsageError("restart count must be >= 1");
  if (minibatch_size < 0) throw UsageError("minibatch size must be >= 0");
  if (window < 1) throw UsageError("convergence window must be >= 1");
  if (!(restart_noise_lo > 0.0 && restart_noise_hi > restart_noise_lo)) {
    throw UsageError("restart noise range must satisfy 0 < lo < hi");
  }
}

FullProblem::FullProblem(FullGPState state, ObjectiveKind objective, BoundConfig cfg)
    : state_(std::move(state)), objective_(objective), cfg_(std::move(cfg)) {
  if (objective_ != ObjectiveKind::kNll && !is_pac(objective_)) {
    throw UsageError("full GP objectives are pac-kl, pac-sqrt and mle");
  }
}

Evaluation FullProblem::evaluate(const Eigen::VectorXd& x, bool want_grad,
                                 const std::vector<Eigen::Index>* batch) const {
  FullGPState s = state_;
  unpack_parameters(s, x);
  return full_objective_grad(s, objective_, cfg_, want_grad, batch);
}

void FullProblem::perturb_for_restart(unsigned long long, double log_noise) {
  state_.log_noise_variance = log_noise;
}

std::unique_ptr<ObjectiveProblem> FullProblem::clone() const {
  return std::make_unique<FullProblem>(*this);
}

void FullProblem::assign_state(const ObjectiveProblem& other) {
  state_ = dynamic_cast<const FullProblem&>(other).state_;
}

SparseProblem::SparseProblem(SparseGPState state, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets, ObjectiveKind objective,
                             BoundConfig cfg, SparseLayout layout)
    : state_(std::move(state)),
      inputs_(std::make_shared<const Eigen::MatrixXd>(inputs)),
      targets_(std::make_shared<const Eigen::VectorXd>(targets)),
      objective_(objective),
      cfg_(std::move(cfg)),
      layout_(layout) {
  if (objective_ == ObjectiveKind::kNll) {
    throw UsageError("sparse models take fitc, vfe or dtc as the likelihood objective");
  }
  const double a = variant_alpha(objective_);
  if (a >= 0.0) {
    state_.alpha = a;
    layout_.optimize_alpha = false;
  }
}

Evaluation SparseProblem::evaluate(const Eigen::VectorXd& x, bool want_grad,
                                   const std::vector<Eigen::Index>* batch) const {
  SparseGPState s = state_;
  unpack_parameters(s, layout_, x);
  return sparse_objective_grad(s, objective_, cfg_, *inputs_, *targets_, layout_, want_grad, batch);
}

void SparseProblem::perturb_for_restart(unsigned long long seed, double log_noise) {
  state_.log_noise_variance = log_noise;
  if (!layout_.optimize_inducing) return;
  const Eigen::Index n = inputs_->rows();
  const Eigen::Index m = state_.num_inducing();
  if (m > n) return;
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Eigen::Index i = 0; i < m; ++i) {
    state_.inducing_inputs.row(i) = inputs_->row(idx[static_cast<size_t>(i)]);
  }
  if (state_.mode == SparseMode::kFreeForm) state_.init_free_form_at_prior();
}

std::unique_ptr<ObjectiveProblem> SparseProblem::clone() const {
  return std::make_unique<SparseProblem>(*this);
}

void SparseProblem::assign_state(const ObjectiveProblem& other) {
  state_ = dynamic_cast<const SparseProblem&>(other).state_;
}

namespace {

// Soft quadratic walls: ln sigma_n^2 above its floor, and optionally the log
// hyperparameters inside the discretization range so rounding them at the end
// does not clamp.
struct BarrierSpec {
  Eigen::Index index = 0;
  double log_floor = 0.0;
  double weight = 0.0;
  Eigen::Index hyper_count = 0;
  double box = 0.0;
  double box_weight = 0.0;

  double apply(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    double value = 0.0;
    const double v = log_floor - x(index);
    if (v > 0.0) {
      if (grad) (*grad)(index) -= 2.0 * weight * v;
      value += weight * v * v;
    }
    for (Eigen::Index k = 0; k < hyper_count; ++k) {
      const double over = std::abs(x(k)) - box;
      if (over <= 0.0) continue;
      if (grad) (*grad)(k) += 2.0 * box_weight * over * (x(k) > 0.0 ? 1.0 : -1.0);
      value += box_weight * over * over;
    }
    return value;
  }
};

BarrierSpec make_barrier(const ObjectiveProblem& p, const TrainConfig& cfg) {
  BarrierSpec b;
  b.index = p.noise_index();
  b.log_floor = std::log(cfg.min_noise_variance);
  const double scale = is_pac(p.objective()) ? 1.0 : static_cast<double>(p.num_points());
  b.weight = 10.0 * scale;
  if (cfg.confine_hyper && p.hyper_box() > 0.0) {
    b.hyper_count = p.noise_index();
    // a little inside the range so the rounded value stays on the grid
    b.box = p.hyper_box() - 1e-3;
    b.box_weight = 100.0 * scale;
  }
  return b;
}

TraceRow row_from(int it, const Evaluation& ev, Eigen::Index n) {
  return {it, ev.objective, ev.kl / static_cast<double>(n), ev.risk};
}

struct RunOutput {
  Eigen::VectorXd x;
  std::vector<TraceRow> trace;
  Evaluation final_eval;
};

class CeresObjective : public ceres::FirstOrderFunction {
 public:
  CeresObjective(const ObjectiveProblem& p, BarrierSpec barrier)
      : problem_(p), barrier_(barrier), n_(p.parameters().size()) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(parameters, n_);
    Evaluation ev;
    try {
      ev = problem_.evaluate(x, gradient != nullptr, nullptr);
    } catch (const NumericError&) {
      return false;
    }
    if (!std::isfinite(ev.objective)) return false;
    Eigen::VectorXd g;
    if (gradient) {
      g = ev.gradient;
      if (!g.allFinite()) return false;
    }
    *cost = ev.objective + barrier_.apply(x, gradient ? &g : nullptr);
    if (gradient) Eigen::Map<Eigen::VectorXd>(gradient, n_) = g;
    last_x_ = x;
    last_ = ev;
    return true;
  }

  int NumParameters() const override { return static_cast<int>(n_); }

  const Eigen::VectorXd& last_x() const { return last_x_; }
  const Evaluation& last() const { return last_; }

 private:
  const ObjectiveProblem& problem_;
  BarrierSpec barrier_;
  Eigen::Index n_;
  mutable Eigen::VectorXd last_x_;
  mutable Evaluation last_;
};

class TraceCallback : public ceres::IterationCallback {
 public:
  TraceCallback(const ObjectiveProblem& p, const CeresObjective& f, const double* x,
                Eigen::Index n, std::vector<TraceRow>& trace)
      : problem_(p), f_(f), x_(x), n_(n), trace_(trace) {}

  ceres::CallbackReturnType operator()(const ceres::IterationSummary& summary) override {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(x_, n_);
    Evaluation ev;
    if (f_.last_x().size() == n_ && f_.last_x() == x) {
      ev = f_.last();
    } else {
      try {
        ev = problem_.evaluate(x, false, nullptr);
      } catch (const NumericError&) {
        return ceres::SOLVER_CONTINUE;
      }
    }
    trace_.push_back(row_from(summary.iteration, ev, problem_.num_points()));
    return ceres::SOLVER_CONTINUE;
  }

 private:
  const ObjectiveProblem& problem_;
  const CeresObjective& f_;
  const double* x_;
  Eigen::Index n_;
  std::vector<TraceRow>& trace_;
};

RunOutput run_lbfgs(const ObjectiveProblem& problem, const TrainConfig& cfg) {
  RunOutput out;
  Eigen::VectorXd x = problem.parameters();
  const Eigen::Index n = x.size();
  auto* fn = new CeresObjective(problem, make_barrier(problem, cfg));
  ceres::GradientProblem gp(fn);  // takes ownership
  TraceCallback callback(problem, *fn, x.data(), n, out.trace);
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::LBFGS;
  options.max_num_iterations = cfg.max_iters;
  options.function_tolerance = cfg.tolerance;
  options.gradient_tolerance = 1e-10;
  options.parameter_tolerance = 1e-10;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;
  options.update_state_every_iteration = true;
  options.callbacks.push_back(&callback);
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, gp, x.data(), &summary);
  log_info("L-BFGS: " + std::to_string(summary.iterations.size()) + " iterations, " + summary.message);
  if (summary.termination_type == ceres::FAILURE && summary.iterations.size() <= 1) {
    throw NumericError("L-BFGS failed: " + summary.message);
  }
  out.x = x;
  out.final_eval = problem.evaluate(x, false, nullptr);
  return out;
}

RunOutput run_adam(const ObjectiveProblem& problem, const TrainConfig& cfg,
                   unsigned long long seed) {
  RunOutput out;
  Eigen::VectorXd x = problem.parameters();
  const Eigen::Index dim = x.size();
  const Eigen::Index n = problem.num_points();
  const BarrierSpec barrier = make_barrier(problem, cfg);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
  double lr = cfg.learning_rate;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  const bool minibatch = cfg.minibatch_size > 0 && cfg.minibatch_size < n;
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  size_t cursor = order.size();
  std::vector<Eigen::Index> batch;

  std::vector<double> history;
  int failures = 0;
  int step = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const std::vector<Eigen::Index>* bp = nullptr;
    if (minibatch) {
      if (cursor + static_cast<size_t>(cfg.minibatch_size) > order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                   order.begin() + static_cast<std::ptrdiff_t>(cursor + cfg.minibatch_size));
      cursor += static_cast<size_t>(cfg.minibatch_size);
      bp = &batch;
    }
    Evaluation ev;
    bool ok = true;
    try {
      ev = problem.evaluate(x, true, bp);
      ok = std::isfinite(ev.objective) && ev.gradient.allFinite();
    } catch (const NumericError&) {
      ok = false;
    }
    if (!ok) {
      if (++failures > 20 || out.trace.empty()) {
        throw NumericError("Adam: non-finite objective or gradient at iteration " +
                           std::to_string(it));
      }
      // step back and shrink
      x = out.x;
      lr *= 0.5;
      continue;
    }
    out.x = x;
    out.trace.push_back(row_from(it, ev, n));
    Eigen::VectorXd g = ev.gradient;
    barrier.apply(x, &g);
    ++step;
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
    m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, step);
    const double c2 = 1.0 - std::pow(cfg.beta2, step);
    x.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + 1e-8);

    history.push_back(ev.objective);
    if (!minibatch && static_cast<int>(history.size()) > cfg.window) {
      const double past = history[history.size() - 1 - static_cast<size_t>(cfg.window)];
      if (past - ev.objective < cfg.tolerance * std::max(std::abs(past), 1e-12)) break;
    }
  }
  if (out.x.size() == 0) out.x = x;
  // accept the last step if it evaluates
  try {
    const Evaluation last = problem.evaluate(x, false, nullptr);
    if (std::isfinite(last.objective)) out.x = x;
  } catch (const NumericError&) {
  }
  out.final_eval = problem.evaluate(out.x, false, nullptr);
  return out;
}

RunOutput run_once(const ObjectiveProblem& problem, const TrainConfig& cfg,
                   unsigned long long seed) {
  const bool adam = cfg.optimizer == OptimizerKind::kAdam || cfg.minibatch_size > 0;
  return adam ? run_adam(problem, cfg, seed) : run_lbfgs(problem, cfg);
}

unsigned long long restart_seed(unsigned long long base, int k) {
  std::seed_seq seq{static_cast<unsigned>(base), static_cast<unsigned>(base >> 32),
                    static_cast<unsigned>(k), 0x5eedu};
  std::mt19937_64 rng(seq);
  return rng();
}

TrainResult run_restarts(ObjectiveProblem& problem, const TrainConfig& cfg, int restarts,
                         bool perturb_first) {
  cfg.validate();
  const std::unique_ptr<ObjectiveProblem> initial = problem.clone();
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  const Eigen::Index n = problem.num_points();
  std::vector<TraceRow> best_trace;
  for (int k = 0; k < restarts; ++k) {
    std::unique_ptr<ObjectiveProblem> p = initial->clone();
    const unsigned long long seed = restart_seed(cfg.init_seed, k);
    RestartOutcome outcome;
    outcome.restart = k;
    if (k > 0 || perturb_first) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(std::log(cfg.restart_noise_lo),
                                               std::log(cfg.restart_noise_hi));
      p->perturb_for_restart(seed + 1, u(rng));
    }
    outcome.init_noise_variance = std::exp(p->parameters()(p->noise_index()));
    try {
      RunOutput run = run_once(*p, cfg, seed);
      outcome.noise_variance = std::exp(run.x(p->noise_index()));
      outcome.objective = run.final_eval.objective;
      outcome.kl_over_n = run.final_eval.kl / static_cast<double>(n);
      outcome.risk = run.final_eval.risk;
      if (outcome.objective < best) {
        best = outcome.objective;
        result.best_restart = k;
        result.parameters = run.x;
        best_trace = std::move(run.trace);
        p->set_parameters(run.x);
        problem.assign_state(*p);
      }
    } catch (const NumericError& e) {
      outcome.failed = true;
      outcome.diagnostic = e.what();
      log_warning("restart " + std::to_string(k) + " failed: " + e.what());
    }
    result.restarts.push_back(outcome);
  }
  if (!std::isfinite(best)) throw NumericError("all restarts failed");
  result.objective = best;
  result.trace = std::move(best_trace);
  return result;
}

}  // namespace

TrainResult train(ObjectiveProblem& problem, const TrainConfig& cfg) {
  return run_restarts(problem, cfg, cfg.restart_count, false);
}

FullGPState train_full(const FullGPState& init, const TrainConfig& cfg, const BoundConfig& bound,
                       TrainResult* result) {
  FullProblem problem(init, cfg.objective, bound);
  TrainResult r = train(problem, cfg);
  if (result) *result = std::move(r);
  return problem.state();
}

SparseGPState train_sparse(const SparseGPState& init, const Eigen::MatrixXd& inputs,
                           const Eigen::VectorXd& targets, const TrainConfig& cfg,
                           const BoundConfig& bound, TrainResult* result) {
  SparseLayout layout;
  layout.optimize_alpha = cfg.optimize_alpha;
  layout.optimize_inducing = cfg.optimize_inducing;
  SparseProblem problem(init, inputs, targets, cfg.objective, bound, layout);
  TrainResult r = train(problem, cfg);
  if (result) *result = std::move(r);
  return problem.state();
}

TrainResult multi_restart_study(ObjectiveProblem& problem, const TrainConfig& cfg, int restarts) {
  return run_restarts(problem, cfg, restarts, true);
}

double gradient_check(const ObjectiveProblem& problem, const Eigen::VectorXd& x, double step) {
  const Eigen::VectorXd g = problem.evaluate(x, true, nullptr).gradient;
  Eigen::VectorXd fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi(i) += step;
    lo(i) -= step;
    fd(i) = (problem.evaluate(hi, false, nullptr).objective -
             problem.evaluate(lo, false, nullptr).objective) /
            (2.0 * step);
  }
  const double scale = fd.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double denom = std::max({std::abs(fd(i)), 1e-3 * scale, 1e-10});
    worst = std::max(worst, std::abs(g(i) - fd(i)) / denom);
  }
  return worst;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file " + path);
  out.precision(17);
  out << "iteration,objective,kl_over_n,risk\n";
  for (const TraceRow& r : trace) {
    out << r.iteration << ',' << r.objective << ',' << r.kl_over_n << ',' << r.risk << '\n';
  }
  if (!out) throw IoError("error writing trace file " + path);
}

}  // namespace pacgp
