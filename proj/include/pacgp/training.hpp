#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pacgp/bound.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/sparse_gp.hpp"

namespace pacgp {

enum class OptimizerKind { kLbfgs, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  ObjectiveKind objective = ObjectiveKind::kPacKl;
  OptimizerKind optimizer = OptimizerKind::kLbfgs;
  int max_iters = 2000;
  /// Adam step size and moment decay rates.
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Stop when the objective decreased by less than tolerance*|f| over the
  /// last `window` iterations (Adam), or per iteration (L-BFGS).
  double tolerance = 1e-7;
  int window = 20;
  int restart_count = 1;
  unsigned long long init_seed = 0;
  /// 0 = full batch. A positive value forces Adam.
  Eigen::Index minibatch_size = 0;
  bool optimize_alpha = false;
  bool optimize_inducing = true;
  /// Soft floor on sigma_n^2, enforced by a quadratic barrier on ln sigma_n^2.
  double min_noise_variance = 1e-8;
  /// Range for the log-uniform sigma_n^2 draw of restarts after the first.
  double restart_noise_lo = 1e-5;
  double restart_noise_hi = 10.0;
  /// Keep the log hyperparameters inside the discretization range [-L, L]
  /// with a quadratic barrier, so the final rounding never clamps.
  bool confine_hyper = true;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double kl_over_n = 0.0;
  double risk = 0.0;
};

/// Scalar objective over a packed parameter vector.
class ObjectiveProblem {
 public:
  virtual ~ObjectiveProblem() = default;
  virtual Eigen::VectorXd parameters() const = 0;
  virtual void set_parameters(const Eigen::VectorXd& x) = 0;
  virtual Evaluation evaluate(const Eigen::VectorXd& x, bool want_grad,
                              const std::vector<Eigen::Index>* batch = nullptr) const = 0;
  virtual Eigen::Index num_points() const = 0;
  /// Index of ln sigma_n^2 in the packed vector.
  virtual Eigen::Index noise_index() const = 0;
  virtual ObjectiveKind objective() const = 0;
  /// Half-width L of the hyperparameter grid (the first noise_index()
  /// entries of the packed vector are the log hyperparameters).
  virtual double hyper_box() const = 0;
  /// Prepares restart number `k` (k >= 1) from the initial state.
  virtual void perturb_for_restart(unsigned long long seed, double log_noise) = 0;
  virtual std::unique_ptr<ObjectiveProblem> clone() const = 0;
  /// Copies the full model state from a problem of the same type.
  virtual void assign_state(const ObjectiveProblem& other) = 0;
};

class FullProblem : public ObjectiveProblem {
 public:
  FullProblem(FullGPState state, ObjectiveKind objective, BoundConfig cfg);
  Eigen::VectorXd parameters() const override { return pack_parameters(state_); }
  void set_parameters(const Eigen::VectorXd& x) override { unpack_parameters(state_, x); }
  Evaluation evaluate(const Eigen::VectorXd& x, bool want_grad,
                      const std::vector<Eigen::Index>* batch) const override;
  Eigen::Index num_points() const override { return state_.train_targets.size(); }
  Eigen::Index noise_index() const override { return state_.hyper.component_count(); }
  ObjectiveKind objective() const override { return objective_; }
  double hyper_box() const override { return cfg_.grid_half_width; }
  void perturb_for_restart(unsigned long long seed, double log_noise) override;
  std::unique_ptr<ObjectiveProblem> clone() const override;
  void assign_state(const ObjectiveProblem& other) override;
  const FullGPState& state() const { return state_; }

 private:
  FullGPState state_;
  ObjectiveKind objective_;
  BoundConfig cfg_;
};

class SparseProblem : public ObjectiveProblem {
 public:
  SparseProblem(SparseGPState state, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                ObjectiveKind objective, BoundConfig cfg, SparseLayout layout);
  Eigen::VectorXd parameters() const override { return pack_parameters(state_, layout_); }
  void set_parameters(const Eigen::VectorXd& x) override { unpack_parameters(state_, layout_, x); }
  Evaluation evaluate(const Eigen::VectorXd& x, bool want_grad,
                      const std::vector<Eigen::Index>* batch) const override;
  Eigen::Index num_points() const override { return targets_->size(); }
  Eigen::Index noise_index() const override { return state_.hyper.component_count(); }
  ObjectiveKind objective() const override { return objective_; }
  double hyper_box() const override { return cfg_.grid_half_width; }
  /// Draws a new inducing subset from the training inputs.
  void perturb_for_restart(unsigned long long seed, double log_noise) override;
  std::unique_ptr<ObjectiveProblem> clone() const override;
  void assign_state(const ObjectiveProblem& other) override;
  const SparseGPState& state() const { return state_; }

 private:
  SparseGPState state_;
  std::shared_ptr<const Eigen::MatrixXd> inputs_;
  std::shared_ptr<const Eigen::VectorXd> targets_;
  ObjectiveKind objective_;
  BoundConfig cfg_;
  SparseLayout layout_;
};

struct RestartOutcome {
  int restart = 0;
  double init_noise_variance = 0.0;
  double noise_variance = 0.0;
  double objective = 0.0;
  double kl_over_n = 0.0;
  double risk = 0.0;
  bool failed = false;
  std::string diagnostic;
};

struct TrainResult {
  Eigen::VectorXd parameters;
  std::vector<TraceRow> trace;  // of the selected restart
  std::vector<RestartOutcome> restarts;
  int best_restart = 0;
  double objective = 0.0;
};

/// Minimizes the problem's objective; the problem is left at the best
/// parameters found over all restarts. Throws NumericError if every restart
/// fails.
TrainResult train(ObjectiveProblem& problem, const TrainConfig& cfg);

/// Convenience wrappers returning the trained state.
FullGPState train_full(const FullGPState& init, const TrainConfig& cfg, const BoundConfig& bound,
                       TrainResult* result = nullptr);
SparseGPState train_sparse(const SparseGPState& init, const Eigen::MatrixXd& inputs,
                           const Eigen::VectorXd& targets, const TrainConfig& cfg,
                           const BoundConfig& bound, TrainResult* result = nullptr);

/// Runs `restarts` independent trainings with sigma_n^2 initialized
/// log-uniformly in [restart_noise_lo, restart_noise_hi] and reports every
/// outcome; the best one is flagged through best_restart.
TrainResult multi_restart_study(ObjectiveProblem& problem, const TrainConfig& cfg, int restarts);

/// Worst relative deviation between the analytic gradient and central
/// differences over all parameters. Relative error uses
/// max(|fd_i|, 1e-3*max|fd|, 1e-10) as denominator.
double gradient_check(const ObjectiveProblem& problem, const Eigen::VectorXd& x,
                      double step = 1e-6);

/// Writes iteration,objective,kl_over_n,risk.
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace pacgp
