#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "pacgp/bound.hpp"
#include "pacgp/kernels.hpp"
#include "pacgp/linalg.hpp"
#include "pacgp/losses.hpp"

namespace pacgp {

struct FullGPState {
  HyperParams hyper;
  MeanFunction mean;
  double log_noise_variance = std::log(0.1);
  Eigen::MatrixXd train_inputs;
  Eigen::VectorXd train_targets;
};

/// Objective value and gradient with respect to a model's packed parameters.
struct Evaluation {
  double objective = 0.0;
  double risk = 0.0;
  double kl = 0.0;
  double nll = 0.0;
  Eigen::VectorXd gradient;
};

/// Exact GP posterior conditioned on the training set, with everything derived
/// from one Cholesky factor of K + sigma_n^2 I. Immutable after construction.
class FullGP {
 public:
  explicit FullGP(FullGPState state);

  const FullGPState& state() const { return state_; }
  Eigen::Index size() const { return state_.train_targets.size(); }
  /// sigma_n^2 plus any jitter the factorization needed.
  double effective_noise_variance() const { return noise_; }

  /// Latent predictive moments (no additive noise).
  PredictiveMoments predict(const Eigen::MatrixXd& test_inputs) const;
  PredictiveMoments predict_train() const;

  double kl() const;
  double nll() const;

  /// Gradient of d_kl*KL + d_nll*NLL + <d_mean, mean_train> + <d_var, var_train>
  /// with respect to (log hyperparameters..., ln sigma_n^2).
  Eigen::VectorXd backprop(const ObjectiveSeeds& seeds) const;

 private:
  FullGPState state_;
  Eigen::MatrixXd K_;
  JitteredCholesky chol_;
  Eigen::VectorXd residual_;
  Eigen::VectorXd alpha_;  // Ky^{-1} r
  Eigen::MatrixXd Kinv_;
  double noise_ = 0.0;
};

PredictiveMoments full_predict(const FullGPState& state, const Eigen::MatrixXd& test_inputs);
double kl_full(const FullGPState& state);
double nll_full(const FullGPState& state);

/// Packed parameters (log hyperparameters..., ln sigma_n^2).
Eigen::VectorXd pack_parameters(const FullGPState& state);
void unpack_parameters(FullGPState& state, const Eigen::VectorXd& packed);

/// Objective and gradient with respect to the packed parameters. kNll is the
/// negative log marginal likelihood; the sparse variants are rejected.
Evaluation full_objective_grad(const FullGPState& state, ObjectiveKind objective,
                               const BoundConfig& cfg, bool want_grad = true,
                               const std::vector<Eigen::Index>* batch = nullptr);

}  // namespace pacgp
