#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "pacgp/bound.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/kernels.hpp"
#include "pacgp/linalg.hpp"
#include "pacgp/losses.hpp"

namespace pacgp {

enum class SparseMode {
  /// a_M, B_MM prescribed by the data through alpha (1 = FITC, 0 = VFE/DTC).
  kParametrized,
  /// a_M and chol(B_MM) are free parameters.
  kFreeForm,
};

struct SparseGPState {
  HyperParams hyper;
  MeanFunction mean;
  double log_noise_variance = std::log(0.1);
  Eigen::MatrixXd inducing_inputs;  // M x d
  SparseMode mode = SparseMode::kParametrized;
  double alpha = 1.0;
  Eigen::VectorXd free_mean;  // a_M, free-form mode
  Eigen::MatrixXd free_chol;  // lower-triangular, B_MM = L L^T, free-form mode

  Eigen::Index num_inducing() const { return inducing_inputs.rows(); }
  /// Puts the state into free-form mode at the prior (a_M = m_M,
  /// chol_B = chol(K_MM)), where KL = 0.
  void init_free_form_at_prior();
};

struct InducingPosterior {
  Eigen::VectorXd a;  // a_M
  Eigen::MatrixXd B;  // B_MM
};

/// Sparse GP posterior for a training set. All work is O(N M^2 + M^3) time and
/// O(N M + M^2) memory; no N x N matrix is ever formed. Immutable after
/// construction.
class SparseGP {
 public:
  /// `alpha_override`, when in [0,1], replaces state.alpha (used by the
  /// likelihood variants, which fix alpha by convention).
  SparseGP(SparseGPState state, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
           double alpha_override = -1.0);

  const SparseGPState& state() const { return state_; }
  Eigen::Index size() const { return targets_.size(); }
  double alpha() const { return alpha_; }

  InducingPosterior posterior() const;
  PredictiveMoments predict(const Eigen::MatrixXd& test_inputs) const;
  PredictiveMoments predict_train() const;
  double kl() const;
  /// Sparse negative log marginal likelihood; `trace_term` adds
  /// sum(Lambda)/(2 sigma_n^2) (VFE).
  double nll(bool trace_term) const;
  /// Smallest Schur-complement diagonal before clamping.
  double min_raw_lambda() const { return min_raw_lambda_; }

  /// Gradient of the seeded combination of outputs. Returned pieces follow the
  /// packed layout of sparse parameters.
  struct Gradient {
    Eigen::VectorXd hyper;
    double log_noise = 0.0;
    Eigen::MatrixXd inducing;  // M x d
    double alpha = 0.0;
    Eigen::VectorXd free_mean;
    Eigen::MatrixXd free_chol;  // lower-triangular
  };
  Gradient backprop(const ObjectiveSeeds& seeds, bool trace_term) const;

 private:
  void factor_parametrized();
  void factor_free_form();

  SparseGPState state_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd targets_;
  Eigen::VectorXd residual_;
  double alpha_ = 1.0;
  double noise_ = 0.0;

  Eigen::MatrixXd Kmm_;  // jittered
  JitteredCholesky chol_m_;
  Eigen::MatrixXd Kmn_;
  Eigen::MatrixXd A_;    // Lm^{-1} Kmn
  Eigen::VectorXd lambda_;
  Eigen::Array<bool, Eigen::Dynamic, 1> lambda_active_;
  double min_raw_lambda_ = 0.0;
  Eigen::VectorXd D_;

  // parametrized mode
  JitteredCholesky chol_c_;
  Eigen::MatrixXd Cinv_;
  Eigen::VectorXd c_;

  // free-form mode
  Eigen::MatrixXd W_;  // Lm^{-1} L_B
  double logdet_B_ = 0.0;
  bool singular_B_ = false;

  // Whitened posterior over Lm^{-1}(u - m): mean v and covariance. Every
  // gradient is formed from these and A_, never from an explicit Kmm^{-1}.
  Eigen::VectorXd whitened_mean_;
  Eigen::MatrixXd whitened_cov_;
};

/// Spec-level entry points.
InducingPosterior inducing_posterior_params(const SparseGPState& state,
                                            const Eigen::MatrixXd& inputs,
                                            const Eigen::VectorXd& targets);
PredictiveMoments sparse_predict(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets,
                                 const Eigen::MatrixXd& test_inputs);
double kl_sparse(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                 const Eigen::VectorXd& targets);
double sparse_nll(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, ObjectiveKind variant);

/// Which sparse parameters are packed for optimization.
struct SparseLayout {
  bool optimize_inducing = true;
  bool optimize_alpha = false;
  Eigen::Index size(const SparseGPState& state) const;
};

/// Layout: log hyperparameters, ln sigma_n^2, Z row-major, [alpha],
/// [free-form a_M, then the lower triangle of chol_B column by column].
Eigen::VectorXd pack_parameters(const SparseGPState& state, const SparseLayout& layout);
void unpack_parameters(SparseGPState& state, const SparseLayout& layout,
                       const Eigen::VectorXd& packed);

/// alpha implied by a likelihood variant (fitc 1, vfe/dtc 0), or -1 for PAC
/// objectives, which use the state's alpha.
double variant_alpha(ObjectiveKind objective);

Evaluation sparse_objective_grad(const SparseGPState& state, ObjectiveKind objective,
                                 const BoundConfig& cfg, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets, const SparseLayout& layout,
                                 bool want_grad = true,
                                 const std::vector<Eigen::Index>* batch = nullptr);

}  // namespace pacgp
