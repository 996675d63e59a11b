#pragma once

#include <vector>

#include <Eigen/Dense>

namespace pacgp {

/// Squared-exponential kernel hyperparameters in log space.
///
/// K(x,x') = sigma_s^2 exp(-1/2 sum_i (x_i - x'_i)^2 / l_i^2) with
/// log_lengthscales holding ln(l_i^2) (one entry per input dimension for ARD,
/// a single shared entry otherwise) and log_signal_variance = ln(sigma_s^2).
/// These are the prior hyperparameters that get discretized and penalized.
struct HyperParams {
  Eigen::VectorXd log_lengthscales;
  double log_signal_variance = 0.0;
  bool ard = false;

  static HyperParams isotropic(double log_lengthscale_sq = 0.0, double log_signal_variance = 0.0);
  static HyperParams with_ard(Eigen::Index dim, double log_lengthscale_sq = 0.0,
                              double log_signal_variance = 0.0);

  /// Number of penalized components T (d+1 for ARD, 2 otherwise).
  Eigen::Index component_count() const { return log_lengthscales.size() + 1; }
  double signal_variance() const;
  /// 1 / l_k^2 for input dimension k.
  double inverse_sq_lengthscale(Eigen::Index k) const;

  /// Packs (log_lengthscales..., log_signal_variance).
  Eigen::VectorXd to_vector() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& packed);

  /// Throws DimensionError unless compatible with inputs of dimension d.
  void check_dimension(Eigen::Index d) const;
};

/// Constant mean function m(x) = constant.
struct MeanFunction {
  double constant = 0.0;
  Eigen::VectorXd at(Eigen::Index n) const { return Eigen::VectorXd::Constant(n, constant); }
};

/// Gram matrix K(A, B); rows of A and B are inputs.
Eigen::MatrixXd gram(const HyperParams& params, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// diag K(A, A), constant sigma_s^2.
Eigen::VectorXd gram_diag(const HyperParams& params, Eigen::Index n);

/// dK/d(packed log-parameter j) for each packed component j.
std::vector<Eigen::MatrixXd> gram_grad(const HyperParams& params, const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& B);

/// Contraction sum_ab adjoint(a,b) dK(a,b)/d(log-parameter j) for every packed
/// component, given K = K(A,B) already evaluated. K may carry a diagonal
/// jitter proportional to sigma_s^2; such jitter is consistently scaled by the
/// signal-variance derivative.
Eigen::VectorXd hyper_gradient(const HyperParams& params, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                               const Eigen::MatrixXd& adjoint);

/// Gradient of sum_ab adjoint(a,b) K(a_a, b_b) with respect to the rows of A
/// (B held fixed).
Eigen::MatrixXd input_gradient(const HyperParams& params, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                               const Eigen::MatrixXd& adjoint);

}  // namespace pacgp
