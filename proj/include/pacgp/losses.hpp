#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pacgp {

enum class LossKind { kZeroOne, kClippedSquare, kInvGauss, kBand };

std::string to_string(LossKind kind);
/// Accepts "zero-one", "clipped-square", "inv-gauss", "band-rel" (and
/// underscore spellings). Throws UsageError otherwise.
LossKind parse_loss_kind(const std::string& name);

/// Bounded loss with accuracy scale epsilon. For kBand the admissible interval
/// is [r-(y), r+(y)] with r±(y) = y ± epsilon*max(|y|, 1e-12) when `relative`
/// is set and y ± epsilon otherwise.
struct LossSpec {
  LossKind kind = LossKind::kZeroOne;
  double epsilon = 0.6;
  bool relative = true;

  double band_lo(double y) const;
  double band_hi(double y) const;
  void validate() const;
};

/// Gaussian predictive moments at a set of inputs.
struct PredictiveMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// Standard normal cdf via erfc, accurate in both tails.
double normal_cdf(double x);
double normal_pdf(double x);

/// Loss of predicting yhat when the target is y, in [0,1].
double pointwise_loss(const LossSpec& spec, double y, double yhat);

/// Value and partial derivatives of E_{v ~ N(mhat, sdev^2)} loss(y, v).
struct GibbsPoint {
  double value = 0.0;
  double d_mean = 0.0;
  double d_sdev = 0.0;
};

GibbsPoint gibbs_pointwise_grad(const LossSpec& spec, double y, double mhat, double sdev);
double gibbs_pointwise(const LossSpec& spec, double y, double mhat, double sdev);

/// Mean Gibbs risk over the data set.
double gibbs_risk(const LossSpec& spec, const Eigen::VectorXd& targets,
                  const PredictiveMoments& moments);

/// Risk over an index subset, with derivatives per point with respect to the
/// predictive mean and variance (zero outside the subset). An empty `batch`
/// pointer means all points.
struct RiskWithMomentGrad {
  double value = 0.0;
  Eigen::VectorXd d_mean;
  Eigen::VectorXd d_var;
};

RiskWithMomentGrad gibbs_risk_moment_grad(const LossSpec& spec, const Eigen::VectorXd& targets,
                                          const PredictiveMoments& moments,
                                          const std::vector<Eigen::Index>* batch = nullptr);

/// Chain rule through parameter derivatives of the moments: d_mean and d_var
/// are N x P Jacobians. Returns the P-vector gradient of gibbs_risk.
Eigen::VectorXd gibbs_risk_grad(const LossSpec& spec, const Eigen::VectorXd& targets,
                                const PredictiveMoments& moments, const Eigen::MatrixXd& d_mean,
                                const Eigen::MatrixXd& d_var);

/// Mean Gibbs loss over the batch indices. Throws on an empty batch.
double minibatch_risk(const LossSpec& spec, const Eigen::VectorXd& targets,
                      const PredictiveMoments& moments, const std::vector<Eigen::Index>& batch);

}  // namespace pacgp
