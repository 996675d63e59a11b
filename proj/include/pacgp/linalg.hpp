#pragma once

#include <Eigen/Dense>

namespace pacgp {

/// Cholesky factor together with the diagonal jitter that had to be added.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  Eigen::MatrixXd lower() const { return llt.matrixL(); }
  double logdet() const;
};

/// Factors K + j*I. The first attempt uses `first_jitter`; on failure the
/// jitter grows by 10x while it stays below `max_jitter`. Throws NumericError
/// naming every attempted value if none succeeds. `first_jitter` may be 0.
JitteredCholesky robust_cholesky(const Eigen::MatrixXd& K, double first_jitter, double max_jitter);

/// Kernel-matrix policy: jitter from 1e-8*scale up to 1e-2*scale.
JitteredCholesky kernel_cholesky(const Eigen::MatrixXd& K, double scale);

/// Inverse of the factored matrix, from triangular solves.
Eigen::MatrixXd cholesky_inverse(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Kahan-Neumaier compensated sum.
double compensated_sum(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace pacgp
