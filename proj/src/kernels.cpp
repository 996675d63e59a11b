#include "pacgp/kernels.hpp"

#include <cmath>
#include <string>

#include "pacgp/errors.hpp"

namespace pacgp {

HyperParams HyperParams::isotropic(double log_lengthscale_sq, double log_signal_variance) {
  HyperParams p;
  p.log_lengthscales = Eigen::VectorXd::Constant(1, log_lengthscale_sq);
  p.log_signal_variance = log_signal_variance;
  p.ard = false;
  return p;
}

HyperParams HyperParams::with_ard(Eigen::Index dim, double log_lengthscale_sq,
                                  double log_signal_variance) {
  HyperParams p;
  p.log_lengthscales = Eigen::VectorXd::Constant(dim, log_lengthscale_sq);
  p.log_signal_variance = log_signal_variance;
  p.ard = true;
  return p;
}

double HyperParams::signal_variance() const { return std::exp(log_signal_variance); }

double HyperParams::inverse_sq_lengthscale(Eigen::Index k) const {
  return std::exp(-log_lengthscales(ard ? k : 0));
}

Eigen::VectorXd HyperParams::to_vector() const {
  Eigen::VectorXd v(component_count());
  v.head(log_lengthscales.size()) = log_lengthscales;
  v(v.size() - 1) = log_signal_variance;
  return v;
}

void HyperParams::assign(const Eigen::Ref<const Eigen::VectorXd>& packed) {
  if (packed.size() != component_count()) {
    throw DimensionError("hyperparameter vector has " + std::to_string(packed.size()) +
                         " entries, expected " + std::to_string(component_count()));
  }
  log_lengthscales = packed.head(log_lengthscales.size());
  log_signal_variance = packed(packed.size() - 1);
}

void HyperParams::check_dimension(Eigen::Index d) const {
  if (log_lengthscales.size() == 0) throw DimensionError("hyperparameters have no lengthscale");
  if (ard && log_lengthscales.size() != d) {
    throw DimensionError("ARD kernel has " + std::to_string(log_lengthscales.size()) +
                         " lengthscales for inputs of dimension " + std::to_string(d));
  }
  if (!ard && log_lengthscales.size() != 1) {
    throw DimensionError("isotropic kernel must have exactly one lengthscale");
  }
}

namespace {

void check_inputs(const HyperParams& params, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) {
    throw DimensionError("input dimension mismatch: " + std::to_string(A.cols()) + " vs " +
                         std::to_string(B.cols()));
  }
  params.check_dimension(A.cols());
}

Eigen::VectorXd inverse_sq_lengthscales(const HyperParams& params, Eigen::Index d) {
  Eigen::VectorXd w(d);
  for (Eigen::Index k = 0; k < d; ++k) w(k) = params.inverse_sq_lengthscale(k);
  return w;
}

}  // namespace

Eigen::MatrixXd gram(const HyperParams& params, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  check_inputs(params, A, B);
  const Eigen::Index d = A.cols();
  const Eigen::VectorXd w = inverse_sq_lengthscales(params, d);
  const double s2 = params.signal_variance();
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double r2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = A(i, k) - B(j, k);
        r2 += diff * diff * w(k);
      }
      K(i, j) = s2 * std::exp(-0.5 * r2);
    }
  }
  return K;
}

Eigen::VectorXd gram_diag(const HyperParams& params, Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, params.signal_variance());
}

std::vector<Eigen::MatrixXd> gram_grad(const HyperParams& params, const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& B) {
  const Eigen::MatrixXd K = gram(params, A, B);
  const Eigen::Index d = A.cols();
  const Eigen::Index nls = params.log_lengthscales.size();
  std::vector<Eigen::MatrixXd> out(static_cast<size_t>(nls + 1),
                                   Eigen::MatrixXd::Zero(A.rows(), B.rows()));
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = A(i, k) - B(j, k);
        const Eigen::Index slot = params.ard ? k : 0;
        out[static_cast<size_t>(slot)](i, j) +=
            K(i, j) * 0.5 * diff * diff * params.inverse_sq_lengthscale(k);
      }
    }
  }
  out.back() = K;
  return out;
}

Eigen::VectorXd hyper_gradient(const HyperParams& params, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                               const Eigen::MatrixXd& adjoint) {
  check_inputs(params, A, B);
  const Eigen::Index d = A.cols();
  const Eigen::VectorXd w = inverse_sq_lengthscales(params, d);
  Eigen::VectorXd per_dim = Eigen::VectorXd::Zero(d);
  double signal = 0.0;
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double wk = adjoint(i, j) * K(i, j);
      signal += wk;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = A(i, k) - B(j, k);
        per_dim(k) += wk * diff * diff;
      }
    }
  }
  Eigen::VectorXd grad(params.component_count());
  if (params.ard) {
    for (Eigen::Index k = 0; k < d; ++k) grad(k) = 0.5 * per_dim(k) * w(k);
  } else {
    grad(0) = 0.5 * per_dim.sum() * w(0);
  }
  grad(grad.size() - 1) = signal;
  return grad;
}

Eigen::MatrixXd input_gradient(const HyperParams& params, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                               const Eigen::MatrixXd& adjoint) {
  check_inputs(params, A, B);
  const Eigen::Index d = A.cols();
  const Eigen::VectorXd w = inverse_sq_lengthscales(params, d);
  // dK(a,b)/da_k = -K(a,b) (a_k - b_k) / l_k^2
  const Eigen::MatrixXd weights = adjoint.cwiseProduct(K);
  Eigen::MatrixXd grad = weights * B;
  grad -= weights.rowwise().sum().asDiagonal() * A;
  return grad * w.asDiagonal();
}

}  // namespace pacgp
