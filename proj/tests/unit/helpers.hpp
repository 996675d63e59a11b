#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "pacgp/full_gp.hpp"
#include "pacgp/kernels.hpp"
#include "pacgp/sparse_gp.hpp"

namespace testing {

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = u(rng);
  }
  return m;
}

inline Eigen::VectorXd noisy_sine(const Eigen::MatrixXd& X, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = std::sin(1.5 * X.row(i).sum()) + noise * nd(rng);
  return y;
}

inline pacgp::HyperParams random_hyper(Eigen::Index d, bool ard, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  pacgp::HyperParams h =
      ard ? pacgp::HyperParams::with_ard(d, 0.0, 0.0) : pacgp::HyperParams::isotropic(0.0, 0.0);
  for (Eigen::Index k = 0; k < h.log_lengthscales.size(); ++k) h.log_lengthscales(k) = u(rng);
  h.log_signal_variance = u(rng);
  return h;
}

inline pacgp::FullGPState random_full(Eigen::Index n, Eigen::Index d, bool ard, double noise,
                                      std::mt19937_64& rng) {
  pacgp::FullGPState s;
  s.train_inputs = uniform(n, d, -2.0, 2.0, rng);
  s.train_targets = noisy_sine(s.train_inputs, 0.2, rng);
  s.hyper = random_hyper(d, ard, rng);
  s.log_noise_variance = std::log(noise);
  return s;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

/// log N(y | m, C) from an LDLT-free dense evaluation: Cholesky of C.
inline double gaussian_logpdf(const Eigen::VectorXd& r, const Eigen::MatrixXd& C) {
  const Eigen::LLT<Eigen::MatrixXd> llt(C);
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * r.size() * std::log(2.0 * M_PI);
}

/// KL(N(m1, S1) || N(m0, S0)) from the textbook formula.
inline double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                          const Eigen::VectorXd& m0, const Eigen::MatrixXd& S0) {
  const Eigen::Index k = m1.size();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu0(S0);
  const Eigen::MatrixXd S0inv = lu0.inverse();
  const double logdet0 = std::log(std::abs(lu0.determinant()));
  const double logdet1 = std::log(std::abs(Eigen::FullPivLU<Eigen::MatrixXd>(S1).determinant()));
  const Eigen::VectorXd d = m0 - m1;
  return 0.5 * ((S0inv * S1).trace() + d.dot(S0inv * d) - static_cast<double>(k) + logdet0 - logdet1);
}

}  // namespace testing
