#include "pacgp/linalg.hpp"

#include <cmath>
#include <sstream>

#include "pacgp/errors.hpp"

namespace pacgp {

double JitteredCholesky::logdet() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

JitteredCholesky robust_cholesky(const Eigen::MatrixXd& K, double first_jitter, double max_jitter) {
  if (K.rows() != K.cols()) throw DimensionError("cholesky of a non-square matrix");
  std::ostringstream tried;
  double jitter = first_jitter;
  while (true) {
    JitteredCholesky out;
    if (jitter > 0.0) {
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      out.llt.compute(Kj);
    } else {
      out.llt.compute(K);
    }
    const bool finite = out.llt.info() == Eigen::Success &&
                        out.llt.matrixLLT().diagonal().allFinite() &&
                        (out.llt.matrixLLT().diagonal().array() > 0.0).all();
    if (finite) {
      out.jitter = jitter;
      return out;
    }
    tried << (tried.tellp() > 0 ? ", " : "") << jitter;
    if (jitter >= max_jitter * (1.0 - 1e-12)) break;
    jitter = (jitter > 0.0) ? std::min(jitter * 10.0, max_jitter) : max_jitter * 1e-6;
  }
  throw NumericError("Cholesky factorization failed (n=" + std::to_string(K.rows()) +
                     ") with jitter ladder {" + tried.str() + "}");
}

JitteredCholesky kernel_cholesky(const Eigen::MatrixXd& K, double scale) {
  return robust_cholesky(K, 1e-8 * scale, 1e-2 * scale);
}

Eigen::MatrixXd cholesky_inverse(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::Index n = llt.matrixLLT().rows();
  Eigen::MatrixXd inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd out = inv.transpose() * inv;
  return 0.5 * (out + out.transpose());
}

double compensated_sum(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double t = sum + v(i);
    if (std::abs(sum) >= std::abs(v(i))) {
      comp += (sum - t) + v(i);
    } else {
      comp += (v(i) - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace pacgp
