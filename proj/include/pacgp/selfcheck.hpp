#pragma once

#include <string>
#include <vector>

#include "pacgp/losses.hpp"

namespace pacgp {

/// Outcome of one property check against an independent oracle.
struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst error observed
  double threshold = 0.0;  // pass iff measured <= threshold
  std::string detail;
  double seconds = 0.0;
};

/// Worst |kl(q, klinv(q,eps)) - eps| over q = 0.01..0.99 and 20 log-spaced
/// eps in [1e-4, 5], and the q = 0 closed form 1 - exp(-eps).
CheckResult check_klinv_roundtrip();
/// klinv(q, eps) <= min(1, q + sqrt(eps/2)) on a random grid.
CheckResult check_pinsker_cap(unsigned long long seed = 1);
/// klinv partials against central differences.
CheckResult check_klinv_partials(unsigned long long seed = 2);
/// Closed-form Gibbs risk of one loss kind against adaptive Gauss-Kronrod
/// quadrature on `count` random (y, mean, sdev, epsilon) tuples.
CheckResult check_gibbs_quadrature(LossKind kind, int count = 50, unsigned long long seed = 3);
/// Analytic objective gradients against central differences on small random
/// instances: full and sparse models, every objective, Z and free-form
/// parameters included.
std::vector<CheckResult> check_gradients(unsigned long long seed = 4);
/// Full-GP KL from its matrix form against the eigendecomposition form.
CheckResult check_kl_eigenform(unsigned long long seed = 5);
/// Sparse KL against the textbook Gaussian KL between N(a, B) and the
/// inducing prior, built from the returned a, B.
CheckResult check_sparse_kl_oracle(unsigned long long seed = 6);
/// FITC posterior with Z = X against the full GP (moments and KL).
std::vector<CheckResult> check_fitc_full_equivalence(unsigned long long seed = 7);

std::vector<CheckResult> run_selfcheck();
/// One line per check: PASS/FAIL, name, measured vs threshold.
std::string format_checks(const std::vector<CheckResult>& results);

}  // namespace pacgp
