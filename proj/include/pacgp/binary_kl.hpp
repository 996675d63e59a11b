#pragma once

namespace pacgp {

/// Arguments of the upper inverse: an empirical risk value q in [0,1] and a
/// divergence budget eps in [0, inf].
struct KlPoint {
  double q = 0.0;
  double eps = 0.0;
};

struct KlInvPartials {
  double d_dq = 0.0;
  double d_deps = 0.0;
};

/// Binary KL divergence kl(q||p) with 0 ln 0 = 0. Returns +inf when p is 0 or 1
/// and q differs. Throws DomainError when q or p leaves [0,1] by more than 1e-12.
double binary_kl(double q, double p);

/// kl(q||1-s) evaluated from the complement s = 1-p. Stays accurate when p is
/// too close to 1 to be represented as a double.
double binary_kl_complement(double q, double one_minus_p);

/// Upper inverse max{p in [0,1] : kl(q||p) <= eps}. Returns 1 for q = 1 or
/// eps = inf.
double klinv(double q, double eps);
inline double klinv(KlPoint point) { return klinv(point.q, point.eps); }

/// 1 - klinv(q, eps), computed without cancellation. Upper solutions are found
/// by bisection on ln(1-p), so values down to ~1e-308 are resolved.
double klinv_complement(double q, double eps);

/// Partial derivatives of klinv from the implicit-function identity
/// kl(q||klinv(q,eps)) = eps. Requires 0 < q < 1 and eps > 0; throws
/// BoundaryError when the solution coincides with q.
KlInvPartials klinv_partials(double q, double eps);

/// Clamping used before the objective is differentiated: q into
/// [1e-6, 1-1e-6], eps into [1e-10, inf).
KlPoint clamp_for_gradient(KlPoint point);

}  // namespace pacgp
