#include "pacgp/binary_kl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pacgp/errors.hpp"

namespace pacgp {
namespace {

constexpr double kDomainTolerance = 1e-12;
constexpr double kInteriorTolerance = 1e-12;
constexpr int kMaxBisection = 200;
constexpr double kInf = std::numeric_limits<double>::infinity();

double checked_probability(double value, const char* name) {
  if (!(value >= -kDomainTolerance && value <= 1.0 + kDomainTolerance)) {
    throw DomainError(std::string(name) + " must lie in [0,1], got " + std::to_string(value));
  }
  return std::clamp(value, 0.0, 1.0);
}

double checked_budget(double eps) {
  if (std::isnan(eps) || eps < 0.0) {
    throw DomainError("divergence budget must be >= 0, got " + std::to_string(eps));
  }
  return eps;
}

// Solution of kl(q||p) = eps on the lower branch p in [q, 0.5], bisecting p
// until the bracket cannot shrink further.
double bisect_lower(double q, double eps) {
  double lo = q;
  double hi = 0.5;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (binary_kl(q, mid) <= eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Complement s = 1-p of the solution on the upper branch, bisecting ln(s).
// kl(q||1-s) decreases in s.
double bisect_upper_complement(double q, double eps, double s_max) {
  double log_lo = std::log(std::numeric_limits<double>::min());
  double log_hi = std::log(s_max);
  if (binary_kl_complement(q, std::exp(log_lo)) <= eps) return 0.0;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (log_lo + log_hi);
    if (mid <= log_lo || mid >= log_hi) break;
    if (binary_kl_complement(q, std::exp(mid)) <= eps) {
      log_hi = mid;
    } else {
      log_lo = mid;
    }
  }
  // log_hi satisfies kl <= eps, i.e. the largest admissible p.
  return std::exp(log_hi);
}

// x - log1p(x), by its series where the direct form cancels.
double x_minus_log1p(double x) {
  if (std::abs(x) >= 0.1) return x - std::log1p(x);
  double term = x * x;
  double sum = 0.0;
  for (int k = 2; k < 40; ++k) {
    const double add = term / k;
    sum += (k % 2 == 0) ? add : -add;
    if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
    term *= x;
  }
  return sum;
}

// kl(q || q + d) for |d| small against min(q, 1-q). The first-order terms of
// the two logarithms cancel exactly in this form.
double kl_near(double q, double d) {
  return q * x_minus_log1p(d / q) + (1.0 - q) * x_minus_log1p(-d / (1.0 - q));
}

bool is_near(double q, double d) { return std::abs(d) < 0.5 * std::min(q, 1.0 - q); }

struct Solution {
  double p;
  double s;  // 1 - p
};

Solution solve(double q, double eps) {
  q = checked_probability(q, "q");
  eps = checked_budget(eps);
  if (q >= 1.0 || std::isinf(eps)) return {1.0, 0.0};
  if (eps == 0.0) return {q, 1.0 - q};
  if (q < 0.5 && binary_kl(q, 0.5) >= eps) {
    const double p = bisect_lower(q, eps);
    return {p, 1.0 - p};
  }
  const double s = bisect_upper_complement(q, eps, std::min(0.5, 1.0 - q));
  return {1.0 - s, s};
}

}  // namespace

double binary_kl(double q, double p) {
  q = checked_probability(q, "q");
  p = checked_probability(p, "p");
  if (q > 0.0 && q < 1.0 && is_near(q, p - q)) return std::max(kl_near(q, p - q), 0.0);
  double value = 0.0;
  if (q > 0.0) value += (p == 0.0) ? kInf : q * std::log(q / p);
  if (q < 1.0) value += (p == 1.0) ? kInf : (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
  return std::max(value, 0.0);
}

double binary_kl_complement(double q, double one_minus_p) {
  q = checked_probability(q, "q");
  const double s = checked_probability(one_minus_p, "1-p");
  if (q > 0.0 && q < 1.0 && is_near(q, (1.0 - q) - s)) return std::max(kl_near(q, (1.0 - q) - s), 0.0);
  double value = 0.0;
  if (q > 0.0) value += (s == 1.0) ? kInf : q * (std::log(q) - std::log1p(-s));
  if (q < 1.0) value += (s == 0.0) ? kInf : (1.0 - q) * (std::log1p(-q) - std::log(s));
  return std::max(value, 0.0);
}

double klinv(double q, double eps) { return solve(q, eps).p; }

double klinv_complement(double q, double eps) { return solve(q, eps).s; }

KlInvPartials klinv_partials(double q, double eps) {
  if (!(q > 0.0 && q < 1.0)) {
    throw DomainError("klinv_partials needs q in (0,1), got " + std::to_string(q));
  }
  if (!(eps > 0.0) || std::isinf(eps)) {
    throw DomainError("klinv_partials needs finite eps > 0, got " + std::to_string(eps));
  }
  const Solution sol = solve(q, eps);
  const double gap = (sol.p < 0.5) ? sol.p - q : (1.0 - q) - sol.s;
  if (gap < kInteriorTolerance || sol.s <= 0.0) {
    throw BoundaryError("klinv_partials: solution too close to the boundary (p - q = " +
                        std::to_string(gap) + ")");
  }
  // (1-q)/(1-p) - q/p == (p-q) / (p (1-p))
  const double denom = gap / (sol.p * sol.s);
  const double numer = (std::log1p(-q) - std::log(sol.s)) - (std::log(q) - std::log(sol.p));
  return {numer / denom, 1.0 / denom};
}

KlPoint clamp_for_gradient(KlPoint point) {
  return {std::clamp(point.q, 1e-6, 1.0 - 1e-6), std::max(point.eps, 1e-10)};
}

}  // namespace pacgp
