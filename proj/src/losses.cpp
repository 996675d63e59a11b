#include "pacgp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pacgp/errors.hpp"
#include "pacgp/linalg.hpp"

namespace pacgp {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kZeroOne: return "zero-one";
    case LossKind::kClippedSquare: return "clipped-square";
    case LossKind::kInvGauss: return "inv-gauss";
    case LossKind::kBand: return "band-rel";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "zero-one") return LossKind::kZeroOne;
  if (s == "clipped-square") return LossKind::kClippedSquare;
  if (s == "inv-gauss") return LossKind::kInvGauss;
  if (s == "band-rel" || s == "band") return LossKind::kBand;
  throw UsageError("unknown loss '" + name + "'");
}

double LossSpec::band_lo(double y) const {
  return y - (relative ? epsilon * std::max(std::abs(y), 1e-12) : epsilon);
}

double LossSpec::band_hi(double y) const {
  return y + (relative ? epsilon * std::max(std::abs(y), 1e-12) : epsilon);
}

void LossSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw UsageError("loss epsilon must be positive and finite");
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

double pointwise_loss(const LossSpec& spec, double y, double yhat) {
  const double diff = yhat - y;
  switch (spec.kind) {
    case LossKind::kZeroOne:
      return std::abs(diff) > spec.epsilon ? 1.0 : 0.0;
    case LossKind::kClippedSquare:
      return std::min(1.0, diff * diff / (spec.epsilon * spec.epsilon));
    case LossKind::kInvGauss:
      return -std::expm1(-diff * diff / (spec.epsilon * spec.epsilon));
    case LossKind::kBand:
      return (yhat < spec.band_lo(y) || yhat > spec.band_hi(y)) ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace {

// Probability mass outside [lo, hi] under N(m, s^2).
GibbsPoint outside_interval(double lo, double hi, double m, double s) {
  const double a = (lo - m) / s;
  const double b = (hi - m) / s;
  const double pa = normal_pdf(a);
  const double pb = normal_pdf(b);
  GibbsPoint g;
  g.value = normal_cdf(a) + normal_cdf(-b);
  g.d_mean = (pb - pa) / s;
  g.d_sdev = (b * pb - a * pa) / s;
  return g;
}

GibbsPoint point_mass(const LossSpec& spec, double y, double m) {
  GibbsPoint g;
  g.value = pointwise_loss(spec, y, m);
  const double mu = m - y;
  const double e2 = spec.epsilon * spec.epsilon;
  if (spec.kind == LossKind::kInvGauss) {
    g.d_mean = 2.0 * mu / e2 * std::exp(-mu * mu / e2);
  } else if (spec.kind == LossKind::kClippedSquare && std::abs(mu) < spec.epsilon) {
    g.d_mean = 2.0 * mu / e2;
  }
  return g;
}

}  // namespace

GibbsPoint gibbs_pointwise_grad(const LossSpec& spec, double y, double mhat, double sdev) {
  if (!(sdev > 0.0)) return point_mass(spec, y, mhat);
  const double eps = spec.epsilon;
  switch (spec.kind) {
    case LossKind::kZeroOne:
      return outside_interval(y - eps, y + eps, mhat, sdev);
    case LossKind::kBand:
      return outside_interval(spec.band_lo(y), spec.band_hi(y), mhat, sdev);
    case LossKind::kInvGauss: {
      const double mu = mhat - y;
      const double V = eps * eps + 2.0 * sdev * sdev;
      const double c = eps / std::sqrt(V);
      const double ce = c * std::exp(-mu * mu / V);
      GibbsPoint g;
      g.value = 1.0 - ce;
      g.d_mean = ce * 2.0 * mu / V;
      g.d_sdev = ce * (2.0 * sdev / V) * (1.0 - 2.0 * mu * mu / V);
      return g;
    }
    case LossKind::kClippedSquare: {
      const double mu = mhat - y;
      const double s = sdev;
      const double a = (-eps - mu) / s;
      const double b = (eps - mu) / s;
      const double pa = normal_pdf(a);
      const double pb = normal_pdf(b);
      const double outside = normal_cdf(a) + normal_cdf(-b);
      // mass inside [a, b], computed from whichever tail is small
      const double inside = (a > 0.0)    ? normal_cdf(-a) - normal_cdf(-b)
                            : (b < 0.0) ? normal_cdf(b) - normal_cdf(a)
                                        : 1.0 - outside;
      const double e2 = eps * eps;
      // E[z^2 ; a < z < b] for standard normal z
      const double second = inside + a * pa - b * pb;
      GibbsPoint g;
      g.value = outside + (mu * mu * inside + 2.0 * mu * s * (pa - pb) + s * s * second) / e2;
      g.d_mean = 2.0 / e2 * (mu * inside + s * (pa - pb));
      g.d_sdev = 2.0 / e2 * (mu * (pa - pb) + s * second);
      return g;
    }
  }
  return {};
}

double gibbs_pointwise(const LossSpec& spec, double y, double mhat, double sdev) {
  return gibbs_pointwise_grad(spec, y, mhat, sdev).value;
}

namespace {

void check_lengths(const Eigen::VectorXd& targets, const PredictiveMoments& moments) {
  if (moments.mean.size() != targets.size() || moments.var.size() != targets.size()) {
    throw DimensionError("targets and predictive moments differ in length");
  }
}

}  // namespace

double gibbs_risk(const LossSpec& spec, const Eigen::VectorXd& targets,
                  const PredictiveMoments& moments) {
  return gibbs_risk_moment_grad(spec, targets, moments).value;
}

RiskWithMomentGrad gibbs_risk_moment_grad(const LossSpec& spec, const Eigen::VectorXd& targets,
                                          const PredictiveMoments& moments,
                                          const std::vector<Eigen::Index>* batch) {
  check_lengths(targets, moments);
  const Eigen::Index n = targets.size();
  RiskWithMomentGrad out;
  out.d_mean = Eigen::VectorXd::Zero(n);
  out.d_var = Eigen::VectorXd::Zero(n);
  const Eigen::Index count = batch ? static_cast<Eigen::Index>(batch->size()) : n;
  if (count == 0) throw DimensionError("risk over an empty set of points");
  Eigen::VectorXd values(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index i = batch ? (*batch)[static_cast<size_t>(k)] : k;
    if (i < 0 || i >= n) throw DimensionError("batch index out of range");
    const double var = std::max(moments.var(i), 0.0);
    const double s = std::sqrt(var);
    const GibbsPoint g = gibbs_pointwise_grad(spec, targets(i), moments.mean(i), s);
    values(k) = g.value;
    out.d_mean(i) += g.d_mean / static_cast<double>(count);
    if (s > 0.0) out.d_var(i) += g.d_sdev / (2.0 * s) / static_cast<double>(count);
  }
  out.value = compensated_sum(values) / static_cast<double>(count);
  return out;
}

Eigen::VectorXd gibbs_risk_grad(const LossSpec& spec, const Eigen::VectorXd& targets,
                                const PredictiveMoments& moments, const Eigen::MatrixXd& d_mean,
                                const Eigen::MatrixXd& d_var) {
  check_lengths(targets, moments);
  if (d_mean.rows() != targets.size() || d_var.rows() != targets.size() ||
      d_mean.cols() != d_var.cols()) {
    throw DimensionError("moment Jacobians have inconsistent shapes");
  }
  const RiskWithMomentGrad r = gibbs_risk_moment_grad(spec, targets, moments);
  return d_mean.transpose() * r.d_mean + d_var.transpose() * r.d_var;
}

double minibatch_risk(const LossSpec& spec, const Eigen::VectorXd& targets,
                      const PredictiveMoments& moments, const std::vector<Eigen::Index>& batch) {
  if (batch.empty()) throw DimensionError("empty minibatch");
  return gibbs_risk_moment_grad(spec, targets, moments, &batch).value;
}

}  // namespace pacgp
