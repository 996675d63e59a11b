#include "pacgp/bound.hpp"

#include <algorithm>
#include <cmath>

#include "pacgp/binary_kl.hpp"
#include "pacgp/errors.hpp"

namespace pacgp {

double BoundConfig::grid_intervals() const {
  return 2.0 * grid_half_width * std::pow(10.0, grid_digits);
}

void BoundConfig::validate() const {
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("delta must lie in (0,1]");
  if (!(grid_half_width > 0.0)) throw UsageError("grid half-width L must be positive");
  if (grid_digits < 0) throw UsageError("grid digits r must be >= 0");
  if (extra_log_card < 0.0) throw UsageError("extra log-cardinality must be >= 0");
  loss.validate();
}

Discretized discretize_hyperparams(const HyperParams& hyper, const BoundConfig& cfg) {
  const double L = cfg.grid_half_width;
  const double step = 2.0 * L / cfg.grid_intervals();
  auto snap = [&](double v) {
    if (!std::isfinite(v)) throw DomainError("cannot discretize a non-finite hyperparameter");
    const double c = std::clamp(v, -L, L);
    const double k = std::round((c + L) / step);
    return std::clamp(-L + k * step, -L, L);
  };
  Discretized out;
  out.hyper = hyper;
  for (Eigen::Index i = 0; i < out.hyper.log_lengthscales.size(); ++i) {
    out.hyper.log_lengthscales(i) = snap(hyper.log_lengthscales(i));
  }
  out.hyper.log_signal_variance = snap(hyper.log_signal_variance);
  out.ln_theta_card = log_theta_cardinality(hyper.component_count(), cfg);
  return out;
}

double log_theta_cardinality(Eigen::Index components, const BoundConfig& cfg) {
  return static_cast<double>(components) * std::log(cfg.grid_intervals() + 1.0) +
         cfg.extra_log_card;
}

PenaltyTerms penalty(Eigen::Index n, Eigen::Index components, double kl, const BoundConfig& cfg) {
  if (n < 1) throw DomainError("penalty needs N >= 1");
  PenaltyTerms p;
  const double nd = static_cast<double>(n);
  p.ln_theta_card = log_theta_cardinality(components, cfg);
  p.ln_conf = std::log(2.0 * std::sqrt(nd) / cfg.delta);
  p.total_over_n = (kl + p.ln_theta_card + p.ln_conf) / nd;
  return p;
}

double pac_bound(double gibbs_train, double /*kl*/, const PenaltyTerms& pen, Eigen::Index /*n*/) {
  return klinv(std::clamp(gibbs_train, 0.0, 1.0), std::max(pen.total_over_n, 0.0));
}

double pinsker_bound(double gibbs_train, double /*kl*/, const PenaltyTerms& pen,
                     Eigen::Index /*n*/) {
  return gibbs_train + std::sqrt(std::max(pen.total_over_n, 0.0) / 2.0);
}

double bayes_bound(double b) { return std::min(1.0, 2.0 * b); }

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kPacKl: return "pac-kl";
    case ObjectiveKind::kPacSqrt: return "pac-sqrt";
    case ObjectiveKind::kNll: return "mle";
    case ObjectiveKind::kVfe: return "vfe";
    case ObjectiveKind::kFitc: return "fitc";
    case ObjectiveKind::kDtc: return "dtc";
  }
  return "unknown";
}

ObjectiveKind parse_objective(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "pac-kl") return ObjectiveKind::kPacKl;
  if (s == "pac-sqrt") return ObjectiveKind::kPacSqrt;
  if (s == "mle" || s == "nll") return ObjectiveKind::kNll;
  if (s == "vfe") return ObjectiveKind::kVfe;
  if (s == "fitc") return ObjectiveKind::kFitc;
  if (s == "dtc") return ObjectiveKind::kDtc;
  throw UsageError("unknown objective '" + name + "'");
}

bool is_pac(ObjectiveKind kind) {
  return kind == ObjectiveKind::kPacKl || kind == ObjectiveKind::kPacSqrt;
}

ObjectiveSeeds pac_objective(ObjectiveKind kind, const BoundConfig& cfg, Eigen::Index components,
                             const Eigen::VectorXd& targets, const PredictiveMoments& moments,
                             double kl, bool want_grad, const std::vector<Eigen::Index>* batch) {
  if (!is_pac(kind)) throw UsageError("pac_objective called with a likelihood objective");
  const Eigen::Index n = targets.size();
  const RiskWithMomentGrad risk = gibbs_risk_moment_grad(cfg.loss, targets, moments, batch);
  const PenaltyTerms pen = penalty(n, components, kl, cfg);
  const KlPoint point = clamp_for_gradient({risk.value, pen.total_over_n});

  ObjectiveSeeds seeds;
  seeds.risk = risk.value;
  double d_risk = 1.0;
  double d_budget = 0.0;
  if (kind == ObjectiveKind::kPacKl) {
    seeds.value = klinv(point);
    if (want_grad) {
      const KlInvPartials partials = klinv_partials(point.q, point.eps);
      d_risk = partials.d_dq;
      d_budget = partials.d_deps;
    }
  } else {
    const double root = std::sqrt(point.eps / 2.0);
    seeds.value = risk.value + root;
    d_budget = 1.0 / (4.0 * root);
  }
  if (want_grad) {
    seeds.d_mean = d_risk * risk.d_mean;
    seeds.d_var = d_risk * risk.d_var;
    seeds.d_kl = d_budget / static_cast<double>(n);
  }
  return seeds;
}

}  // namespace pacgp
