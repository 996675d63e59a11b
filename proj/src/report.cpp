#include "pacgp/report.hpp"

#include <cmath>

#include "pacgp/errors.hpp"

namespace pacgp {

bool on_grid(const HyperParams& hyper, const BoundConfig& cfg) {
  const Discretized d = discretize_hyperparams(hyper, cfg);
  const double step = 2.0 * cfg.grid_half_width / cfg.grid_intervals();
  const Eigen::VectorXd a = hyper.to_vector();
  const Eigen::VectorXd b = d.hyper.to_vector();
  return ((a - b).array().abs() <= 1e-9 * step).all();
}

FullGPState discretized(const FullGPState& state, const BoundConfig& cfg) {
  FullGPState out = state;
  out.hyper = discretize_hyperparams(state.hyper, cfg).hyper;
  return out;
}

SparseGPState discretized(const SparseGPState& state, const BoundConfig& cfg) {
  SparseGPState out = state;
  out.hyper = discretize_hyperparams(state.hyper, cfg).hyper;
  return out;
}

namespace {

double mse(const Eigen::VectorXd& y, const Eigen::VectorXd& mean) {
  return (y - mean).squaredNorm() / static_cast<double>(y.size());
}

void require_grid(const HyperParams& hyper, const BoundConfig& cfg) {
  if (!on_grid(hyper, cfg)) {
    throw DomainError("refusing to certify: hyperparameters are not on the discretization grid");
  }
}

void finish(BoundReport& rep, Eigen::Index n, Eigen::Index components, const BoundConfig& cfg) {
  rep.penalty = penalty(n, components, rep.kl, cfg);
  rep.kl_over_n = rep.kl / static_cast<double>(n);
  rep.B = pac_bound(rep.gibbs_train, rep.kl, rep.penalty, n);
  rep.B_pinsker = pinsker_bound(rep.gibbs_train, rep.kl, rep.penalty, n);
  rep.bayes_bound = bayes_bound(rep.B);
  rep.gibbs_train_undiscretized = rep.gibbs_train;
  auto& m = rep.metadata;
  m.loss = to_string(cfg.loss.kind);
  m.epsilon = cfg.loss.epsilon;
  m.delta = cfg.delta;
  m.grid_half_width = cfg.grid_half_width;
  m.grid_digits = cfg.grid_digits;
  m.n_train = n;
}

}  // namespace

BoundReport build_report(const FullGPState& state, const Dataset& test, const BoundConfig& cfg) {
  cfg.validate();
  require_grid(state.hyper, cfg);
  const FullGP gp(state);
  BoundReport rep;
  rep.gibbs_train = gibbs_risk(cfg.loss, state.train_targets, gp.predict_train());
  const PredictiveMoments pt = gp.predict(test.X);
  rep.gibbs_test = gibbs_risk(cfg.loss, test.y, pt);
  rep.mse_test = mse(test.y, pt.mean);
  rep.kl = gp.kl();
  rep.sigma_n_sq = std::exp(state.log_noise_variance);
  finish(rep, gp.size(), state.hyper.component_count(), cfg);
  rep.metadata.model = "full";
  rep.metadata.n_test = test.size();
  rep.metadata.dim = state.train_inputs.cols();
  rep.metadata.ard = state.hyper.ard;
  rep.metadata.num_inducing = 0;
  rep.metadata.alpha = 1.0;
  rep.metadata.inducing_init = "none";
  return rep;
}

BoundReport build_report(const SparseGPState& state, const Dataset& train, const Dataset& test,
                         const BoundConfig& cfg) {
  cfg.validate();
  require_grid(state.hyper, cfg);
  const SparseGP gp(state, train.X, train.y);
  BoundReport rep;
  rep.gibbs_train = gibbs_risk(cfg.loss, train.y, gp.predict_train());
  const PredictiveMoments pt = gp.predict(test.X);
  rep.gibbs_test = gibbs_risk(cfg.loss, test.y, pt);
  rep.mse_test = mse(test.y, pt.mean);
  rep.kl = gp.kl();
  if (!std::isfinite(rep.kl)) throw NumericError("sparse posterior has a singular covariance");
  rep.sigma_n_sq = std::exp(state.log_noise_variance);
  finish(rep, gp.size(), state.hyper.component_count(), cfg);
  rep.metadata.model = "sparse";
  rep.metadata.n_test = test.size();
  rep.metadata.dim = train.dim();
  rep.metadata.ard = state.hyper.ard;
  rep.metadata.num_inducing = state.num_inducing();
  rep.metadata.alpha = state.mode == SparseMode::kParametrized ? state.alpha : -1.0;
  return rep;
}

double train_gibbs_risk(const FullGPState& state, const LossSpec& loss) {
  return gibbs_risk(loss, state.train_targets, FullGP(state).predict_train());
}

double train_gibbs_risk(const SparseGPState& state, const Dataset& train, const LossSpec& loss) {
  return gibbs_risk(loss, train.y, SparseGP(state, train.X, train.y).predict_train());
}

}  // namespace pacgp
