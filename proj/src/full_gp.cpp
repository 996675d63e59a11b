#include "pacgp/full_gp.hpp"

#include <numbers>

#include "pacgp/errors.hpp"

namespace pacgp {

FullGP::FullGP(FullGPState state) : state_(std::move(state)) {
  const Eigen::Index n = state_.train_inputs.rows();
  if (n < 1) throw DimensionError("full GP needs at least one training point");
  if (state_.train_targets.size() != n) {
    throw DimensionError("training inputs and targets differ in length");
  }
  state_.hyper.check_dimension(state_.train_inputs.cols());
  if (!std::isfinite(state_.log_noise_variance)) throw DomainError("non-finite noise variance");

  const double s2 = std::exp(state_.log_noise_variance);
  K_ = gram(state_.hyper, state_.train_inputs, state_.train_inputs);
  Eigen::MatrixXd Ky = K_;
  Ky.diagonal().array() += s2;
  chol_ = robust_cholesky(Ky, 0.0, 1e-2 * state_.hyper.signal_variance());
  noise_ = s2 + chol_.jitter;
  residual_ = state_.train_targets - state_.mean.at(n);
  alpha_ = chol_.llt.solve(residual_);
  Kinv_ = cholesky_inverse(chol_.llt);
}

PredictiveMoments FullGP::predict(const Eigen::MatrixXd& test_inputs) const {
  const Eigen::MatrixXd Ks = gram(state_.hyper, state_.train_inputs, test_inputs);
  PredictiveMoments out;
  out.mean = state_.mean.at(test_inputs.rows()) + Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = chol_.llt.matrixL().solve(Ks);
  out.var = (gram_diag(state_.hyper, test_inputs.rows()) - V.colwise().squaredNorm().transpose())
                .cwiseMax(0.0);
  return out;
}

PredictiveMoments FullGP::predict_train() const {
  PredictiveMoments out;
  out.mean = state_.train_targets - noise_ * alpha_;
  out.var = (noise_ - noise_ * noise_ * Kinv_.diagonal().array()).matrix().cwiseMax(0.0);
  return out;
}

double FullGP::kl() const {
  const double n = static_cast<double>(size());
  const double value = 0.5 * (chol_.logdet() - n * std::log(noise_) - n +
                              noise_ * Kinv_.trace() + residual_.dot(alpha_) -
                              noise_ * alpha_.squaredNorm());
  return std::max(value, 0.0);
}

double FullGP::nll() const {
  const double n = static_cast<double>(size());
  return 0.5 * chol_.logdet() + 0.5 * n * std::log(2.0 * std::numbers::pi) +
         0.5 * residual_.dot(alpha_);
}

Eigen::VectorXd FullGP::backprop(const ObjectiveSeeds& seeds) const {
  const Eigen::Index n = size();
  const double s2 = noise_;
  const double wk = seeds.d_kl;
  const double wn = seeds.d_nll;
  const bool has_mean = seeds.d_mean.size() == n;
  const bool has_var = seeds.d_var.size() == n;

  // Adjoint of Ky; symmetric parts first.
  Eigen::MatrixXd adj = (0.5 * (wk + wn)) * Kinv_;
  adj.noalias() -= (0.5 * (wk + wn)) * alpha_ * alpha_.transpose();
  const Eigen::VectorXd Ka = Kinv_ * alpha_;
  if (wk != 0.0) {
    adj.noalias() += (0.5 * wk * s2) * (Ka * alpha_.transpose() + alpha_ * Ka.transpose());
  }
  // -1/2 wk s2 Ki Ki + s2^2 Ki diag(gv) Ki in one product
  Eigen::VectorXd mid = Eigen::VectorXd::Constant(n, -0.5 * wk * s2);
  if (has_var) mid += (s2 * s2) * seeds.d_var;
  if (mid.cwiseAbs().maxCoeff() > 0.0) {
    adj.noalias() += Kinv_ * (mid.asDiagonal() * Kinv_);
  }
  if (has_mean) adj.noalias() += s2 * (Kinv_ * seeds.d_mean) * alpha_.transpose();

  double d_s2 = adj.trace();
  d_s2 += wk * 0.5 * (-static_cast<double>(n) / s2 + Kinv_.trace() - alpha_.squaredNorm());
  if (has_mean) d_s2 -= seeds.d_mean.dot(alpha_);
  if (has_var) {
    d_s2 += seeds.d_var.sum() - 2.0 * s2 * seeds.d_var.dot(Kinv_.diagonal());
  }

  const Eigen::Index T = state_.hyper.component_count();
  Eigen::VectorXd grad(T + 1);
  grad.head(T) =
      hyper_gradient(state_.hyper, state_.train_inputs, state_.train_inputs, K_, adj);
  // d/d ln(sigma_n^2); jitter is held fixed.
  grad(T) = d_s2 * std::exp(state_.log_noise_variance);
  return grad;
}

PredictiveMoments full_predict(const FullGPState& state, const Eigen::MatrixXd& test_inputs) {
  return FullGP(state).predict(test_inputs);
}

double kl_full(const FullGPState& state) { return FullGP(state).kl(); }

double nll_full(const FullGPState& state) { return FullGP(state).nll(); }

Eigen::VectorXd pack_parameters(const FullGPState& state) {
  const Eigen::Index T = state.hyper.component_count();
  Eigen::VectorXd v(T + 1);
  v.head(T) = state.hyper.to_vector();
  v(T) = state.log_noise_variance;
  return v;
}

void unpack_parameters(FullGPState& state, const Eigen::VectorXd& packed) {
  const Eigen::Index T = state.hyper.component_count();
  if (packed.size() != T + 1) throw DimensionError("full GP parameter vector has wrong length");
  state.hyper.assign(packed.head(T));
  state.log_noise_variance = packed(T);
}

Evaluation full_objective_grad(const FullGPState& state, ObjectiveKind objective,
                               const BoundConfig& cfg, bool want_grad,
                               const std::vector<Eigen::Index>* batch) {
  const FullGP gp(state);
  Evaluation ev;
  ObjectiveSeeds seeds;
  if (objective == ObjectiveKind::kNll) {
    ev.nll = gp.nll();
    seeds.value = ev.nll;
    seeds.d_nll = 1.0;
  } else if (is_pac(objective)) {
    ev.kl = gp.kl();
    seeds = pac_objective(objective, cfg, state.hyper.component_count(), state.train_targets,
                          gp.predict_train(), ev.kl, want_grad, batch);
    ev.risk = seeds.risk;
  } else {
    throw UsageError("objective " + to_string(objective) + " applies to sparse models only");
  }
  ev.objective = seeds.value;
  if (want_grad) ev.gradient = gp.backprop(seeds);
  return ev;
}

}  // namespace pacgp
