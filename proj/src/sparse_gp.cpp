#include "pacgp/sparse_gp.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

#include "pacgp/errors.hpp"
#include "pacgp/log.hpp"

namespace pacgp {

namespace {

constexpr double kNegativeVarianceTolerance = 1e-10;

// Lower triangle with the diagonal halved.
Eigen::MatrixXd phi(const Eigen::MatrixXd& G) {
  Eigen::MatrixXd out = G.triangularView<Eigen::Lower>();
  out.diagonal() *= 0.5;
  return out;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

void SparseGPState::init_free_form_at_prior() {
  const Eigen::Index m = num_inducing();
  hyper.check_dimension(inducing_inputs.cols());
  Eigen::MatrixXd K = gram(hyper, inducing_inputs, inducing_inputs);
  const JitteredCholesky chol = kernel_cholesky(K, hyper.signal_variance());
  mode = SparseMode::kFreeForm;
  free_mean = mean.at(m);
  free_chol = chol.lower();
}

SparseGP::SparseGP(SparseGPState state, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& targets, double alpha_override)
    : state_(std::move(state)), X_(inputs), targets_(targets) {
  const Eigen::Index m = state_.num_inducing();
  const Eigen::Index n = X_.rows();
  if (m < 1) throw DimensionError("sparse GP needs at least one inducing input");
  if (n < 1) throw DimensionError("sparse GP needs at least one training point");
  if (targets_.size() != n) throw DimensionError("training inputs and targets differ in length");
  if (state_.inducing_inputs.cols() != X_.cols()) {
    throw DimensionError("inducing inputs and training inputs differ in dimension");
  }
  state_.hyper.check_dimension(X_.cols());
  alpha_ = (alpha_override >= 0.0 && alpha_override <= 1.0) ? alpha_override
                                                             : std::clamp(state_.alpha, 0.0, 1.0);
  noise_ = std::exp(state_.log_noise_variance);
  const double s2f = state_.hyper.signal_variance();

  Kmm_ = gram(state_.hyper, state_.inducing_inputs, state_.inducing_inputs);
  chol_m_ = kernel_cholesky(Kmm_, s2f);
  Kmm_.diagonal().array() += chol_m_.jitter;
  Kmn_ = gram(state_.hyper, state_.inducing_inputs, X_);
  A_ = chol_m_.llt.matrixL().solve(Kmn_);

  const Eigen::VectorXd raw = (s2f - A_.colwise().squaredNorm().array()).matrix();
  min_raw_lambda_ = raw.minCoeff();
  if (min_raw_lambda_ < -kNegativeVarianceTolerance * s2f) {
    std::ostringstream msg;
    msg << "Schur complement diagonal reached " << min_raw_lambda_ << "; clamped at 0";
    log_warning(msg.str());
  }
  lambda_ = raw.cwiseMax(0.0);
  lambda_active_ = raw.array() > 0.0;
  residual_ = targets_ - state_.mean.at(n);
  D_ = (alpha_ * lambda_.array() + noise_).matrix();

  if (state_.mode == SparseMode::kParametrized) {
    factor_parametrized();
  } else {
    factor_free_form();
  }
}

void SparseGP::factor_parametrized() {
  const Eigen::Index m = state_.num_inducing();
  const Eigen::VectorXd dinv = D_.cwiseInverse();
  const Eigen::MatrixXd AD = A_ * dinv.cwiseSqrt().asDiagonal();
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(m, m);
  C.selfadjointView<Eigen::Lower>().rankUpdate(AD);
  C = C.selfadjointView<Eigen::Lower>();
  chol_c_ = robust_cholesky(C, 0.0, 1e-8);
  Cinv_ = cholesky_inverse(chol_c_.llt);
  c_ = A_ * residual_.cwiseProduct(dinv);
  whitened_mean_ = Cinv_ * c_;
  whitened_cov_ = Cinv_;
}

void SparseGP::factor_free_form() {
  const Eigen::Index m = state_.num_inducing();
  if (state_.free_mean.size() != m || state_.free_chol.rows() != m ||
      state_.free_chol.cols() != m) {
    throw DimensionError("free-form posterior parameters do not match the inducing set");
  }
  const Eigen::MatrixXd LB = state_.free_chol.triangularView<Eigen::Lower>();
  const Eigen::VectorXd diag = LB.diagonal().cwiseAbs();
  singular_B_ = (diag.array() == 0.0).any();
  logdet_B_ = singular_B_ ? -std::numeric_limits<double>::infinity()
                          : 2.0 * diag.array().log().sum();
  W_ = chol_m_.llt.matrixL().solve(LB);
  whitened_cov_ = W_ * W_.transpose();
  whitened_mean_ = chol_m_.llt.matrixL().solve(state_.free_mean - state_.mean.at(m));
}

InducingPosterior SparseGP::posterior() const {
  const Eigen::Index m = state_.num_inducing();
  InducingPosterior out;
  if (state_.mode == SparseMode::kFreeForm) {
    const Eigen::MatrixXd LB = state_.free_chol.triangularView<Eigen::Lower>();
    out.a = state_.free_mean;
    out.B = LB * LB.transpose();
  } else {
    const Eigen::MatrixXd Lm = chol_m_.lower();
    out.a = state_.mean.at(m) + chol_m_.llt.matrixL() * whitened_mean_;
    out.B = symmetrize(Lm * Cinv_ * Lm.transpose());
  }
  return out;
}

PredictiveMoments SparseGP::predict(const Eigen::MatrixXd& test_inputs) const {
  const Eigen::MatrixXd Ks = gram(state_.hyper, state_.inducing_inputs, test_inputs);
  const Eigen::MatrixXd As = chol_m_.llt.matrixL().solve(Ks);
  PredictiveMoments out;
  out.mean = state_.mean.at(test_inputs.rows()) + As.transpose() * whitened_mean_;
  out.var = (state_.hyper.signal_variance() - As.colwise().squaredNorm().array() +
             As.cwiseProduct(whitened_cov_ * As).colwise().sum().array())
                .matrix();
  const double lowest = out.var.size() ? out.var.minCoeff() : 0.0;
  if (lowest < -kNegativeVarianceTolerance) {
    log_warning("negative predictive variance " + std::to_string(lowest) + " clamped at 0");
  }
  out.var = out.var.cwiseMax(0.0);
  return out;
}

PredictiveMoments SparseGP::predict_train() const {
  PredictiveMoments out;
  out.mean = state_.mean.at(size()) + A_.transpose() * whitened_mean_;
  out.var = lambda_ + A_.cwiseProduct(whitened_cov_ * A_).colwise().sum().transpose();
  return out;
}

double SparseGP::kl() const {
  const double m = static_cast<double>(state_.num_inducing());
  if (state_.mode == SparseMode::kParametrized) {
    return std::max(0.0, 0.5 * (chol_c_.logdet() + Cinv_.trace() - m +
                                whitened_mean_.squaredNorm()));
  }
  if (singular_B_) return std::numeric_limits<double>::infinity();
  const double value = 0.5 * (-logdet_B_ + chol_m_.logdet() + whitened_cov_.trace() - m +
                              whitened_mean_.squaredNorm());
  return std::max(0.0, value);
}

double SparseGP::nll(bool trace_term) const {
  if (state_.mode != SparseMode::kParametrized) {
    throw UsageError("the sparse likelihood is defined for the parametrized posterior only");
  }
  const double n = static_cast<double>(size());
  double value = 0.5 * (chol_c_.logdet() + D_.array().log().sum());
  value += 0.5 * n * std::log(2.0 * std::numbers::pi);
  if (trace_term) value += lambda_.sum() / (2.0 * noise_);
  value += 0.5 * (residual_.cwiseAbs2().cwiseQuotient(D_).sum() - c_.dot(whitened_mean_));
  return value;
}

SparseGP::Gradient SparseGP::backprop(const ObjectiveSeeds& seeds, bool trace_term) const {
  const Eigen::Index m = state_.num_inducing();
  const Eigen::Index n = size();
  const bool has_mean = seeds.d_mean.size() == n;
  const bool has_var = seeds.d_var.size() == n;
  const double wk = seeds.d_kl;
  const double wn = seeds.d_nll;
  const auto Lt = chol_m_.llt.matrixU();
  const Eigen::VectorXd& v = whitened_mean_;

  // Everything below is accumulated in whitened coordinates first; the
  // adjoints of Kmm and Kmn come from A_bar (and L_bar) at the very end.
  Eigen::MatrixXd A_bar = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd L_bar = Eigen::MatrixXd::Zero(m, m);  // direct dependence on Lm
  Eigen::VectorXd v_bar = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd V_bar = Eigen::MatrixXd::Zero(m, m);  // of whitened_cov_
  Eigen::VectorXd lam_bar = Eigen::VectorXd::Zero(n);
  double s2_bar = 0.0;
  double alpha_bar = 0.0;
  Gradient grad;

  if (has_mean) {
    A_bar.noalias() += v * seeds.d_mean.transpose();
    v_bar.noalias() += A_ * seeds.d_mean;
  }
  if (has_var) {
    lam_bar += seeds.d_var;
    const Eigen::MatrixXd AV = A_ * seeds.d_var.asDiagonal();
    A_bar.noalias() += 2.0 * whitened_cov_ * AV;
    V_bar.noalias() += AV * A_.transpose();
  }
  if (wk != 0.0) {
    V_bar.diagonal().array() += 0.5 * wk;
    v_bar += wk * v;
  }

  if (state_.mode == SparseMode::kParametrized) {
    // V = Cinv, v = Cinv c
    Eigen::VectorXd c_bar = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd D_bar = Eigen::VectorXd::Zero(n);
    double logdet_bar = 0.5 * wk;
    if (wn != 0.0) {
      logdet_bar += 0.5 * wn;
      D_bar.array() += wn * (0.5 / D_.array() - 0.5 * residual_.array().square() / D_.array().square());
      c_bar -= 0.5 * wn * v;
      v_bar -= 0.5 * wn * c_;
      if (trace_term) {
        lam_bar.array() += wn / (2.0 * noise_);
        s2_bar -= wn * lambda_.sum() / (2.0 * noise_ * noise_);
      }
    }
    V_bar.noalias() += v_bar * c_.transpose();
    c_bar.noalias() += Cinv_ * v_bar;
    // Cinv = C^{-1}, plus ln|C|
    Eigen::MatrixXd C_bar = -Cinv_ * V_bar * Cinv_ + logdet_bar * Cinv_;
    C_bar = symmetrize(C_bar);
    // c = A (r / D)
    const Eigen::VectorXd rD = residual_.cwiseQuotient(D_);
    A_bar.noalias() += c_bar * rD.transpose();
    D_bar.array() -= (A_.transpose() * c_bar).array() * residual_.array() / D_.array().square();
    // C = I + A D^{-1} A^T
    A_bar.noalias() += 2.0 * C_bar * A_ * D_.cwiseInverse().asDiagonal();
    D_bar.array() -= (A_.cwiseProduct(C_bar * A_)).colwise().sum().transpose().array() /
                     D_.array().square();
    // D = alpha Lambda + s2
    lam_bar += alpha_ * D_bar;
    s2_bar += D_bar.sum();
    alpha_bar += D_bar.dot(lambda_);
  } else {
    const Eigen::MatrixXd LB = state_.free_chol.triangularView<Eigen::Lower>();
    Eigen::MatrixXd LB_bar = Eigen::MatrixXd::Zero(m, m);
    if (wk != 0.0) {
      if (singular_B_) throw NumericError("free-form KL is infinite for singular B_MM");
      // -0.5 ln|B| + 0.5 ln|Kmm|
      LB_bar.diagonal().array() -= wk / LB.diagonal().array();
      L_bar.diagonal().array() += wk / chol_m_.llt.matrixLLT().diagonal().array();
    }
    // V = W W^T, W = L^{-1} L_B
    const Eigen::MatrixXd W_bar = (V_bar + V_bar.transpose()) * W_;
    const Eigen::MatrixXd LtW = Lt.solve(W_bar);
    LB_bar += LtW;
    L_bar.noalias() -= LtW * W_.transpose();
    // v = L^{-1} (a - m)
    const Eigen::VectorXd Ltv = Lt.solve(v_bar);
    grad.free_mean = Ltv;
    L_bar.noalias() -= Ltv * v.transpose();
    grad.free_chol = LB_bar.triangularView<Eigen::Lower>();
  }

  // Lambda = s2f - colsq(A), clamped
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!lambda_active_(i)) lam_bar(i) = 0.0;
  }
  const double knn_bar = lam_bar.sum();
  A_bar.noalias() -= 2.0 * A_ * lam_bar.asDiagonal();

  // A = L^{-1} Kmn
  const Eigen::MatrixXd Kmn_bar = Lt.solve(A_bar);
  L_bar.noalias() -= Kmn_bar * A_.transpose();
  // Cholesky reverse step: Kmm_bar = L^{-T} Phi(L^T L_bar) L^{-1}
  Eigen::MatrixXd G = phi(Lt * L_bar);
  G = Lt.solve(G);
  const Eigen::MatrixXd Kmm_bar = symmetrize(Lt.solve(G.transpose()));

  const HyperParams& hp = state_.hyper;
  const Eigen::MatrixXd& Z = state_.inducing_inputs;
  grad.hyper = hyper_gradient(hp, Z, Z, Kmm_, Kmm_bar) + hyper_gradient(hp, Z, X_, Kmn_, Kmn_bar);
  grad.hyper(grad.hyper.size() - 1) += hp.signal_variance() * knn_bar;
  grad.inducing = input_gradient(hp, Z, Z, Kmm_, 2.0 * Kmm_bar) +
                  input_gradient(hp, Z, X_, Kmn_, Kmn_bar);
  grad.log_noise = s2_bar * noise_;
  grad.alpha = alpha_bar;
  return grad;
}

InducingPosterior inducing_posterior_params(const SparseGPState& state,
                                            const Eigen::MatrixXd& inputs,
                                            const Eigen::VectorXd& targets) {
  return SparseGP(state, inputs, targets).posterior();
}

PredictiveMoments sparse_predict(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets,
                                 const Eigen::MatrixXd& test_inputs) {
  return SparseGP(state, inputs, targets).predict(test_inputs);
}

double kl_sparse(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                 const Eigen::VectorXd& targets) {
  return SparseGP(state, inputs, targets).kl();
}

double sparse_nll(const SparseGPState& state, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, ObjectiveKind variant) {
  const double a = variant_alpha(variant);
  if (a < 0.0) throw UsageError("sparse_nll needs one of fitc, vfe, dtc");
  return SparseGP(state, inputs, targets, a).nll(variant == ObjectiveKind::kVfe);
}

Eigen::Index SparseLayout::size(const SparseGPState& state) const {
  const Eigen::Index m = state.num_inducing();
  Eigen::Index s = state.hyper.component_count() + 1;
  if (optimize_inducing) s += state.inducing_inputs.size();
  if (optimize_alpha && state.mode == SparseMode::kParametrized) s += 1;
  if (state.mode == SparseMode::kFreeForm) s += m + m * (m + 1) / 2;
  return s;
}

Eigen::VectorXd pack_parameters(const SparseGPState& state, const SparseLayout& layout) {
  Eigen::VectorXd v(layout.size(state));
  const Eigen::Index T = state.hyper.component_count();
  Eigen::Index k = 0;
  v.head(T) = state.hyper.to_vector();
  k += T;
  v(k++) = state.log_noise_variance;
  if (layout.optimize_inducing) {
    for (Eigen::Index i = 0; i < state.inducing_inputs.rows(); ++i) {
      for (Eigen::Index j = 0; j < state.inducing_inputs.cols(); ++j) {
        v(k++) = state.inducing_inputs(i, j);
      }
    }
  }
  if (layout.optimize_alpha && state.mode == SparseMode::kParametrized) v(k++) = state.alpha;
  if (state.mode == SparseMode::kFreeForm) {
    const Eigen::Index m = state.num_inducing();
    v.segment(k, m) = state.free_mean;
    k += m;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = j; i < m; ++i) v(k++) = state.free_chol(i, j);
    }
  }
  return v;
}

void unpack_parameters(SparseGPState& state, const SparseLayout& layout,
                       const Eigen::VectorXd& packed) {
  if (packed.size() != layout.size(state)) {
    throw DimensionError("sparse parameter vector has wrong length");
  }
  const Eigen::Index T = state.hyper.component_count();
  Eigen::Index k = 0;
  state.hyper.assign(packed.head(T));
  k += T;
  state.log_noise_variance = packed(k++);
  if (layout.optimize_inducing) {
    for (Eigen::Index i = 0; i < state.inducing_inputs.rows(); ++i) {
      for (Eigen::Index j = 0; j < state.inducing_inputs.cols(); ++j) {
        state.inducing_inputs(i, j) = packed(k++);
      }
    }
  }
  if (layout.optimize_alpha && state.mode == SparseMode::kParametrized) {
    state.alpha = std::clamp(packed(k++), 0.0, 1.0);
  }
  if (state.mode == SparseMode::kFreeForm) {
    const Eigen::Index m = state.num_inducing();
    state.free_mean = packed.segment(k, m);
    k += m;
    state.free_chol = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = j; i < m; ++i) state.free_chol(i, j) = packed(k++);
    }
  }
}

double variant_alpha(ObjectiveKind objective) {
  switch (objective) {
    case ObjectiveKind::kFitc: return 1.0;
    case ObjectiveKind::kVfe:
    case ObjectiveKind::kDtc: return 0.0;
    default: return -1.0;
  }
}

Evaluation sparse_objective_grad(const SparseGPState& state, ObjectiveKind objective,
                                 const BoundConfig& cfg, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets, const SparseLayout& layout,
                                 bool want_grad, const std::vector<Eigen::Index>* batch) {
  if (objective == ObjectiveKind::kNll) {
    throw UsageError("sparse models take fitc, vfe or dtc as the likelihood objective");
  }
  const SparseGP gp(state, inputs, targets, variant_alpha(objective));
  const bool trace_term = objective == ObjectiveKind::kVfe;
  Evaluation ev;
  ObjectiveSeeds seeds;
  if (is_pac(objective)) {
    ev.kl = gp.kl();
    if (!std::isfinite(ev.kl)) throw NumericError("KL divergence is infinite");
    seeds = pac_objective(objective, cfg, state.hyper.component_count(), targets,
                          gp.predict_train(), ev.kl, want_grad, batch);
    ev.risk = seeds.risk;
  } else {
    ev.nll = gp.nll(trace_term);
    seeds.value = ev.nll;
    seeds.d_nll = 1.0;
  }
  ev.objective = seeds.value;
  if (!want_grad) return ev;

  const SparseGP::Gradient g = gp.backprop(seeds, trace_term);
  ev.gradient.resize(layout.size(state));
  const Eigen::Index T = state.hyper.component_count();
  Eigen::Index k = 0;
  ev.gradient.head(T) = g.hyper;
  k += T;
  ev.gradient(k++) = g.log_noise;
  if (layout.optimize_inducing) {
    for (Eigen::Index i = 0; i < g.inducing.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.inducing.cols(); ++j) ev.gradient(k++) = g.inducing(i, j);
    }
  }
  if (layout.optimize_alpha && state.mode == SparseMode::kParametrized) {
    ev.gradient(k++) = g.alpha;
  }
  if (state.mode == SparseMode::kFreeForm) {
    const Eigen::Index m = state.num_inducing();
    ev.gradient.segment(k, m) = g.free_mean;
    k += m;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = j; i < m; ++i) ev.gradient(k++) = g.free_chol(i, j);
    }
  }
  return ev;
}

}  // namespace pacgp
