#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pacgp/errors.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/sparse_gp.hpp"
#include "pacgp/training.hpp"

using namespace pacgp;

namespace {

struct Instance {
  SparseGPState state;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Instance random_instance(Eigen::Index n, Eigen::Index m, Eigen::Index d, std::mt19937_64& rng,
                         double alpha = 1.0) {
  Instance in;
  in.X = testing::uniform(n, d, -2, 2, rng);
  in.y = testing::noisy_sine(in.X, 0.2, rng);
  in.state.hyper = testing::random_hyper(d, true, rng);
  in.state.log_noise_variance = std::log(0.1);
  in.state.inducing_inputs = testing::uniform(m, d, -2, 2, rng);
  in.state.alpha = alpha;
  in.state.mean.constant = 0.1;
  return in;
}

// Dense reference quantities with the same 1e-8 sigma_s^2 jitter on K_MM.
struct Dense {
  Eigen::MatrixXd Kmm, Knm, Q;
  Eigen::VectorXd lambda;
  double noise;
};

Dense dense(const Instance& in) {
  Dense d;
  const HyperParams& h = in.state.hyper;
  const Eigen::Index m = in.state.num_inducing();
  d.Kmm = gram(h, in.state.inducing_inputs, in.state.inducing_inputs) +
          1e-8 * h.signal_variance() * Eigen::MatrixXd::Identity(m, m);
  d.Knm = gram(h, in.X, in.state.inducing_inputs);
  d.Q = d.Knm * d.Kmm.ldlt().solve(d.Knm.transpose());
  d.lambda = (h.signal_variance() - d.Q.diagonal().array()).max(0.0);
  d.noise = std::exp(in.state.log_noise_variance);
  return d;
}

double dense_nll(const Instance& in, ObjectiveKind kind) {
  const Dense d = dense(in);
  const Eigen::Index n = in.y.size();
  Eigen::MatrixXd C = d.Q + d.noise * Eigen::MatrixXd::Identity(n, n);
  if (kind == ObjectiveKind::kFitc) C.diagonal() += d.lambda;
  double f = -testing::gaussian_logpdf(in.y - in.state.mean.at(n), C);
  if (kind == ObjectiveKind::kVfe) f += d.lambda.sum() / (2.0 * d.noise);
  return f;
}

}  // namespace

TEST_CASE("sparse likelihood against dense evaluation") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 4; ++t) {
    const Instance in = random_instance(60, 8, 2, rng);
    for (ObjectiveKind k : {ObjectiveKind::kFitc, ObjectiveKind::kVfe, ObjectiveKind::kDtc}) {
      CAPTURE(to_string(k));
      CHECK(testing::rel_err(sparse_nll(in.state, in.X, in.y, k), dense_nll(in, k)) < 1e-8);
    }
    CHECK(sparse_nll(in.state, in.X, in.y, ObjectiveKind::kVfe) >=
          sparse_nll(in.state, in.X, in.y, ObjectiveKind::kDtc));
  }
  const Instance in = random_instance(10, 3, 1, rng);
  CHECK_THROWS_AS(sparse_nll(in.state, in.X, in.y, ObjectiveKind::kPacKl), UsageError);
}

TEST_CASE("parametrized posterior against the dense formula") {
  std::mt19937_64 rng(2);
  for (double alpha : {0.0, 0.4, 1.0}) {
    CAPTURE(alpha);
    const Instance in = random_instance(50, 6, 2, rng, alpha);
    const Dense d = dense(in);
    const Eigen::VectorXd D = (alpha * d.lambda.array() + d.noise).matrix();
    const Eigen::MatrixXd Dinv_Knm = D.cwiseInverse().asDiagonal() * d.Knm;
    const Eigen::MatrixXd Qmm = d.Kmm + d.Knm.transpose() * Dinv_Knm;
    const Eigen::VectorXd r = in.y - in.state.mean.at(50);
    const Eigen::VectorXd a_ref =
        in.state.mean.at(6) + d.Kmm * Qmm.ldlt().solve(Dinv_Knm.transpose() * r);
    const Eigen::MatrixXd B_ref = d.Kmm * Qmm.ldlt().solve(d.Kmm);

    const InducingPosterior post = inducing_posterior_params(in.state, in.X, in.y);
    CHECK((post.a - a_ref).norm() / a_ref.norm() < 1e-8);
    CHECK((post.B - B_ref).norm() / B_ref.norm() < 1e-8);

    const double kl_ref = testing::gaussian_kl(post.a, post.B, in.state.mean.at(6), d.Kmm);
    CHECK(testing::rel_err(kl_sparse(in.state, in.X, in.y), kl_ref) < 1e-8);

    const Eigen::MatrixXd Xs = testing::uniform(7, 2, -2, 2, rng);
    const Eigen::MatrixXd Ksm = gram(in.state.hyper, Xs, in.state.inducing_inputs);
    const Eigen::MatrixXd W = d.Kmm.ldlt().solve(Ksm.transpose());
    const Eigen::VectorXd mean_ref = in.state.mean.at(7) + W.transpose() * (a_ref - in.state.mean.at(6));
    const Eigen::VectorXd var_ref =
        (in.state.hyper.signal_variance() -
         (W.transpose() * (d.Kmm - B_ref) * W).diagonal().array()).matrix();
    const PredictiveMoments p = sparse_predict(in.state, in.X, in.y, Xs);
    CHECK((p.mean - mean_ref).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p.var - var_ref).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sparse model at Z = X reduces to the full GP") {
  std::mt19937_64 rng(3);
  const FullGPState full = testing::random_full(30, 2, true, 0.2, rng);
  SparseGPState s;
  s.hyper = full.hyper;
  s.log_noise_variance = full.log_noise_variance;
  s.inducing_inputs = full.train_inputs;
  s.alpha = 1.0;
  const Eigen::MatrixXd Xs = testing::uniform(9, 2, -2, 2, rng);
  const PredictiveMoments pf = full_predict(full, Xs);
  for (double alpha : {1.0, 0.0, 0.5}) {
    s.alpha = alpha;
    const PredictiveMoments ps = sparse_predict(s, full.train_inputs, full.train_targets, Xs);
    CHECK((ps.mean - pf.mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((ps.var - pf.var).cwiseAbs().maxCoeff() < 1e-6);
  }
  s.alpha = 1.0;
  CHECK(testing::rel_err(kl_sparse(s, full.train_inputs, full.train_targets), kl_full(full)) < 1e-6);
  const double nll = nll_full(full);
  CHECK(testing::rel_err(sparse_nll(s, full.train_inputs, full.train_targets, ObjectiveKind::kFitc), nll) < 1e-6);
  CHECK(testing::rel_err(sparse_nll(s, full.train_inputs, full.train_targets, ObjectiveKind::kDtc), nll) < 1e-6);

  const SparseGP gp(s, full.train_inputs, full.train_targets);
  CHECK(gp.min_raw_lambda() < 1e-6);
}

TEST_CASE("prior-equal and far-field behaviour") {
  std::mt19937_64 rng(4);
  Instance in = random_instance(20, 4, 2, rng);
  in.state.init_free_form_at_prior();
  CHECK(std::abs(kl_sparse(in.state, in.X, in.y)) < 1e-10);
  const Eigen::MatrixXd Xs = testing::uniform(5, 2, -2, 2, rng);
  const PredictiveMoments p = sparse_predict(in.state, in.X, in.y, Xs);
  CHECK((p.mean.array() - in.state.mean.constant).abs().maxCoeff() < 1e-8);
  CHECK((p.var.array() - in.state.hyper.signal_variance()).abs().maxCoeff() < 1e-6);

  Instance fitted = random_instance(20, 4, 2, rng);
  const Eigen::MatrixXd far = Eigen::MatrixXd::Constant(1, 2, 1e3);
  const PredictiveMoments pf = sparse_predict(fitted.state, fitted.X, fitted.y, far);
  CHECK(pf.mean(0) == doctest::Approx(fitted.state.mean.constant));
  CHECK(pf.var(0) == doctest::Approx(fitted.state.hyper.signal_variance()));

  Instance flat = random_instance(20, 4, 2, rng);
  flat.y.setConstant(flat.state.mean.constant);
  const InducingPosterior post = inducing_posterior_params(flat.state, flat.X, flat.y);
  CHECK((post.a.array() - flat.state.mean.constant).abs().maxCoeff() < 1e-12);
}

TEST_CASE("sparse objective gradients") {
  std::mt19937_64 rng(5);
  BoundConfig cfg;
  cfg.loss.epsilon = 0.5;
  const Instance in = random_instance(40, 5, 2, rng);
  SparseLayout with_z;
  for (ObjectiveKind k : {ObjectiveKind::kPacKl, ObjectiveKind::kPacSqrt, ObjectiveKind::kVfe,
                          ObjectiveKind::kFitc, ObjectiveKind::kDtc}) {
    CAPTURE(to_string(k));
    const SparseProblem p(in.state, in.X, in.y, k, cfg, with_z);
    CHECK(gradient_check(p, p.parameters()) <= 1e-4);
  }
  SparseLayout with_alpha;
  with_alpha.optimize_alpha = true;
  SparseGPState mid = in.state;
  mid.alpha = 0.6;
  const SparseProblem pa(mid, in.X, in.y, ObjectiveKind::kPacKl, cfg, with_alpha);
  CHECK(gradient_check(pa, pa.parameters()) <= 1e-4);

  SparseGPState ff = in.state;
  ff.init_free_form_at_prior();
  ff.free_mean.array() += 0.3;
  const SparseProblem pf(ff, in.X, in.y, ObjectiveKind::kPacKl, cfg, with_z);
  CHECK(gradient_check(pf, pf.parameters()) <= 1e-4);
}

TEST_CASE("gradients stay accurate when K_MM is at the jitter floor") {
  // 15 inducing points on a unit lengthscale in 1-D: K_MM is singular to
  // working precision and only the jitter keeps it invertible
  std::mt19937_64 rng(9);
  Instance in = random_instance(150, 15, 1, rng);
  in.state.hyper = HyperParams::isotropic();
  BoundConfig cfg;
  cfg.loss.epsilon = 0.5;
  for (ObjectiveKind k : {ObjectiveKind::kPacKl, ObjectiveKind::kVfe, ObjectiveKind::kFitc}) {
    CAPTURE(to_string(k));
    const SparseProblem p(in.state, in.X, in.y, k, cfg, SparseLayout{});
    // the forward pass itself carries ~1e-10 relative noise here, so the
    // central difference needs a larger step than the default
    CHECK(gradient_check(p, p.parameters(), 1e-4) <= 1e-4);
  }
}

TEST_CASE("free-form KL has a stationary point at the prior") {
  std::mt19937_64 rng(6);
  Instance in = random_instance(30, 4, 2, rng);
  in.state.init_free_form_at_prior();
  SparseGP gp(in.state, in.X, in.y);
  ObjectiveSeeds seeds;
  seeds.d_kl = 1.0;
  seeds.d_mean = Eigen::VectorXd::Zero(30);
  seeds.d_var = Eigen::VectorXd::Zero(30);
  const SparseGP::Gradient g = gp.backprop(seeds, false);
  CHECK(g.free_mean.norm() < 1e-8);
  CHECK(g.free_chol.norm() < 1e-6);
}

TEST_CASE("inducing gradient vanishes for a flat kernel") {
  std::mt19937_64 rng(7);
  Instance in = random_instance(30, 4, 2, rng);
  ObjectiveSeeds seeds;
  seeds.d_nll = 1.0;
  seeds.d_mean = Eigen::VectorXd::Zero(30);
  seeds.d_var = Eigen::VectorXd::Zero(30);
  auto z_grad = [&](double log_l2) {
    in.state.hyper.log_lengthscales.setConstant(log_l2);
    return SparseGP(in.state, in.X, in.y, 1.0).backprop(seeds, false).inducing.norm();
  };
  const double unit = z_grad(0.0);
  const double flat = z_grad(std::log(1e12));
  const double flatter = z_grad(std::log(1e16));
  CHECK(flat < 1e-4 * unit);
  CHECK(flatter < 1e-2 * flat);
}

TEST_CASE("sparse input validation") {
  std::mt19937_64 rng(8);
  Instance in = random_instance(10, 3, 2, rng);
  CHECK_THROWS_AS(sparse_predict(in.state, in.X, in.y.head(9), in.X), DimensionError);
  in.state.inducing_inputs = Eigen::MatrixXd(0, 2);
  CHECK_THROWS_AS(kl_sparse(in.state, in.X, in.y), DimensionError);
}
