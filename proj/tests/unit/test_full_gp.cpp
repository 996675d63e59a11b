#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pacgp/errors.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/training.hpp"

using namespace pacgp;

TEST_CASE("full GP predictive moments") {
  std::mt19937_64 rng(1);
  SUBCASE("zero residuals give the prior mean") {
    FullGPState s = testing::random_full(12, 2, true, 0.1, rng);
    s.mean.constant = 0.7;
    s.train_targets.setConstant(0.7);
    const PredictiveMoments p = full_predict(s, testing::uniform(5, 2, -3, 3, rng));
    CHECK((p.mean.array() - 0.7).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("interpolation as the noise vanishes") {
    FullGPState s;
    s.train_inputs = Eigen::VectorXd::LinSpaced(6, -2.5, 2.5);
    s.train_targets = s.train_inputs.col(0).array().sin();
    s.hyper = HyperParams::isotropic(std::log(0.5), 0.0);
    s.log_noise_variance = std::log(1e-10);
    const PredictiveMoments p = full_predict(s, s.train_inputs);
    CHECK((p.mean - s.train_targets).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(p.var.maxCoeff() < 1e-4);
  }
  SUBCASE("single training point") {
    FullGPState s;
    s.train_inputs = Eigen::MatrixXd::Constant(1, 1, 0.2);
    s.train_targets = Eigen::VectorXd::Constant(1, 1.3);
    s.mean.constant = 0.1;
    s.hyper = HyperParams::isotropic(0.3, 0.2);
    s.log_noise_variance = std::log(0.4);
    Eigen::MatrixXd x(1, 1);
    x << -0.5;
    const double k1 = gram(s.hyper, x, s.train_inputs)(0, 0);
    const double k11 = std::exp(0.2);
    const PredictiveMoments p = full_predict(s, x);
    CHECK(p.mean(0) == doctest::Approx(0.1 + k1 * 1.2 / (k11 + 0.4)).epsilon(1e-12));
    CHECK(p.var(0) == doctest::Approx(k11 - k1 * k1 / (k11 + 0.4)).epsilon(1e-12));
  }
}

TEST_CASE("full GP KL") {
  std::mt19937_64 rng(2);
  SUBCASE("eigenvalue form") {
    for (int t = 0; t < 5; ++t) {
      const FullGPState s = testing::random_full(40, 2, true, 0.05 + 0.2 * t, rng);
      const Eigen::MatrixXd K = gram(s.hyper, s.train_inputs, s.train_inputs);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
      const double sn2 = std::exp(s.log_noise_variance);
      const Eigen::VectorXd r = s.train_targets - s.mean.at(40);
      double ref = 0.0;
      for (Eigen::Index i = 0; i < 40; ++i) {
        const double l = std::max(es.eigenvalues()(i), 0.0);
        const double proj = es.eigenvectors().col(i).dot(r);
        ref += 0.5 * (std::log((l + sn2) / sn2) - l / (l + sn2)) + 0.5 * l * proj * proj / ((l + sn2) * (l + sn2));
      }
      CHECK(testing::rel_err(kl_full(s), ref) < 1e-8);
    }
  }
  SUBCASE("scalar case") {
    FullGPState s;
    s.train_inputs = Eigen::MatrixXd::Zero(1, 1);
    s.train_targets = Eigen::VectorXd::Constant(1, 0.8);
    s.hyper = HyperParams::isotropic(0.0, std::log(1.5));
    s.log_noise_variance = std::log(0.3);
    const double k = 1.5, n2 = 0.3;
    const double ref = 0.5 * (std::log((k + n2) / n2) - k / (k + n2)) + 0.5 * k * 0.64 / ((k + n2) * (k + n2));
    CHECK(std::abs(kl_full(s) - ref) < 1e-12);
  }
  SUBCASE("infinite-noise limit") {
    FullGPState s = testing::random_full(20, 1, false, 1e8, rng);
    CHECK(kl_full(s) < 1e-4);
  }
}

TEST_CASE("full GP negative log likelihood") {
  std::mt19937_64 rng(3);
  SUBCASE("univariate") {
    FullGPState s;
    s.train_inputs = Eigen::MatrixXd::Zero(1, 1);
    s.train_targets = Eigen::VectorXd::Constant(1, 0.9);
    s.hyper = HyperParams::isotropic(0.0, -60.0);  // K is numerically zero
    s.log_noise_variance = std::log(0.25);
    const double ref = 0.5 * std::log(0.25) + 0.5 * std::log(2 * M_PI) + 0.81 / 0.5;
    CHECK(nll_full(s) == doctest::Approx(ref).epsilon(1e-10));
  }
  SUBCASE("direct density") {
    for (int t = 0; t < 5; ++t) {
      const FullGPState s = testing::random_full(15, 3, true, 0.2, rng);
      const Eigen::MatrixXd C = gram(s.hyper, s.train_inputs, s.train_inputs) +
                                std::exp(s.log_noise_variance) * Eigen::MatrixXd::Identity(15, 15);
      const double ref = -testing::gaussian_logpdf(s.train_targets - s.mean.at(15), C);
      CHECK(testing::rel_err(nll_full(s), ref) < 1e-10);
    }
  }
  SUBCASE("permutation invariance") {
    FullGPState s = testing::random_full(10, 2, false, 0.3, rng);
    FullGPState p = s;
    for (Eigen::Index i = 0; i < 10; ++i) {
      p.train_inputs.row(i) = s.train_inputs.row(9 - i);
      p.train_targets(i) = s.train_targets(9 - i);
    }
    CHECK(nll_full(p) == doctest::Approx(nll_full(s)).epsilon(1e-12));
    CHECK(kl_full(p) == doctest::Approx(kl_full(s)).epsilon(1e-10));
  }
}

TEST_CASE("full objective gradients") {
  std::mt19937_64 rng(4);
  BoundConfig cfg;
  cfg.loss.epsilon = 0.5;
  const FullGPState s = testing::random_full(30, 2, true, 0.2, rng);
  CHECK(gradient_check(FullProblem(s, ObjectiveKind::kPacKl, cfg), pack_parameters(s)) <= 1e-4);
  CHECK(gradient_check(FullProblem(s, ObjectiveKind::kPacSqrt, cfg), pack_parameters(s)) <= 1e-4);
  CHECK(gradient_check(FullProblem(s, ObjectiveKind::kNll, cfg), pack_parameters(s)) <= 1e-5);
  CHECK_THROWS_AS(full_objective_grad(s, ObjectiveKind::kFitc, cfg), UsageError);
}

TEST_CASE("likelihood gradient vanishes at a converged fit") {
  std::mt19937_64 rng(5);
  FullGPState s;
  s.train_inputs = testing::uniform(40, 1, -3, 3, rng);
  s.train_targets = testing::noisy_sine(s.train_inputs, 0.2, rng);
  s.hyper = HyperParams::isotropic();
  TrainConfig tc;
  tc.objective = ObjectiveKind::kNll;
  tc.tolerance = 1e-12;
  tc.confine_hyper = false;
  BoundConfig cfg;
  const FullGPState fit = train_full(s, tc, cfg);
  const Evaluation e = full_objective_grad(fit, ObjectiveKind::kNll, cfg);
  CHECK(e.gradient.norm() < 1e-5);
}
