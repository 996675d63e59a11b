#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pacgp/binary_kl.hpp"
#include "pacgp/data.hpp"
#include "pacgp/errors.hpp"
#include "pacgp/report.hpp"
#include "pacgp/training.hpp"

using namespace pacgp;

TEST_CASE("training lowers the objective and is reproducible") {
  std::mt19937_64 rng(1);
  FullGPState s;
  s.train_inputs = testing::uniform(60, 1, -3, 3, rng);
  s.train_targets = testing::noisy_sine(s.train_inputs, 0.2, rng);
  s.hyper = HyperParams::isotropic();
  BoundConfig cfg;
  cfg.loss.epsilon = 0.4;
  TrainConfig tc;
  tc.objective = ObjectiveKind::kPacKl;

  FullProblem p0(s, ObjectiveKind::kPacKl, cfg);
  const double before = p0.evaluate(p0.parameters(), false, nullptr).objective;
  TrainResult r1, r2;
  const FullGPState a = train_full(s, tc, cfg, &r1);
  const FullGPState b = train_full(s, tc, cfg, &r2);
  CHECK(r1.objective < before);
  CHECK(r1.objective == r2.objective);
  CHECK(a.log_noise_variance == b.log_noise_variance);
  CHECK_FALSE(r1.trace.empty());
  // the hyperparameters stay inside the grid box
  CHECK(a.hyper.to_vector().cwiseAbs().maxCoeff() <= cfg.grid_half_width);
}

TEST_CASE("constant targets: certificate close to the penalty-only bound") {
  std::mt19937_64 rng(2);
  FullGPState s;
  s.train_inputs = testing::uniform(200, 1, -3, 3, rng);
  s.train_targets = Eigen::VectorXd::Zero(200);
  s.hyper = HyperParams::isotropic();
  BoundConfig cfg;
  cfg.loss.epsilon = 0.5;
  TrainConfig tc;
  const FullGPState fit = discretized(train_full(s, tc, cfg), cfg);
  Dataset test;
  test.X = s.train_inputs;
  test.y = s.train_targets;
  const BoundReport rep = build_report(fit, test, cfg);
  const PenaltyTerms pen = penalty(200, 2, 0.0, cfg);
  CHECK(rep.gibbs_train < 0.01);
  CHECK(rep.B <= klinv(0.01, pen.total_over_n) + 0.02);
}

TEST_CASE("likelihood fit recovers lengthscales of a sampled GP") {
  // smaller than the full discretization protocol to keep the unit suite quick
  const SyntheticGP g = sample_synthetic_gp(600, 10, 2, 7, 0.01);
  FullGPState s;
  s.train_inputs = g.train.X;
  s.train_targets = g.train.y;
  s.hyper = HyperParams::with_ard(2, 0.0, 0.0);
  TrainConfig tc;
  tc.objective = ObjectiveKind::kNll;
  BoundConfig cfg;
  const FullGPState fit = train_full(s, tc, cfg);
  for (Eigen::Index k = 0; k < 2; ++k) {
    // ln l within 0.3 of the truth
    CHECK(std::abs(0.5 * fit.hyper.log_lengthscales(k) - 0.5 * g.true_log_lengthscales(k)) < 0.3);
  }
}

TEST_CASE("minibatch Adam and restarts") {
  std::mt19937_64 rng(3);
  FullGPState s;
  s.train_inputs = testing::uniform(80, 1, -3, 3, rng);
  s.train_targets = testing::noisy_sine(s.train_inputs, 0.2, rng);
  s.hyper = HyperParams::isotropic();
  BoundConfig cfg;
  TrainConfig tc;
  tc.minibatch_size = 16;
  tc.max_iters = 300;
  tc.learning_rate = 0.05;
  TrainResult r;
  const FullGPState fit = train_full(s, tc, cfg, &r);
  FullProblem p0(s, ObjectiveKind::kPacKl, cfg);
  FullProblem p1(fit, ObjectiveKind::kPacKl, cfg);
  CHECK(p1.evaluate(p1.parameters(), false, nullptr).objective < p0.evaluate(p0.parameters(), false, nullptr).objective);

  TrainConfig multi;
  multi.restart_count = 3;
  TrainResult rm;
  train_full(s, multi, cfg, &rm);
  CHECK(rm.restarts.size() == 3);
  for (const RestartOutcome& o : rm.restarts) {
    if (!o.failed) CHECK(rm.objective <= o.objective + 1e-12);
  }
}

TEST_CASE("train configuration validation") {
  TrainConfig tc;
  tc.max_iters = 0;
  CHECK_THROWS_AS(tc.validate(), UsageError);
  tc = TrainConfig{};
  tc.restart_noise_lo = 1.0;
  tc.restart_noise_hi = 0.5;
  CHECK_THROWS_AS(tc.validate(), UsageError);
  CHECK(parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK_THROWS_AS(parse_optimizer("sgd"), UsageError);
}

TEST_CASE("certificates refuse off-grid hyperparameters") {
  std::mt19937_64 rng(4);
  FullGPState s = testing::random_full(20, 1, false, 0.2, rng);
  s.hyper.log_lengthscales(0) = 0.12345;
  Dataset test;
  test.X = s.train_inputs;
  test.y = s.train_targets;
  CHECK_THROWS_AS(build_report(s, test, BoundConfig{}), DomainError);
  const BoundReport rep = build_report(discretized(s, BoundConfig{}), test, BoundConfig{});
  CHECK(rep.B >= rep.gibbs_train);
  CHECK(rep.B <= std::min(1.0, rep.B_pinsker) + 1e-12);
  CHECK(rep.bayes_bound == doctest::Approx(std::min(1.0, 2 * rep.B)));
}
