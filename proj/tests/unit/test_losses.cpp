#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pacgp/errors.hpp"
#include "pacgp/losses.hpp"

using namespace pacgp;

namespace {

LossSpec spec_of(LossKind kind, double eps) {
  LossSpec s;
  s.kind = kind;
  s.epsilon = eps;
  return s;
}

const LossKind kAllKinds[] = {LossKind::kZeroOne, LossKind::kClippedSquare, LossKind::kInvGauss,
                              LossKind::kBand};

// Gauss-Kronrod over mhat +/- 10 sdev, split where the loss has kinks or jumps.
double quadrature(const LossSpec& s, double y, double m, double sd) {
  auto f = [&](double v) {
    const double z = (v - m) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI)) * pointwise_loss(s, y, v);
  };
  std::vector<double> cuts = {m - 10 * sd, m + 10 * sd};
  const double lo = s.kind == LossKind::kBand ? s.band_lo(y) : y - s.epsilon;
  const double hi = s.kind == LossKind::kBand ? s.band_hi(y) : y + s.epsilon;
  for (double c : {lo, hi, y}) {
    if (c > cuts[0] && c < cuts[1]) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1],
                                                                           25, 1e-12);
  }
  return total;
}

}  // namespace

TEST_CASE("pointwise losses") {
  CHECK(pointwise_loss(spec_of(LossKind::kZeroOne, 0.6), 0.0, 0.5) == 0.0);
  CHECK(pointwise_loss(spec_of(LossKind::kZeroOne, 0.6), 0.0, 0.7) == 1.0);
  CHECK(pointwise_loss(spec_of(LossKind::kClippedSquare, 1.0), 0.0, 0.5) == doctest::Approx(0.25));
  CHECK(pointwise_loss(spec_of(LossKind::kClippedSquare, 1.0), 0.0, 3.0) == 1.0);
  CHECK(pointwise_loss(spec_of(LossKind::kInvGauss, 1.0), 0.0, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  LossSpec band = spec_of(LossKind::kBand, 0.1);
  CHECK(pointwise_loss(band, 10.0, 10.9) == 0.0);
  CHECK(pointwise_loss(band, 10.0, 11.1) == 1.0);
  band.relative = false;
  CHECK(pointwise_loss(band, 10.0, 10.2) == 1.0);
  for (LossKind k : kAllKinds) {
    CHECK(parse_loss_kind(to_string(k)) == k);
    const double v = pointwise_loss(spec_of(k, 0.5), 1.0, -3.0);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(parse_loss_kind("hinge"), UsageError);
  CHECK_THROWS_AS(spec_of(LossKind::kZeroOne, 0.0).validate(), UsageError);
}

TEST_CASE("Gibbs risk closed forms against quadrature") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ue(0.1, 2.0);
  std::uniform_real_distribution<double> ur(0.05, 0.9);
  std::uniform_real_distribution<double> ls(-2.0, std::log10(3.0));
  for (LossKind kind : kAllKinds) {
    CAPTURE(to_string(kind));
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const LossSpec s = spec_of(kind, kind == LossKind::kBand ? ur(rng) : ue(rng));
      const double y = nd(rng);
      const double m = y + 0.8 * nd(rng);
      const double sd = std::pow(10.0, ls(rng));
      worst = std::max(worst, std::abs(gibbs_pointwise(s, y, m, sd) - quadrature(s, y, m, sd)));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("Gibbs risk limits") {
  const LossSpec z = spec_of(LossKind::kZeroOne, 0.6);
  CHECK(gibbs_pointwise(z, 0.3, 0.3, 0.5) ==
        doctest::Approx(2.0 * normal_cdf(-0.6 / 0.5)).epsilon(1e-14));
  for (LossKind k : kAllKinds) {
    const LossSpec s = spec_of(k, 0.5);
    CHECK(gibbs_pointwise(s, 0.0, 0.3, 1e-9) == doctest::Approx(pointwise_loss(s, 0.0, 0.3)).epsilon(1e-6));
    CHECK(gibbs_pointwise(s, 0.0, 0.9, 1e-9) == doctest::Approx(pointwise_loss(s, 0.0, 0.9)).epsilon(1e-6));
  }
}

TEST_CASE("Gibbs risk gradients") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> us(0.2, 1.5);
  for (LossKind kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const LossSpec s = spec_of(kind, 0.7);
    for (int i = 0; i < 20; ++i) {
      const double y = nd(rng), m = y + nd(rng), sd = us(rng);
      const GibbsPoint g = gibbs_pointwise_grad(s, y, m, sd);
      CHECK(g.value == doctest::Approx(gibbs_pointwise(s, y, m, sd)).epsilon(1e-14));
      const double h = 1e-6;
      const double fm = (gibbs_pointwise(s, y, m + h, sd) - gibbs_pointwise(s, y, m - h, sd)) / (2 * h);
      const double fs = (gibbs_pointwise(s, y, m, sd + h) - gibbs_pointwise(s, y, m, sd - h)) / (2 * h);
      CHECK(std::abs(g.d_mean - fm) <= 1e-5 * std::max(std::abs(fm), 1e-3));
      CHECK(std::abs(g.d_sdev - fs) <= 1e-5 * std::max(std::abs(fs), 1e-3));
    }
  }
  // centred prediction: the mean direction is flat for the symmetric band
  CHECK(std::abs(gibbs_pointwise_grad(spec_of(LossKind::kZeroOne, 0.6), 0.2, 0.2, 0.4).d_mean) < 1e-15);
  // very wide predictive laws barely react
  const GibbsPoint wide = gibbs_pointwise_grad(spec_of(LossKind::kInvGauss, 0.5), 0.0, 0.1, 1e4);
  CHECK(std::abs(wide.d_mean) < 1e-8);
  CHECK(std::abs(wide.d_sdev) < 1e-8);
}

TEST_CASE("dataset risk, Monte Carlo and minibatches") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd;
  const Eigen::Index n = 10;
  Eigen::VectorXd y(n), m(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = nd(rng);
    m(i) = y(i) + 0.5 * nd(rng);
    v(i) = 0.1 + 0.3 * std::abs(nd(rng));
  }
  const PredictiveMoments pm{m, v};
  const LossSpec s = spec_of(LossKind::kZeroOne, 0.6);
  const double risk = gibbs_risk(s, y, pm);

  SUBCASE("single point and exact targets") {
    const PredictiveMoments one{m.head(1), v.head(1)};
    CHECK(gibbs_risk(s, y.head(1), one) == doctest::Approx(gibbs_pointwise(s, y(0), m(0), std::sqrt(v(0)))));
    const PredictiveMoments exact{y, Eigen::VectorXd::Constant(n, 1e-24)};
    CHECK(gibbs_risk(s, y, exact) == doctest::Approx(0.0));
  }

  SUBCASE("Monte Carlo oracle") {
    // 1e6 draws per point; sum of Bernoulli variances gives the standard error
    double total = 0.0, var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::normal_distribution<double> draw(m(i), std::sqrt(v(i)));
      long hits = 0;
      const long draws = 1'000'000;
      for (long k = 0; k < draws; ++k) hits += pointwise_loss(s, y(i), draw(rng)) > 0.5 ? 1 : 0;
      const double p = static_cast<double>(hits) / draws;
      total += p;
      var += p * (1 - p) / draws;
    }
    const double mc = total / n;
    const double se = std::sqrt(var) / n;
    CHECK(std::abs(mc - risk) <= 3.0 * se + 1e-12);
  }

  SUBCASE("minibatches") {
    std::vector<Eigen::Index> all(n);
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    CHECK(minibatch_risk(s, y, pm, all) == doctest::Approx(risk).epsilon(1e-14));
    CHECK(minibatch_risk(s, y, pm, {3}) == doctest::Approx(gibbs_pointwise(s, y(3), m(3), std::sqrt(v(3)))));
    CHECK_THROWS(minibatch_risk(s, y, pm, {}));

    // sampling oracle: mean over random batches of 4 approaches the full risk
    std::vector<double> vals;
    for (int b = 0; b < 10000; ++b) {
      std::vector<Eigen::Index> perm = all;
      std::shuffle(perm.begin(), perm.end(), rng);
      perm.resize(4);
      vals.push_back(minibatch_risk(s, y, pm, perm));
    }
    double mean = 0.0;
    for (double x : vals) mean += x;
    mean /= vals.size();
    double ss = 0.0;
    for (double x : vals) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (vals.size() - 1) / vals.size());
    CHECK(std::abs(mean - risk) <= 3.0 * se);
  }

  SUBCASE("moment gradient agrees with differences") {
    const RiskWithMomentGrad g = gibbs_risk_moment_grad(s, y, pm);
    CHECK(g.value == doctest::Approx(risk));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6;
      PredictiveMoments a = pm, b = pm;
      a.var(i) += h;
      b.var(i) -= h;
      const double fd = (gibbs_risk(s, y, a) - gibbs_risk(s, y, b)) / (2 * h);
      CHECK(g.d_var(i) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}
