#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pacgp/kernels.hpp"
#include "pacgp/losses.hpp"

namespace pacgp {

struct BoundConfig {
  double delta = 0.01;
  double grid_half_width = 6.0;  // L
  int grid_digits = 2;           // r
  LossSpec loss;
  /// Optional union surcharge ln E for choosing epsilon among E candidates.
  double extra_log_card = 0.0;

  /// G = 2L * 10^r.
  double grid_intervals() const;
  void validate() const;
};

struct PenaltyTerms {
  double ln_theta_card = 0.0;  // T ln(G+1) (+ ln E)
  double ln_conf = 0.0;        // ln(2 sqrt(N) / delta)
  double total_over_n = 0.0;   // (KL + ln_theta_card + ln_conf) / N
};

struct Discretized {
  HyperParams hyper;
  double ln_theta_card = 0.0;
};

/// Clamps every log-hyperparameter into [-L, L] and rounds it to the nearest
/// point of the grid with spacing 2L/G.
Discretized discretize_hyperparams(const HyperParams& hyper, const BoundConfig& cfg);

/// T ln(G+1) + extra_log_card.
double log_theta_cardinality(Eigen::Index components, const BoundConfig& cfg);

PenaltyTerms penalty(Eigen::Index n, Eigen::Index components, double kl, const BoundConfig& cfg);

/// klinv(gibbs_train, pen.total_over_n).
double pac_bound(double gibbs_train, double kl, const PenaltyTerms& pen, Eigen::Index n);
/// gibbs_train + sqrt(pen.total_over_n / 2), not capped at 1.
double pinsker_bound(double gibbs_train, double kl, const PenaltyTerms& pen, Eigen::Index n);
/// min(1, 2B).
double bayes_bound(double b);

/// Training objectives.
enum class ObjectiveKind { kPacKl, kPacSqrt, kNll, kVfe, kFitc, kDtc };

std::string to_string(ObjectiveKind kind);
/// Accepts pac-kl, pac-sqrt, mle (or nll), vfe, fitc, dtc.
ObjectiveKind parse_objective(const std::string& name);
bool is_pac(ObjectiveKind kind);

/// Scalar objective with its sensitivities to the model outputs, from which
/// each model back-propagates to its own parameters.
struct ObjectiveSeeds {
  double value = 0.0;
  double risk = 0.0;
  Eigen::VectorXd d_mean;  // per training point
  Eigen::VectorXd d_var;
  double d_kl = 0.0;
  double d_nll = 0.0;
};

/// PAC objectives. value = klinv(R, (KL + ln|Theta| + ln_conf)/N) for kPacKl
/// and R + sqrt((KL + ...)/(2N)) for kPacSqrt, with R and the budget clamped as
/// described for klinv_partials. `batch` restricts R to a subset of points.
ObjectiveSeeds pac_objective(ObjectiveKind kind, const BoundConfig& cfg, Eigen::Index components,
                             const Eigen::VectorXd& targets, const PredictiveMoments& moments,
                             double kl, bool want_grad,
                             const std::vector<Eigen::Index>* batch = nullptr);

/// One row of the certificate table.
struct BoundReport {
  double B = 1.0;
  double B_pinsker = 1.0;
  double gibbs_train = 0.0;
  double gibbs_test = 0.0;
  double mse_test = 0.0;
  double kl_over_n = 0.0;
  double sigma_n_sq = 0.0;
  double bayes_bound = 1.0;
  double kl = 0.0;
  /// Gibbs training risk before rounding the hyperparameters.
  double gibbs_train_undiscretized = 0.0;
  PenaltyTerms penalty;

  struct Metadata {
    unsigned long long seed = 0;
    std::string dataset;
    std::string model;
    std::string objective;
    std::string loss;
    double epsilon = 0.0;
    double delta = 0.01;
    double grid_half_width = 6.0;
    int grid_digits = 2;
    std::string rounding = "nearest";
    Eigen::Index n_train = 0;
    Eigen::Index n_test = 0;
    Eigen::Index dim = 0;
    Eigen::Index num_inducing = 0;
    double alpha = 1.0;
    bool ard = false;
    std::string standardization = "train-only";
    std::string inducing_init = "random-subsample";
    double wall_time_seconds = 0.0;
    bool synthetic = false;
  } metadata;
};

}  // namespace pacgp
