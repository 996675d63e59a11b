#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pacgp/kernels.hpp"

namespace pacgp {

struct Dataset {
  Eigen::MatrixXd X;  // N x d
  Eigen::VectorXd y;
  std::string name;
  std::vector<std::string> feature_names;
  std::string target_name;

  /// Statistics used to standardize X and y (identity when not standardized).
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_sds;
  double target_mean = 0.0;
  double target_sd = 1.0;
  bool standardized = false;
  /// Generated rather than loaded from a real-world file.
  bool synthetic = false;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dim() const { return X.cols(); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Reads a numeric CSV. A header is detected when the first row has a
/// non-numeric cell. `target_column` is a column name or 0-based index; empty
/// selects the last column. Throws IoError with the row and column of the
/// first bad cell.
Dataset load_csv(const std::string& path, const std::string& target_column = "");

/// Writes features then target, with a header, at full precision.
void write_csv(const std::string& path, const Dataset& ds);

enum class Standardization {
  kTrainOnly,  // statistics from the training split, applied to both
  kFull,       // statistics from the whole data set before splitting
  kNone,
};

/// Seeded shuffle, split, and standardization. Columns that are constant on
/// the statistics set are dropped with a warning.
std::pair<Dataset, Dataset> split_and_standardize(const Dataset& ds, double train_fraction,
                                                  unsigned long long seed,
                                                  Standardization mode = Standardization::kTrainOnly);

/// Standardizes both sets with the statistics of `train`.
std::pair<Dataset, Dataset> standardize_with_train(const Dataset& train, const Dataset& test);

/// Maps standardized targets back to the original scale.
Eigen::VectorXd destandardize_targets(const Dataset& ds, const Eigen::VectorXd& y);

/// Seeded subsample without replacement (identity if n >= size).
Dataset subsample(const Dataset& ds, Eigen::Index n, unsigned long long seed);

/// Seeded permutation of 0..n-1.
std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, unsigned long long seed);

struct SyntheticGP {
  Dataset train;
  Dataset test;
  Eigen::VectorXd true_log_lengthscales;  // ln(l_i^2)
  double signal_variance = 1.0;
  double noise_variance = 0.0;
};

/// Inputs uniform on [-3,3]^d, SE-ARD kernel with ln(l_i) ~ U[-1,1] and unit
/// signal variance. Training outputs are drawn jointly; test outputs are drawn
/// in blocks of at most `block` points, each block jointly Gaussian given the
/// training outputs. Gaussian noise of the given variance is added to all
/// outputs.
SyntheticGP sample_synthetic_gp(Eigen::Index n_train, Eigen::Index n_test, Eigen::Index d,
                                unsigned long long seed, double noise_variance = 0.01,
                                Eigen::Index block = 1000);

/// Same construction with prescribed hyperparameters instead of random
/// lengthscales.
SyntheticGP sample_gp(Eigen::Index n_train, Eigen::Index n_test, const HyperParams& hyper,
                      unsigned long long seed, double noise_variance, Eigen::Index block = 1000);

/// Stand-in for the 26-dimensional pol regression set when the real file is
/// unavailable: SE-ARD draw on [-3,3]^26 with six relevant inputs (l from 2 to 8) and
/// twenty nearly irrelevant ones (l = 40), noise variance 0.02, then
/// standardized with the training statistics. Flagged synthetic.
SyntheticGP pol_surrogate(Eigen::Index n_train, Eigen::Index n_test, unsigned long long seed);

/// One-dimensional regression set with 200 points in the style of the
/// classic sparse-GP demo: x sorted on [0, 6], smooth latent function, noise
/// sd 0.28. Generated from a fixed seed and flagged synthetic. `half` keeps
/// every second point (100 points).
Dataset demo_1d(bool half = false);

}  // namespace pacgp
