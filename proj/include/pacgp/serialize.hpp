#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pacgp/bound.hpp"
#include "pacgp/data.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/sparse_gp.hpp"

namespace pacgp {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const PenaltyTerms& p);
nlohmann::json to_json(const BoundReport& r);
BoundReport report_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// A trained model together with everything needed to predict and to
/// re-certify it: the state, the training data for the sparse case (the
/// full state carries its own), the bound configuration, and the
/// standardization that maps raw inputs to the model's scale.
struct StoredModel {
  std::string kind = "full";  // "full" or "sparse"
  std::string objective;
  FullGPState full;
  SparseGPState sparse;
  Eigen::MatrixXd train_inputs;
  Eigen::VectorXd train_targets;
  BoundConfig bound;
  /// Names of the input columns the model was trained on (may be empty).
  std::vector<std::string> feature_names;
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_sds;
  double target_mean = 0.0;
  double target_sd = 1.0;
};

nlohmann::json to_json(const StoredModel& m);
StoredModel model_from_json(const nlohmann::json& j);

/// File helpers; IoError on failure.
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace pacgp
