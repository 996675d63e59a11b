#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacgp/bound.hpp"
#include "pacgp/data.hpp"
#include "pacgp/serialize.hpp"
#include "pacgp/training.hpp"

namespace pacgp {

/// One experimental configuration, repeated over seeds seed, seed+1, ...
struct RunSpec {
  /// CSV path or builtin: boston, demo-1d, demo-1d-half, synthetic-gp,
  /// pol-surrogate, pol (reads $PACGP_POL_CSV).
  std::string dataset = "boston";
  std::string target_column;
  std::string model = "full";  // full | sparse
  ObjectiveKind objective = ObjectiveKind::kPacKl;
  BoundConfig bound;
  bool ard = false;
  Eigen::Index num_inducing = 0;
  /// Parametrization of PAC-SGP posteriors (likelihood variants fix their own).
  double alpha = 1.0;
  /// Sparse PAC posteriors with free a_M and B_MM instead of alpha.
  bool free_form = false;
  /// Initial ln(l^2) of every lengthscale; 0 is a unit lengthscale on
  /// standardized inputs. In many dimensions ln(d) keeps initial kernel
  /// values away from zero.
  double init_log_lengthscale = 0.0;
  unsigned long long seed = 0;
  int repeats = 1;
  /// Caps the number of rows used (0 = all). For synthetic builtins this is
  /// the number of training points.
  Eigen::Index subsample = 0;
  /// 1.0 trains on everything and reports the training set as test set.
  double train_fraction = 0.8;
  Standardization standardization = Standardization::kTrainOnly;
  TrainConfig train;

  std::string label() const;
  void validate() const;
};

/// RunSpec from a flat object whose keys are the command-line flag names with
/// underscores (dataset, model, objective, loss, epsilon, ard, num_inducing,
/// grid_L, ...). Unknown keys are a UsageError.
RunSpec run_spec_from_json(const nlohmann::json& j);

struct RepeatOutcome {
  int repeat = 0;
  bool failed = false;
  std::string error;
  int exit_code = 0;
  BoundReport report;
  StoredModel model;
  TrainResult training;
};

struct FieldStat {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample sd / sqrt(n)
  int n = 0;
};

struct RunOutcome {
  RunSpec spec;
  std::vector<RepeatOutcome> repeats;
  std::map<std::string, FieldStat> aggregate;
  int failures = 0;
};

/// Worker count: $PACGP_THREADS if set, else the hardware concurrency.
int default_workers();

struct Split {
  Dataset train;
  Dataset test;
};

/// Loads a dataset by builtin name or path.
Dataset load_dataset(const std::string& name, const std::string& target_column = "",
                     unsigned long long seed = 0, Eigen::Index n_train = 0);

/// Data for repeat `i`: fresh split and standardization with seed + i.
Split prepare_split(const RunSpec& spec, int repeat);

/// Trains and certifies one repeat. Errors are captured in the outcome.
RepeatOutcome run_repeat(const RunSpec& spec, int repeat);

/// All repeats (in parallel up to `workers`), then the aggregate over the
/// successful ones. Results are ordered by repeat regardless of scheduling.
RunOutcome run_experiment(const RunSpec& spec, int workers = 0);

std::map<std::string, FieldStat> aggregate_reports(const std::vector<BoundReport>& reports);

nlohmann::json to_json(const RunOutcome& run);
/// Aligned "mean +/- stderr" table of the aggregate fields.
std::string format_aggregate(const RunOutcome& run);

/// Fields of BoundReport that are aggregated, in table order.
const std::vector<std::string>& report_fields();
double report_field(const BoundReport& r, const std::string& field);

/// Comparison table: one row per run (CSV with mean and stderr columns).
std::string comparison_csv(const std::vector<RunOutcome>& runs);

/// Multi-restart study on the training split of repeat 0: `restarts`
/// trainings from log-uniform sigma_n^2 initializations (fresh inducing
/// subsets for sparse models), each outcome reported.
TrainResult restart_study(const RunSpec& spec, int restarts);
/// restart,init_noise_variance,noise_variance,objective,kl_over_n,risk,failed,best
std::string restarts_csv(const TrainResult& result);

/// Re-certifies a stored model. `raw_test` is on the original scale and is
/// standardized with the stored statistics (columns matched by name when
/// both sides have names); without it the training data doubles as test set.
BoundReport evaluate_model(const StoredModel& model, const Dataset* raw_test = nullptr);

/// Discretization study on synthetic SE-ARD data.
struct SweepSpec {
  std::vector<double> half_widths{6.0};
  std::vector<int> digits{0, 1, 2, 4};
  Eigen::Index n_train = 2000;
  Eigen::Index n_test = 10000;
  Eigen::Index dim = 3;
  double noise_variance = 0.01;
  double epsilon = 0.6;
  double delta = 0.01;
  unsigned long long seed = 0;
  int repeats = 1;
  TrainConfig train;
};

struct SweepRow {
  double half_width = 0.0;
  int digits = 0;
  int repeat = 0;
  double ln_theta_card = 0.0;
  double B = 0.0;
  double B_pinsker = 0.0;
  /// Bound from the undiscretized R_S and KL with this setting's ln|Theta|.
  double B_pre = 0.0;
  double gibbs_train_pre = 0.0;
  double gibbs_train_post = 0.0;
  double gibbs_test_pre = 0.0;
  double gibbs_test_post = 0.0;
  double kl_over_n_pre = 0.0;
  double kl_over_n_post = 0.0;
};

/// For every repeat: one kl-PAC full-GP fit at the reference setting
/// (L=6, r=2), then for each (L, r) a warm-started refit with that penalty,
/// discretization, and evaluation before and after rounding.
std::vector<SweepRow> discretization_sweep(const SweepSpec& spec, int workers = 0);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace pacgp
