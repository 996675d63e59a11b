#pragma once

#include "pacgp/bound.hpp"
#include "pacgp/data.hpp"
#include "pacgp/full_gp.hpp"
#include "pacgp/sparse_gp.hpp"

namespace pacgp {

/// True when every log-hyperparameter lies on the grid of `cfg`.
bool on_grid(const HyperParams& hyper, const BoundConfig& cfg);

/// Copies of the state with only the prior hyperparameters rounded.
FullGPState discretized(const FullGPState& state, const BoundConfig& cfg);
SparseGPState discretized(const SparseGPState& state, const BoundConfig& cfg);

/// Certificate and metrics of a trained model. The hyperparameters must
/// already be on the grid (DomainError otherwise): the bound holds only for
/// members of the finite hyperparameter set. Risks and MSE are computed on the
/// (standardized) scale the model was trained on. Metadata fields describing
/// the model and configuration are filled; run-level fields (seed, objective,
/// wall time, gibbs_train_undiscretized) are left to the caller.
BoundReport build_report(const FullGPState& state, const Dataset& test, const BoundConfig& cfg);
BoundReport build_report(const SparseGPState& state, const Dataset& train, const Dataset& test,
                         const BoundConfig& cfg);

/// Gibbs training risk of a (possibly undiscretized) model.
double train_gibbs_risk(const FullGPState& state, const LossSpec& loss);
double train_gibbs_risk(const SparseGPState& state, const Dataset& train, const LossSpec& loss);

}  // namespace pacgp
