#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pacgp/binary_kl.hpp"
#include "pacgp/bound.hpp"
#include "pacgp/errors.hpp"
#include "pacgp/experiment.hpp"
#include "pacgp/losses.hpp"
#include "pacgp/report.hpp"
#include "pacgp/selfcheck.hpp"
#include "pacgp/serialize.hpp"
#include "pacgp/training.hpp"

namespace py = pybind11;
using namespace pacgp;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string run_json(const std::string& config, int workers) {
  const RunSpec spec = run_spec_from_json(nlohmann::json::parse(config));
  RunOutcome run;
  {
    py::gil_scoped_release release;
    run = run_experiment(spec, workers);
  }
  return to_json(run).dump();
}

LossSpec make_loss(const std::string& loss, double epsilon, bool relative) {
  LossSpec s;
  s.kind = parse_loss_kind(loss);
  s.epsilon = epsilon;
  s.relative = relative;
  s.validate();
  return s;
}

py::dict fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_test,
             const Eigen::VectorXd& y_test, const std::string& model, const std::string& objective,
             const std::string& loss, double epsilon, bool ard, Eigen::Index num_inducing,
             double delta, double grid_L, int grid_digits, unsigned long long seed, int max_iters) {
  if (X.rows() != y.size() || X_test.rows() != y_test.size() || X.cols() != X_test.cols()) {
    throw DimensionError("fit: X, y, X_test, y_test have inconsistent shapes");
  }
  BoundConfig cfg;
  cfg.delta = delta;
  cfg.grid_half_width = grid_L;
  cfg.grid_digits = grid_digits;
  cfg.loss = make_loss(loss, epsilon, true);
  cfg.validate();
  TrainConfig tc;
  tc.objective = parse_objective(objective);
  tc.max_iters = max_iters;
  tc.init_seed = seed;
  const HyperParams h0 = ard ? HyperParams::with_ard(X.cols(), 0.0, 0.0) : HyperParams::isotropic(0.0, 0.0);

  Dataset train, test;
  train.X = X;
  train.y = y;
  test.X = X_test;
  test.y = y_test;

  py::gil_scoped_release release;
  BoundReport rep;
  PredictiveMoments pred;
  double log_noise = 0.0;
  if (model == "full") {
    FullGPState init;
    init.hyper = h0;
    init.train_inputs = X;
    init.train_targets = y;
    const FullGPState trained = train_full(init, tc, cfg);
    const FullGPState d = discretized(trained, cfg);
    rep = build_report(d, test, cfg);
    rep.gibbs_train_undiscretized = train_gibbs_risk(trained, cfg.loss);
    pred = full_predict(d, X_test);
    log_noise = d.log_noise_variance;
  } else if (model == "sparse") {
    if (num_inducing < 1 || num_inducing > X.rows()) {
      throw UsageError("fit: num_inducing must lie in [1, len(X)]");
    }
    SparseGPState init;
    init.hyper = h0;
    const std::vector<Eigen::Index> perm = seeded_permutation(X.rows(), seed);
    init.inducing_inputs.resize(num_inducing, X.cols());
    for (Eigen::Index i = 0; i < num_inducing; ++i) {
      init.inducing_inputs.row(i) = X.row(perm[static_cast<size_t>(i)]);
    }
    const SparseGPState trained = train_sparse(init, X, y, tc, cfg);
    const SparseGPState d = discretized(trained, cfg);
    rep = build_report(d, train, test, cfg);
    rep.gibbs_train_undiscretized = train_gibbs_risk(trained, train, cfg.loss);
    pred = sparse_predict(d, X, y, X_test);
    log_noise = d.log_noise_variance;
  } else {
    throw UsageError("fit: model must be 'full' or 'sparse'");
  }
  rep.metadata.objective = to_string(tc.objective);
  rep.metadata.seed = seed;
  rep.metadata.dataset = "arrays";

  py::gil_scoped_acquire acquire;
  py::dict out;
  out["report"] = to_json(rep).dump();
  out["mean"] = pred.mean;
  out["var"] = pred.var;
  out["log_noise_variance"] = log_noise;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of pacgp";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  m.def("binary_kl", &binary_kl, py::arg("q"), py::arg("p"), "kl(q||p) between Bernoulli laws");
  m.def("klinv", py::overload_cast<double, double>(&klinv), py::arg("q"), py::arg("eps"),
        "largest p with kl(q||p) <= eps");
  m.def("klinv_complement", &klinv_complement, py::arg("q"), py::arg("eps"));
  m.def(
      "klinv_partials",
      [](double q, double eps) {
        const KlInvPartials p = klinv_partials(q, eps);
        return py::make_tuple(p.d_dq, p.d_deps);
      },
      py::arg("q"), py::arg("eps"), "(d/dq, d/deps) of klinv");

  m.def(
      "gibbs_risk",
      [](const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
         const std::string& loss, double epsilon, bool relative) {
        if (y.size() != mean.size() || y.size() != var.size()) {
          throw DimensionError("gibbs_risk: y, mean, var must have equal length");
        }
        return gibbs_risk(make_loss(loss, epsilon, relative), y, PredictiveMoments{mean, var});
      },
      py::arg("y"), py::arg("mean"), py::arg("var"), py::arg("loss") = "zero-one",
      py::arg("epsilon") = 0.6, py::arg("relative") = true,
      "mean expected loss under independent Gaussian predictions");

  m.def(
      "log_theta_cardinality",
      [](Eigen::Index components, double grid_L, int grid_digits) {
        BoundConfig c;
        c.grid_half_width = grid_L;
        c.grid_digits = grid_digits;
        c.validate();
        return log_theta_cardinality(components, c);
      },
      py::arg("components"), py::arg("grid_L") = 6.0, py::arg("grid_digits") = 2);

  m.def(
      "pac_bound",
      [](double gibbs_train, double kl, Eigen::Index n, Eigen::Index components, double delta,
         double grid_L, int grid_digits) {
        BoundConfig c;
        c.delta = delta;
        c.grid_half_width = grid_L;
        c.grid_digits = grid_digits;
        c.validate();
        const PenaltyTerms pen = penalty(n, components, kl, c);
        return py::make_tuple(pac_bound(gibbs_train, kl, pen, n),
                              pinsker_bound(gibbs_train, kl, pen, n));
      },
      py::arg("gibbs_train"), py::arg("kl"), py::arg("n"), py::arg("components"),
      py::arg("delta") = 0.01, py::arg("grid_L") = 6.0, py::arg("grid_digits") = 2,
      "(B, B_pinsker) for the given empirical risk and KL");

  m.def("run_json", &run_json, py::arg("config"), py::arg("workers") = 0,
        "train and certify from a JSON run configuration; returns the run as JSON text");

  m.def("fit", &fit, py::arg("X"), py::arg("y"), py::arg("X_test"), py::arg("y_test"),
        py::arg("model") = "full", py::arg("objective") = "pac-kl", py::arg("loss") = "zero-one",
        py::arg("epsilon") = 0.6, py::arg("ard") = false, py::arg("num_inducing") = 0,
        py::arg("delta") = 0.01, py::arg("grid_L") = 6.0, py::arg("grid_digits") = 2,
        py::arg("seed") = 0, py::arg("max_iters") = 2000);

  m.def(
      "load_dataset",
      [](const std::string& name, const std::string& target, unsigned long long seed) {
        const Dataset ds = load_dataset(name, target, seed);
        return py::make_tuple(ds.X, ds.y);
      },
      py::arg("name"), py::arg("target") = "", py::arg("seed") = 0, "(X, y) on the original scale");

  m.def("selfcheck", [] {
    std::vector<CheckResult> results;
    {
      py::gil_scoped_release release;
      results = run_selfcheck();
    }
    py::list out;
    for (const CheckResult& r : results) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed;
      d["measured"] = r.measured;
      d["threshold"] = r.threshold;
      d["detail"] = r.detail;
      d["seconds"] = r.seconds;
      out.append(d);
    }
    return out;
  });
}
