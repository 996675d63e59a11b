#include "pacgp/serialize.hpp"

#include <fstream>

#include "pacgp/errors.hpp"

namespace pacgp {

using nlohmann::json;

json to_json(const PenaltyTerms& p) {
  return {{"ln_theta_card", p.ln_theta_card},
          {"ln_conf", p.ln_conf},
          {"total_over_n", p.total_over_n}};
}

json to_json(const BoundReport& r) {
  const auto& m = r.metadata;
  json meta = {{"seed", m.seed},
               {"dataset", m.dataset},
               {"model", m.model},
               {"objective", m.objective},
               {"loss", m.loss},
               {"epsilon", m.epsilon},
               {"delta", m.delta},
               {"grid_half_width", m.grid_half_width},
               {"grid_digits", m.grid_digits},
               {"rounding", m.rounding},
               {"n_train", m.n_train},
               {"n_test", m.n_test},
               {"dim", m.dim},
               {"num_inducing", m.num_inducing},
               {"alpha", m.alpha},
               {"ard", m.ard},
               {"standardization", m.standardization},
               {"inducing_init", m.inducing_init},
               {"wall_time_seconds", m.wall_time_seconds},
               {"synthetic", m.synthetic}};
  return {{"schema_version", kSchemaVersion},
          {"B", r.B},
          {"B_pinsker", r.B_pinsker},
          {"gibbs_train", r.gibbs_train},
          {"gibbs_test", r.gibbs_test},
          {"mse_test", r.mse_test},
          {"kl_over_n", r.kl_over_n},
          {"sigma_n_sq", r.sigma_n_sq},
          {"bayes_bound", r.bayes_bound},
          {"kl", r.kl},
          {"gibbs_train_undiscretized", r.gibbs_train_undiscretized},
          {"penalty", to_json(r.penalty)},
          {"metadata", meta}};
}

namespace {

void check_version(const json& j) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw IoError("unsupported or missing schema_version");
  }
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed JSON document: ") + e.what());
  }
}

}  // namespace

BoundReport report_from_json(const json& j) {
  return guarded([&] {
    check_version(j);
    BoundReport r;
    r.B = j.at("B");
    r.B_pinsker = j.at("B_pinsker");
    r.gibbs_train = j.at("gibbs_train");
    r.gibbs_test = j.at("gibbs_test");
    r.mse_test = j.at("mse_test");
    r.kl_over_n = j.at("kl_over_n");
    r.sigma_n_sq = j.at("sigma_n_sq");
    r.bayes_bound = j.at("bayes_bound");
    r.kl = j.at("kl");
    r.gibbs_train_undiscretized = j.at("gibbs_train_undiscretized");
    const json& p = j.at("penalty");
    r.penalty.ln_theta_card = p.at("ln_theta_card");
    r.penalty.ln_conf = p.at("ln_conf");
    r.penalty.total_over_n = p.at("total_over_n");
    const json& m = j.at("metadata");
    auto& md = r.metadata;
    md.seed = m.at("seed");
    md.dataset = m.at("dataset");
    md.model = m.at("model");
    md.objective = m.at("objective");
    md.loss = m.at("loss");
    md.epsilon = m.at("epsilon");
    md.delta = m.at("delta");
    md.grid_half_width = m.at("grid_half_width");
    md.grid_digits = m.at("grid_digits");
    md.rounding = m.at("rounding");
    md.n_train = m.at("n_train");
    md.n_test = m.at("n_test");
    md.dim = m.at("dim");
    md.num_inducing = m.at("num_inducing");
    md.alpha = m.at("alpha");
    md.ard = m.at("ard");
    md.standardization = m.at("standardization");
    md.inducing_init = m.at("inducing_init");
    md.wall_time_seconds = m.at("wall_time_seconds");
    md.synthetic = m.at("synthetic");
    return r;
  });
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  return guarded([&] {
    const Eigen::Index rows = j.at("rows");
    const Eigen::Index cols = j.at("cols");
    const std::vector<double> data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw IoError("matrix payload does not match its shape");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<size_t>(i * cols + k)];
    }
    return m;
  });
}

json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
  return guarded([&] {
    const std::vector<double> data = j;
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(data.data(),
                                                             static_cast<Eigen::Index>(data.size())));
  });
}

namespace {

json hyper_to_json(const HyperParams& h) {
  return {{"log_lengthscales", vector_to_json(h.log_lengthscales)},
          {"log_signal_variance", h.log_signal_variance},
          {"ard", h.ard}};
}

HyperParams hyper_from_json(const json& j) {
  HyperParams h;
  h.log_lengthscales = vector_from_json(j.at("log_lengthscales"));
  h.log_signal_variance = j.at("log_signal_variance");
  h.ard = j.at("ard");
  if (h.log_lengthscales.size() < 1) throw IoError("hyperparameters need a lengthscale");
  return h;
}

json bound_to_json(const BoundConfig& c) {
  return {{"delta", c.delta},
          {"grid_half_width", c.grid_half_width},
          {"grid_digits", c.grid_digits},
          {"extra_log_card", c.extra_log_card},
          {"loss",
           {{"kind", to_string(c.loss.kind)},
            {"epsilon", c.loss.epsilon},
            {"relative", c.loss.relative}}}};
}

BoundConfig bound_from_json(const json& j) {
  BoundConfig c;
  c.delta = j.at("delta");
  c.grid_half_width = j.at("grid_half_width");
  c.grid_digits = j.at("grid_digits");
  c.extra_log_card = j.value("extra_log_card", 0.0);
  const json& l = j.at("loss");
  c.loss.kind = parse_loss_kind(l.at("kind"));
  c.loss.epsilon = l.at("epsilon");
  c.loss.relative = l.value("relative", true);
  c.validate();
  return c;
}

}  // namespace

json to_json(const StoredModel& m) {
  json j = {{"schema_version", kSchemaVersion},
            {"kind", m.kind},
            {"objective", m.objective},
            {"bound", bound_to_json(m.bound)},
            {"standardization",
             {{"feature_names", m.feature_names},
              {"feature_means", vector_to_json(m.feature_means)},
              {"feature_sds", vector_to_json(m.feature_sds)},
              {"target_mean", m.target_mean},
              {"target_sd", m.target_sd}}}};
  if (m.kind == "full") {
    const FullGPState& s = m.full;
    j["state"] = {{"hyper", hyper_to_json(s.hyper)},
                  {"mean_constant", s.mean.constant},
                  {"log_noise_variance", s.log_noise_variance},
                  {"train_inputs", matrix_to_json(s.train_inputs)},
                  {"train_targets", vector_to_json(s.train_targets)}};
  } else if (m.kind == "sparse") {
    const SparseGPState& s = m.sparse;
    json st = {{"hyper", hyper_to_json(s.hyper)},
               {"mean_constant", s.mean.constant},
               {"log_noise_variance", s.log_noise_variance},
               {"inducing_inputs", matrix_to_json(s.inducing_inputs)},
               {"mode", s.mode == SparseMode::kFreeForm ? "free-form" : "parametrized"},
               {"alpha", s.alpha}};
    if (s.mode == SparseMode::kFreeForm) {
      st["free_mean"] = vector_to_json(s.free_mean);
      st["free_chol"] = matrix_to_json(s.free_chol);
    }
    j["state"] = st;
    j["train_inputs"] = matrix_to_json(m.train_inputs);
    j["train_targets"] = vector_to_json(m.train_targets);
  } else {
    throw UsageError("model kind must be full or sparse");
  }
  return j;
}

StoredModel model_from_json(const json& j) {
  return guarded([&] {
    check_version(j);
    StoredModel m;
    m.kind = j.at("kind");
    m.objective = j.value("objective", "");
    m.bound = bound_from_json(j.at("bound"));
    const json& sd = j.at("standardization");
    m.feature_names = sd.value("feature_names", std::vector<std::string>{});
    m.feature_means = vector_from_json(sd.at("feature_means"));
    m.feature_sds = vector_from_json(sd.at("feature_sds"));
    m.target_mean = sd.at("target_mean");
    m.target_sd = sd.at("target_sd");
    const json& st = j.at("state");
    if (m.kind == "full") {
      FullGPState& s = m.full;
      s.hyper = hyper_from_json(st.at("hyper"));
      s.mean.constant = st.value("mean_constant", 0.0);
      s.log_noise_variance = st.at("log_noise_variance");
      s.train_inputs = matrix_from_json(st.at("train_inputs"));
      s.train_targets = vector_from_json(st.at("train_targets"));
      if (s.train_inputs.rows() != s.train_targets.size()) throw IoError("training data shape mismatch");
      s.hyper.check_dimension(s.train_inputs.cols());
    } else if (m.kind == "sparse") {
      SparseGPState& s = m.sparse;
      s.hyper = hyper_from_json(st.at("hyper"));
      s.mean.constant = st.value("mean_constant", 0.0);
      s.log_noise_variance = st.at("log_noise_variance");
      s.inducing_inputs = matrix_from_json(st.at("inducing_inputs"));
      s.mode = st.at("mode") == "free-form" ? SparseMode::kFreeForm : SparseMode::kParametrized;
      s.alpha = st.at("alpha");
      if (s.mode == SparseMode::kFreeForm) {
        s.free_mean = vector_from_json(st.at("free_mean"));
        s.free_chol = matrix_from_json(st.at("free_chol"));
      }
      m.train_inputs = matrix_from_json(j.at("train_inputs"));
      m.train_targets = vector_from_json(j.at("train_targets"));
      if (m.train_inputs.rows() != m.train_targets.size()) throw IoError("training data shape mismatch");
      s.hyper.check_dimension(m.train_inputs.cols());
    } else {
      throw IoError("unknown model kind '" + m.kind + "'");
    }
    return m;
  });
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace pacgp
