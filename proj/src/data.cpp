#include "pacgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pacgp/errors.hpp"
#include "pacgp/kernels.hpp"
#include "pacgp/linalg.hpp"
#include "pacgp/log.hpp"

namespace pacgp {

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out = *this;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index i = rows[k];
    if (i < 0 || i >= size()) throw DimensionError("row index out of range");
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(i);
    out.y(static_cast<Eigen::Index>(k)) = y(i);
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.push_back(split_row(line));
  }
  if (rows.empty()) throw IoError(path + ": empty file");

  bool header = false;
  for (const std::string& cell : rows.front()) {
    double v;
    if (!parse_double(cell, v)) header = true;
  }
  const size_t ncol = rows.front().size();
  if (ncol < 2) throw IoError(path + ": need at least one feature and one target column");
  std::vector<std::string> names(ncol);
  for (size_t j = 0; j < ncol; ++j) {
    names[j] = header ? rows.front()[j] : "x" + std::to_string(j);
  }
  const size_t first = header ? 1 : 0;
  const size_t nrow = rows.size() - first;
  if (nrow == 0) throw IoError(path + ": no data rows");

  size_t target = ncol - 1;
  if (!target_column.empty()) {
    const auto it = std::find(names.begin(), names.end(), target_column);
    if (it != names.end()) {
      target = static_cast<size_t>(it - names.begin());
    } else {
      size_t idx = 0;
      const auto res = std::from_chars(target_column.data(),
                                       target_column.data() + target_column.size(), idx);
      if (res.ec != std::errc() || res.ptr != target_column.data() + target_column.size() ||
          idx >= ncol) {
        throw IoError(path + ": no target column '" + target_column + "'");
      }
      target = idx;
    }
  }

  Dataset ds;
  ds.name = path;
  ds.X.resize(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol - 1));
  ds.y.resize(static_cast<Eigen::Index>(nrow));
  for (size_t j = 0; j < ncol; ++j) {
    if (j == target) {
      ds.target_name = names[j];
    } else {
      ds.feature_names.push_back(names[j]);
    }
  }
  for (size_t r = 0; r < nrow; ++r) {
    const std::vector<std::string>& row = rows[first + r];
    const size_t file_row = first + r + 1;
    if (row.size() != ncol) {
      throw IoError(path + ": row " + std::to_string(file_row) + " has " +
                    std::to_string(row.size()) + " cells, expected " + std::to_string(ncol));
    }
    Eigen::Index k = 0;
    for (size_t j = 0; j < ncol; ++j) {
      double v = 0.0;
      if (!parse_double(row[j], v)) {
        throw IoError(path + ": bad or missing value '" + row[j] + "' at (row " +
                      std::to_string(file_row) + ", col " + std::to_string(j + 1) + ")");
      }
      if (j == target) {
        ds.y(static_cast<Eigen::Index>(r)) = v;
      } else {
        ds.X(static_cast<Eigen::Index>(r), k++) = v;
      }
    }
  }
  ds.feature_means = Eigen::VectorXd::Zero(ds.dim());
  ds.feature_sds = Eigen::VectorXd::Ones(ds.dim());
  return ds;
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (Eigen::Index j = 0; j < ds.dim(); ++j) {
    const bool named = static_cast<size_t>(j) < ds.feature_names.size();
    out << (named ? ds.feature_names[static_cast<size_t>(j)] : "x" + std::to_string(j)) << ',';
  }
  out << (ds.target_name.empty() ? "y" : ds.target_name) << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ds.X(i, j) << ',';
    out << ds.y(i) << '\n';
  }
  if (!out) throw IoError("error writing " + path);
}

std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, unsigned long long seed) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle.
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

namespace {

struct Stats {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

Stats compute_stats(const Dataset& ds) {
  Stats s;
  const double n = static_cast<double>(ds.size());
  s.mean = ds.X.colwise().mean().transpose();
  s.sd = ((ds.X.rowwise() - s.mean.transpose()).colwise().squaredNorm().transpose() / n)
             .cwiseSqrt();
  s.y_mean = ds.y.mean();
  s.y_sd = std::sqrt((ds.y.array() - s.y_mean).square().sum() / n);
  return s;
}

Dataset apply_stats(const Dataset& ds, const Stats& s, const std::vector<Eigen::Index>& keep) {
  Dataset out;
  out.name = ds.name;
  out.target_name = ds.target_name;
  out.synthetic = ds.synthetic;
  out.standardized = true;
  out.X.resize(ds.size(), static_cast<Eigen::Index>(keep.size()));
  out.feature_means.resize(static_cast<Eigen::Index>(keep.size()));
  out.feature_sds.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    const Eigen::Index j = keep[k];
    const auto kk = static_cast<Eigen::Index>(k);
    out.X.col(kk) = (ds.X.col(j).array() - s.mean(j)) / s.sd(j);
    out.feature_means(kk) = s.mean(j);
    out.feature_sds(kk) = s.sd(j);
    if (static_cast<size_t>(j) < ds.feature_names.size()) {
      out.feature_names.push_back(ds.feature_names[static_cast<size_t>(j)]);
    }
  }
  out.y = (ds.y.array() - s.y_mean) / s.y_sd;
  out.target_mean = s.y_mean;
  out.target_sd = s.y_sd;
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> standardize_with_train(const Dataset& train, const Dataset& test) {
  if (train.dim() != test.dim()) throw DimensionError("train and test dimensions differ");
  const Stats s = compute_stats(train);
  if (!(s.y_sd > 0.0)) throw DomainError("targets are constant; cannot standardize");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < train.dim(); ++j) {
    if (s.sd(j) > 0.0) {
      keep.push_back(j);
    } else {
      log_warning("dropping constant feature column " + std::to_string(j));
    }
  }
  return {apply_stats(train, s, keep), apply_stats(test, s, keep)};
}

std::pair<Dataset, Dataset> split_and_standardize(const Dataset& ds, double train_fraction,
                                                  unsigned long long seed, Standardization mode) {
  const Eigen::Index n = ds.size();
  if (n < 2) throw DimensionError("need at least two rows to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0,1)");
  }
  const auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw DimensionError("degenerate train/test split sizes");
  const std::vector<Eigen::Index> perm = seeded_permutation(n, seed);
  const std::vector<Eigen::Index> train_rows(perm.begin(), perm.begin() + n_train);
  const std::vector<Eigen::Index> test_rows(perm.begin() + n_train, perm.end());
  Dataset train = ds.subset(train_rows);
  Dataset test = ds.subset(test_rows);
  if (mode == Standardization::kNone) return {train, test};

  const Stats s = compute_stats(mode == Standardization::kTrainOnly ? train : ds);
  if (!(s.y_sd > 0.0)) throw DomainError("targets are constant; cannot standardize");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < ds.dim(); ++j) {
    if (s.sd(j) > 0.0) {
      keep.push_back(j);
    } else {
      log_warning("dropping constant feature column " + std::to_string(j));
    }
  }
  return {apply_stats(train, s, keep), apply_stats(test, s, keep)};
}

Eigen::VectorXd destandardize_targets(const Dataset& ds, const Eigen::VectorXd& y) {
  return (y.array() * ds.target_sd + ds.target_mean).matrix();
}

Dataset subsample(const Dataset& ds, Eigen::Index n, unsigned long long seed) {
  if (n <= 0 || n >= ds.size()) return ds;
  const std::vector<Eigen::Index> perm = seeded_permutation(ds.size(), seed);
  std::vector<Eigen::Index> rows(perm.begin(), perm.begin() + n);
  std::sort(rows.begin(), rows.end());
  return ds.subset(rows);
}

namespace {

Eigen::VectorXd standard_normals(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
  return z;
}

Dataset make_set(const std::string& name, Eigen::MatrixXd X, Eigen::VectorXd y) {
  Dataset ds;
  ds.name = name;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.synthetic = true;
  ds.target_name = "y";
  for (Eigen::Index j = 0; j < ds.dim(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.feature_means = Eigen::VectorXd::Zero(ds.dim());
  ds.feature_sds = Eigen::VectorXd::Ones(ds.dim());
  return ds;
}

}  // namespace

SyntheticGP sample_gp(Eigen::Index n_train, Eigen::Index n_test, const HyperParams& hp,
                      unsigned long long seed, double noise_variance, Eigen::Index block) {
  const Eigen::Index d = hp.ard ? hp.log_lengthscales.size() : 1;
  if (n_train < 1 || n_test < 1) throw DimensionError("synthetic sizes must be >= 1");
  if (block < 1) throw DimensionError("block size must be >= 1");
  if (!(noise_variance >= 0.0)) throw DomainError("noise variance must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);

  SyntheticGP out;
  out.noise_variance = noise_variance;
  out.signal_variance = hp.signal_variance();
  out.true_log_lengthscales = hp.log_lengthscales;

  auto draw_inputs = [&](Eigen::Index n) {
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) X(i, k) = unif(rng);
    }
    return X;
  };
  const Eigen::MatrixXd Xtr = draw_inputs(n_train);
  const Eigen::MatrixXd Xte = draw_inputs(n_test);

  const double scale = hp.signal_variance();
  const JitteredCholesky chol = kernel_cholesky(gram(hp, Xtr, Xtr), scale);
  const Eigen::VectorXd f_train = chol.llt.matrixL() * standard_normals(n_train, rng);
  const Eigen::VectorXd weights = chol.llt.solve(f_train);

  Eigen::VectorXd f_test(n_test);
  for (Eigen::Index start = 0; start < n_test; start += block) {
    const Eigen::Index b = std::min(block, n_test - start);
    const Eigen::MatrixXd Xb = Xte.middleRows(start, b);
    const Eigen::MatrixXd Ktb = gram(hp, Xtr, Xb);
    const Eigen::MatrixXd V = chol.llt.matrixL().solve(Ktb);
    Eigen::MatrixXd cov = gram(hp, Xb, Xb) - V.transpose() * V;
    cov = 0.5 * (cov + cov.transpose());
    const JitteredCholesky cb = kernel_cholesky(cov, scale);
    f_test.segment(start, b) = Ktb.transpose() * weights + cb.llt.matrixL() * standard_normals(b, rng);
  }
  const double sd = std::sqrt(noise_variance);
  const Eigen::VectorXd y_train = f_train + sd * standard_normals(n_train, rng);
  const Eigen::VectorXd y_test = f_test + sd * standard_normals(n_test, rng);
  out.train = make_set("synthetic-gp", Xtr, y_train);
  out.test = make_set("synthetic-gp", Xte, y_test);
  return out;
}

SyntheticGP sample_synthetic_gp(Eigen::Index n_train, Eigen::Index n_test, Eigen::Index d,
                                unsigned long long seed, double noise_variance,
                                Eigen::Index block) {
  if (d < 1) throw DimensionError("synthetic dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> loglen(-1.0, 1.0);
  HyperParams hp = HyperParams::with_ard(d, 0.0, 0.0);
  for (Eigen::Index k = 0; k < d; ++k) hp.log_lengthscales(k) = 2.0 * loglen(rng);
  // decorrelate the data stream from the lengthscale draws
  return sample_gp(n_train, n_test, hp, seed ^ 0x9e3779b97f4a7c15ULL, noise_variance, block);
}

SyntheticGP pol_surrogate(Eigen::Index n_train, Eigen::Index n_test, unsigned long long seed) {
  constexpr Eigen::Index d = 26;
  HyperParams hp = HyperParams::with_ard(d, 2.0 * std::log(40.0), 0.0);
  const double relevant[] = {2.0, 2.5, 3.0, 4.0, 6.0, 8.0};
  for (Eigen::Index k = 0; k < 6; ++k) hp.log_lengthscales(k) = 2.0 * std::log(relevant[k]);
  SyntheticGP g = sample_gp(n_train, n_test, hp, seed, 0.02);
  auto [train, test] = standardize_with_train(g.train, g.test);
  g.train = train;
  g.test = test;
  g.train.name = g.test.name = "pol-surrogate";
  return g;
}

Dataset demo_1d(bool half) {
  constexpr Eigen::Index n = 200;
  std::mt19937_64 rng(20051205ULL);
  std::uniform_real_distribution<double> unif(0.0, 6.0);
  std::vector<double> xs(static_cast<size_t>(n));
  for (double& x : xs) x = unif(rng);
  std::sort(xs.begin(), xs.end());
  Eigen::MatrixXd X(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = xs[static_cast<size_t>(i)];
  // latent draw from an SE GP with lengthscale 0.6 and unit signal variance
  const HyperParams hp = HyperParams::isotropic(2.0 * std::log(0.6), 0.0);
  const JitteredCholesky chol = kernel_cholesky(gram(hp, X, X), 1.0);
  const Eigen::VectorXd f = chol.llt.matrixL() * standard_normals(n, rng);
  const Eigen::VectorXd y = f + 0.28 * standard_normals(n, rng);
  Dataset ds = make_set(half ? "demo-1d-half" : "demo-1d", X, y);
  if (!half) return ds;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; i += 2) rows.push_back(i);
  Dataset h = ds.subset(rows);
  h.name = "demo-1d-half";
  return h;
}

}  // namespace pacgp
