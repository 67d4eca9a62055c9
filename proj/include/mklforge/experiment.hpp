#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mklforge/config.hpp"
#include "mklforge/dataset.hpp"
#include "mklforge/kernels.hpp"
#include "mklforge/krr.hpp"
#include "mklforge/manifold.hpp"
#include "mklforge/metrics.hpp"
#include "mklforge/mkl.hpp"
#include "mklforge/parallel.hpp"
#include "mklforge/rng.hpp"
#include "mklforge/svm.hpp"

namespace mklforge {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

inline SplitIndices make_split(int m, double fraction, Rng& rng) {
  if (m < 2) throw InvalidArgument("make_split: need at least 2 rows");
  const auto perm = rng.permutation(m);
  int n_train = static_cast<int>(std::lround(fraction * m));
  n_train = std::max(1, std::min(m - 1, n_train));
  SplitIndices split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.test.assign(perm.begin() + n_train, perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// Balanced fold ids: a permutation dealt round-robin into k folds.
inline std::vector<int> make_fold_assignment(int m, int k, Rng& rng) {
  if (k < 2) throw InvalidArgument("make_fold_assignment: need at least 2 folds");
  if (k > m) throw InvalidArgument("make_fold_assignment: more folds than rows");
  const auto perm = rng.permutation(m);
  std::vector<int> fold(m);
  for (int i = 0; i < m; ++i) fold[perm[i]] = i % k;
  return fold;
}

// One hyperparameter assignment; optional fields are set only where the
// algorithm consumes them.
struct CellParams {
  double lambda = 0.1;
  std::optional<double> Lambda;
  std::optional<double> beta;
  std::optional<int> kernel_index;  // single-kernel benchmark
};

struct FittedModel {
  Vector mu;
  int degree = 1;
  bool svm = false;
  Vector alpha;  // ridge dual or SVM dual coefficients
  double bias = 0.0;
  Vector y_train;
  std::vector<IterationRecord> trace;
  SolveStatus status = SolveStatus::Converged;
};

namespace detail {

inline SolverConfig build_solver_config(const ExperimentConfig& cfg, double default_eta) {
  SolverConfig sc;
  sc.eta = cfg.solver.eta.value_or(default_eta);
  if (cfg.solver.eps) sc.eps = *cfg.solver.eps;
  if (cfg.solver.max_iter) sc.max_iter = *cfg.solver.max_iter;
  if (cfg.solver.backoff) sc.backoff = *cfg.solver.backoff;
  return sc;
}

inline SvmConfig build_svm_config(const ExperimentConfig& cfg) {
  SvmConfig sc;
  if (cfg.solver.kkt_tol) sc.kkt_tol = *cfg.solver.kkt_tol;
  if (cfg.solver.max_pair_updates) sc.max_pair_updates = *cfg.solver.max_pair_updates;
  return sc;
}

inline bool uses_region(Algorithm a) {
  return a == Algorithm::Pgd || a == Algorithm::Iia || a == Algorithm::Pgd2 ||
         a == Algorithm::SvmGmkl || a == Algorithm::Tr;
}

inline bool uses_beta(Algorithm a) { return a == Algorithm::Riia || a == Algorithm::Rpgd2; }

}  // namespace detail

// Learns the combination weights on the bank's training block and fits the
// final predictor. All solver failures propagate as exceptions; a divergence
// report is converted to ConvergenceFailure.
inline FittedModel fit_model(const BaseKernelBank& bank, const Vector& y,
                             const ExperimentConfig& cfg, const CellParams& params) {
  const int p = bank.p();
  FittedModel model;
  model.degree = algorithm_degree(cfg.algorithm, cfg.degree);

  const auto region = [&]() {
    if (!params.Lambda) throw InvalidArgument("fit_model: algorithm requires a Lambda value");
    return FeasibleRegion{Vector::Ones(p), *params.Lambda, cfg.q};
  };
  const auto beta = [&]() {
    if (!params.beta) throw InvalidArgument("fit_model: algorithm requires a beta value");
    return *params.beta;
  };

  SolveResult learned;
  bool have_solver_result = true;
  switch (cfg.algorithm) {
    case Algorithm::Pgd:
      learned = pgd_linear(bank, y, params.lambda, region(), detail::build_solver_config(cfg, 1.0));
      break;
    case Algorithm::Iia:
      learned = iia(bank, y, params.lambda, region(), detail::build_solver_config(cfg, 0.5));
      break;
    case Algorithm::Riia:
      learned = riia(bank, y, params.lambda, beta(), detail::build_solver_config(cfg, 0.5));
      break;
    case Algorithm::Pgd2:
      learned =
          pgd_quadratic(bank, y, params.lambda, region(), detail::build_solver_config(cfg, 1.0));
      break;
    case Algorithm::Rpgd2:
      learned =
          rpgd_quadratic(bank, y, params.lambda, beta(), detail::build_solver_config(cfg, 1.0));
      break;
    case Algorithm::SvmGmkl:
      learned = svm_gmkl(bank, y, params.lambda, region(), detail::build_solver_config(cfg, 1.0),
                         model.degree, detail::build_svm_config(cfg));
      break;
    case Algorithm::Tr: {
      TrustRegionConfig tc;
      if (cfg.solver.grad_tol) tc.grad_tol = *cfg.solver.grad_tol;
      if (cfg.solver.max_iter) tc.max_iter = *cfg.solver.max_iter;
      if (cfg.solver.delta0) tc.delta0 = *cfg.solver.delta0;
      if (cfg.solver.delta_hat) tc.delta_hat = *cfg.solver.delta_hat;
      if (cfg.solver.acceptance) tc.acceptance = *cfg.solver.acceptance;
      learned = trust_region(bank, y, params.lambda, region(), tc, 2);
      break;
    }
    case Algorithm::Unif:
      model.mu = Vector::Constant(p, 1.0 / p);
      have_solver_result = false;
      break;
    case Algorithm::Bm: {
      if (!params.kernel_index || *params.kernel_index < 0 || *params.kernel_index >= p)
        throw InvalidArgument("fit_model: benchmark needs a kernel index inside the bank");
      model.mu = Vector::Zero(p);
      model.mu(*params.kernel_index) = 1.0;
      have_solver_result = false;
      break;
    }
  }
  if (have_solver_result) {
    if (learned.status == SolveStatus::Diverged)
      throw ConvergenceFailure("fit_model: kernel learning diverged");
    model.mu = learned.mu_star;
    model.trace = std::move(learned.trace);
    model.status = learned.status;
  }

  const double fit_lambda = cfg.fit_lambda.value_or(params.lambda);
  const SymMatrix k_train = combined_gram(bank, {model.mu, model.degree});
  if (cfg.task == Task::SvmClassification) {
    const SvmDualSolution sol = svm_dual_solve(k_train, y, fit_lambda, detail::build_svm_config(cfg));
    model.svm = true;
    model.alpha = sol.alpha;
    model.bias = sol.bias;
    model.y_train = y;
  } else {
    model.alpha = spd_solve(k_train, fit_lambda, y);
  }
  return model;
}

inline Vector predict(const FittedModel& model, const BaseKernelBank& bank) {
  const CombinationParams params{model.mu, model.degree};
  if (model.svm) {
    SvmDualSolution sol;
    sol.alpha = model.alpha;
    sol.bias = model.bias;
    return svm_decision_values(sol, bank, params, model.y_train);
  }
  return combined_cross_gram(bank, params) * model.alpha;
}

// ---------------------------------------------------------------------------
// Cross validation

struct CvCell {
  CellParams params;
  std::vector<double> fold_rmse;
  double mean_rmse = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string message;
};

struct CvResult {
  std::vector<CvCell> cells;
  int selected = -1;
  CellParams selected_params;
};

namespace detail {

// Grid enumeration order fixes the tie rule: lambda varies slowest.
inline std::vector<CellParams> enumerate_cells(const ExperimentConfig& cfg, int p) {
  std::vector<CellParams> cells;
  for (double lambda : cfg.lambda_grid) {
    CellParams base;
    base.lambda = lambda;
    if (uses_region(cfg.algorithm)) {
      for (double L : cfg.Lambda_grid) {
        CellParams c = base;
        c.Lambda = L;
        cells.push_back(c);
      }
    } else if (uses_beta(cfg.algorithm)) {
      for (double b : cfg.beta_grid) {
        CellParams c = base;
        c.beta = b;
        cells.push_back(c);
      }
    } else if (cfg.algorithm == Algorithm::Bm) {
      for (int k = 0; k < p; ++k) {
        CellParams c = base;
        c.kernel_index = k;
        cells.push_back(c);
      }
    } else {
      cells.push_back(base);
    }
  }
  return cells;
}

struct FoldData {
  BaseKernelBank bank;
  Vector y_train;
  Vector y_val;
};

inline Matrix take_rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

inline Vector take(const Vector& y, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

// Standardizes with training-row statistics only, then builds the per-kernel
// Gram blocks for both row sets.
inline FoldData build_fold(const Dataset& data, const std::vector<KernelSpec>& specs,
                           const std::vector<int>& train, const std::vector<int>& val) {
  const Matrix x_train_raw = take_rows(data.X, train);
  const Matrix x_val_raw = take_rows(data.X, val);
  const FeatureStats stats = compute_feature_stats(x_train_raw);
  const Matrix x_train = apply_standardization(x_train_raw, stats);
  const Matrix x_val = apply_standardization(x_val_raw, stats);
  return FoldData{build_bank(specs, x_train, &x_val), take(data.y, train), take(data.y, val)};
}

constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kSplitStream = 2;

}  // namespace detail

inline std::vector<KernelSpec> resolve_kernel_specs(const ExperimentConfig& cfg) {
  return cfg.kernels.empty() ? default_gaussian_specs() : cfg.kernels;
}

// K-fold grid search. Every cell sees the same seeded fold assignment; a cell
// whose solve throws is marked failed and skipped by the argmin, which breaks
// ties toward the earlier grid point.
inline CvResult run_cv(const Dataset& data, const ExperimentConfig& cfg) {
  const int m = static_cast<int>(data.rows());
  if (cfg.cv_folds > m) throw ConfigError("run_cv: cv_folds exceeds dataset rows");
  const auto specs = resolve_kernel_specs(cfg);

  Rng fold_rng(derive_seed(cfg.seed, detail::kFoldStream));
  const auto fold_of = make_fold_assignment(m, cfg.cv_folds, fold_rng);

  std::vector<detail::FoldData> folds;
  folds.reserve(cfg.cv_folds);
  for (int f = 0; f < cfg.cv_folds; ++f) {
    std::vector<int> train, val;
    for (int i = 0; i < m; ++i) (fold_of[i] == f ? val : train).push_back(i);
    folds.push_back(detail::build_fold(data, specs, train, val));
  }

  const auto cells = detail::enumerate_cells(cfg, static_cast<int>(specs.size()));
  CvResult result;
  result.cells.resize(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.threads, [&](int c) {
    CvCell& cell = result.cells[static_cast<std::size_t>(c)];
    cell.params = cells[static_cast<std::size_t>(c)];
    try {
      std::vector<double> errs;
      for (const auto& fold : folds) {
        const FittedModel model = fit_model(fold.bank, fold.y_train, cfg, cell.params);
        errs.push_back(rmse(predict(model, fold.bank), fold.y_val));
      }
      cell.fold_rmse = std::move(errs);
      cell.mean_rmse = mean_of(cell.fold_rmse);
    } catch (const Error& e) {
      cell.failed = true;
      cell.message = e.what();
    }
  });

  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const CvCell& cell = result.cells[c];
    if (cell.failed) continue;
    if (result.selected < 0 || cell.mean_rmse < result.cells[result.selected].mean_rmse)
      result.selected = static_cast<int>(c);
  }
  if (result.selected < 0) throw ConvergenceFailure("run_cv: every grid cell failed");
  result.selected_params = result.cells[result.selected].params;
  return result;
}

// ---------------------------------------------------------------------------
// Repeated random splits

struct MetricsReport {
  std::string algorithm;
  int degree = 1;
  CellParams params;
  std::vector<double> per_split_rmse;  // NaN marks a failed split
  std::vector<double> per_split_msf;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double msf_mean = 0.0;
  double msf_std = 0.0;
  int effective_splits = 0;
  int n_splits = 0;
  std::vector<std::string> failures;  // empty string for clean splits
  double wall_time_seconds = 0.0;     // informational; kept out of result files
  std::vector<std::vector<IterationRecord>> traces;
};

inline MetricsReport run_splits(const Dataset& data, const ExperimentConfig& cfg,
                                const CellParams& params) {
  const auto start_time = std::chrono::steady_clock::now();
  const int m = static_cast<int>(data.rows());
  const auto specs = resolve_kernel_specs(cfg);

  MetricsReport report;
  report.algorithm = to_string(cfg.algorithm);
  report.degree = algorithm_degree(cfg.algorithm, cfg.degree);
  report.params = params;
  report.n_splits = cfg.n_splits;
  report.per_split_rmse.assign(cfg.n_splits, std::numeric_limits<double>::quiet_NaN());
  report.per_split_msf.assign(cfg.n_splits, std::numeric_limits<double>::quiet_NaN());
  report.failures.assign(cfg.n_splits, std::string());
  report.traces.resize(cfg.n_splits);

  const std::uint64_t splits_root = derive_seed(cfg.seed, detail::kSplitStream);
  parallel_for(cfg.n_splits, cfg.threads, [&](int r) {
    try {
      Rng rng(derive_seed(splits_root, static_cast<std::uint64_t>(r)));
      const SplitIndices split = make_split(m, cfg.split_fraction, rng);
      const detail::FoldData fold = detail::build_fold(data, specs, split.train, split.test);
      const FittedModel model = fit_model(fold.bank, fold.y_train, cfg, params);
      const Vector pred = predict(model, fold.bank);
      report.per_split_rmse[r] = rmse(pred, fold.y_val);
      report.per_split_msf[r] = misclassification_fraction(pred, fold.y_val);
      report.traces[r] = model.trace;
    } catch (const Error& e) {
      report.failures[r] = e.what();
    }
  });

  std::vector<double> ok_rmse, ok_msf;
  for (int r = 0; r < cfg.n_splits; ++r)
    if (!std::isnan(report.per_split_rmse[r])) {
      ok_rmse.push_back(report.per_split_rmse[r]);
      ok_msf.push_back(report.per_split_msf[r]);
    }
  report.effective_splits = static_cast<int>(ok_rmse.size());
  if (report.effective_splits == 0)
    throw ConvergenceFailure("run_splits: every split failed");
  report.rmse_mean = mean_of(ok_rmse);
  report.rmse_std = population_std(ok_rmse);
  report.msf_mean = mean_of(ok_msf);
  report.msf_std = population_std(ok_msf);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

// CV selection followed by repeated-split evaluation for one algorithm.
inline MetricsReport evaluate_algorithm(const Dataset& data, const ExperimentConfig& cfg,
                                        CvResult* cv_out = nullptr) {
  const CvResult cv = run_cv(data, cfg);
  if (cv_out) *cv_out = cv;
  return run_splits(data, cfg, cv.selected_params);
}

// Reference points: the uniform combination and the best single kernel, each
// tuned by the same CV protocol.
inline std::vector<MetricsReport> run_baselines(const Dataset& data, const ExperimentConfig& cfg) {
  std::vector<MetricsReport> reports;
  for (Algorithm a : {Algorithm::Unif, Algorithm::Bm}) {
    if (a == cfg.algorithm) continue;
    ExperimentConfig sub = cfg;
    sub.algorithm = a;
    reports.push_back(evaluate_algorithm(data, sub));
  }
  return reports;
}

struct ExperimentResult {
  ExperimentConfig config;
  CvResult cv;
  MetricsReport main;
  std::vector<MetricsReport> baselines;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool with_baselines = true) {
  ExperimentResult result;
  result.config = cfg;
  const Dataset data =
      load_dataset(cfg.dataset_path, cfg.dataset_format, cfg.task != Task::Regression);
  result.main = evaluate_algorithm(data, cfg, &result.cv);
  if (with_baselines) result.baselines = run_baselines(data, cfg);
  return result;
}

// ---------------------------------------------------------------------------
// Lambda sweep: evaluation error against the ridge weight, per combination
// degree, at fixed remaining hyperparameters (first grid entries).

struct SweepRow {
  double lambda = 0.0;
  int degree = 1;
  std::string algorithm;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double msf_mean = 0.0;
  double msf_std = 0.0;
};

namespace detail {

inline std::vector<std::pair<Algorithm, int>> sweep_members(const ExperimentConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::Pgd:
    case Algorithm::Pgd2:
      return {{Algorithm::Pgd, 1}, {Algorithm::Pgd2, 2}};
    case Algorithm::Iia:
      return {{Algorithm::Iia, 1}};
    case Algorithm::Riia:
      return {{Algorithm::Riia, 2}};
    case Algorithm::Rpgd2:
      return {{Algorithm::Rpgd2, 2}};
    case Algorithm::Tr:
      return {{Algorithm::Tr, 2}};
    case Algorithm::SvmGmkl:
      return {{Algorithm::SvmGmkl, 1}, {Algorithm::SvmGmkl, 2}};
    case Algorithm::Unif:
      return {{Algorithm::Unif, 1}, {Algorithm::Unif, 2}};
    case Algorithm::Bm:
      throw ConfigError("sweep: the single-kernel benchmark has no lambda sweep");
  }
  return {};
}

}  // namespace detail

inline std::vector<SweepRow> run_lambda_sweep(const Dataset& data, const ExperimentConfig& cfg) {
  std::vector<SweepRow> rows;
  for (double lambda : cfg.lambda_grid) {
    for (const auto& [alg, degree] : detail::sweep_members(cfg)) {
      ExperimentConfig sub = cfg;
      sub.algorithm = alg;
      sub.degree = degree;
      CellParams params;
      params.lambda = lambda;
      if (detail::uses_region(alg)) params.Lambda = cfg.Lambda_grid.front();
      if (detail::uses_beta(alg)) params.beta = cfg.beta_grid.front();
      const MetricsReport report = run_splits(data, sub, params);
      rows.push_back({lambda, algorithm_degree(alg, degree), to_string(alg), report.rmse_mean,
                      report.rmse_std, report.msf_mean, report.msf_std});
    }
  }
  return rows;
}

}  // namespace mklforge
