// Command-line front end: experiment orchestration (run / cv / sweep / solve)
// plus the bound and curvature calculators. Exit codes: 0 success, 2 bad
// configuration, 3 bad data, 4 solver divergence, 1 anything else.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mklforge/bounds.hpp"
#include "mklforge/config.hpp"
#include "mklforge/dataset.hpp"
#include "mklforge/experiment.hpp"
#include "mklforge/results.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = "out";
  std::string config_path;
  std::optional<std::string> algorithm;
  std::optional<double> fit_lambda;
};

mklforge::ExperimentConfig load_config(const GlobalFlags& flags) {
  if (flags.config_path.empty()) throw mklforge::ConfigError("a --config file is required");
  mklforge::ExperimentConfig cfg = mklforge::load_experiment_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.algorithm) cfg.algorithm = mklforge::algorithm_from_string(*flags.algorithm);
  if (flags.fit_lambda) {
    if (!(*flags.fit_lambda > 0.0))
      throw mklforge::ConfigError("--decouple-lambda must be positive");
    cfg.fit_lambda = *flags.fit_lambda;
  }
  return cfg;
}

std::filesystem::path ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw mklforge::IoError("cannot create output directory " + out_dir);
  return out_dir;
}

void write_json(const std::filesystem::path& path, const mklforge::Json& obj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mklforge::IoError("cannot write " + path.string());
  out << obj.dump(2) << '\n';
}

void print_report(const mklforge::MetricsReport& report) {
  std::printf("%-10s degree=%d rmse %.6f +/- %.6f   msf %.6f +/- %.6f   (%d/%d splits)\n",
              report.algorithm.c_str(), report.degree, report.rmse_mean, report.rmse_std,
              report.msf_mean, report.msf_std, report.effective_splits, report.n_splits);
}

int cmd_run(const GlobalFlags& flags) {
  const auto cfg = load_config(flags);
  const auto result = mklforge::run_experiment(cfg);
  const auto dir = ensure_out_dir(flags.out_dir);
  mklforge::emit_results(dir, result);
  print_report(result.main);
  for (const auto& b : result.baselines) print_report(b);
  std::printf("wrote %s/{results.csv,cv_table.csv,trace.jsonl,config.resolved.json}\n",
              dir.string().c_str());
  return kExitOk;
}

int cmd_cv(const GlobalFlags& flags) {
  const auto cfg = load_config(flags);
  const auto data = mklforge::load_dataset(cfg.dataset_path, cfg.dataset_format,
                                           cfg.task != mklforge::Task::Regression);
  const auto cv = mklforge::run_cv(data, cfg);
  const auto dir = ensure_out_dir(flags.out_dir);
  mklforge::emit_cv_table_csv(dir / "cv_table.csv", cv);
  const auto& p = cv.selected_params;
  std::printf("selected: lambda=%g", p.lambda);
  if (p.Lambda) std::printf(" Lambda=%g", *p.Lambda);
  if (p.beta) std::printf(" beta=%g", *p.beta);
  if (p.kernel_index) std::printf(" kernel=%d", *p.kernel_index);
  std::printf("  (cv rmse %.6f over %zu cells)\n",
              cv.cells[static_cast<std::size_t>(cv.selected)].mean_rmse, cv.cells.size());
  return kExitOk;
}

int cmd_sweep(const GlobalFlags& flags, const std::vector<double>& lambda_grid) {
  auto cfg = load_config(flags);
  if (!lambda_grid.empty()) cfg.lambda_grid = lambda_grid;
  const auto data = mklforge::load_dataset(cfg.dataset_path, cfg.dataset_format,
                                           cfg.task != mklforge::Task::Regression);
  const auto rows = mklforge::run_lambda_sweep(data, cfg);
  const auto dir = ensure_out_dir(flags.out_dir);
  mklforge::emit_lambda_sweep_csv(dir / "lambda_sweep.csv", rows);
  for (const auto& r : rows)
    std::printf("lambda=%-10g d=%d %-10s rmse %.6f   msf %.6f\n", r.lambda, r.degree,
                r.algorithm.c_str(), r.rmse_mean, r.msf_mean);
  return kExitOk;
}

int cmd_solve(const GlobalFlags& flags, double lambda, double Lambda, double beta) {
  auto cfg = load_config(flags);
  const auto data = mklforge::load_dataset(cfg.dataset_path, cfg.dataset_format,
                                           cfg.task != mklforge::Task::Regression);
  const auto stats = mklforge::compute_feature_stats(data.X);
  const auto bank = mklforge::build_bank(mklforge::resolve_kernel_specs(cfg),
                                         mklforge::apply_standardization(data.X, stats));
  mklforge::CellParams params;
  params.lambda = lambda;
  params.Lambda = Lambda;
  params.beta = beta;
  const auto model = mklforge::fit_model(bank, data.y, cfg, params);

  const auto dir = ensure_out_dir(flags.out_dir);
  mklforge::MetricsReport report;
  report.traces.push_back(model.trace);
  mklforge::emit_trace_jsonl(dir / "trace.jsonl", report);

  std::printf("mu =");
  for (Eigen::Index k = 0; k < model.mu.size(); ++k) std::printf(" %.10g", model.mu(k));
  std::printf("\ndegree=%d iterations=%zu\n", model.degree, model.trace.size());
  return kExitOk;
}

int cmd_bounds(const GlobalFlags& flags, const mklforge::BoundInputs& in,
               std::optional<double> margin_loss, bool to_file) {
  mklforge::Json out;
  out["family"] = in.family == mklforge::BoundFamily::Linear ? "linear" : "polynomial";
  out["p"] = in.p;
  out["R"] = in.R;
  out["m"] = in.m;
  out["rademacher_bound"] = mklforge::rademacher_bound(in);
  if (margin_loss) {
    out["rho"] = in.rho;
    out["delta"] = in.delta;
    out["empirical_margin_loss"] = *margin_loss;
    out["generalization_bound"] = mklforge::generalization_bound(in, *margin_loss);
  }
  std::printf("%s\n", out.dump(2).c_str());
  if (to_file) write_json(ensure_out_dir(flags.out_dir) / "bounds.json", out);
  return kExitOk;
}

int cmd_curvature(const GlobalFlags& flags, int n_samples, double Lambda, int q, bool to_file) {
  const auto cfg = load_config(flags);
  const auto data = mklforge::load_dataset(cfg.dataset_path, cfg.dataset_format,
                                           cfg.task != mklforge::Task::Regression);
  const auto stats = mklforge::compute_feature_stats(data.X);
  const auto bank = mklforge::build_bank(mklforge::resolve_kernel_specs(cfg),
                                         mklforge::apply_standardization(data.X, stats));
  const mklforge::FeasibleRegion region{mklforge::Vector::Ones(bank.p()), Lambda, q};
  const auto est =
      mklforge::estimate_curvature_constants(bank, region, n_samples, cfg.seed, cfg.threads);

  mklforge::Json out;
  out["B"] = est.B;
  out["C"] = est.C;
  out["D"] = est.D;
  out["E"] = est.E;
  out["H"] = est.H;
  out["concavity_defined"] = est.concavity_defined;
  out["concavity_threshold"] = est.concavity_threshold;
  out["convexity_defined"] = est.convexity_defined;
  if (est.convexity_defined) out["convexity_threshold"] = est.convexity_threshold;
  out["singular_samples"] = est.singular_samples;
  out["sample_count"] = est.sample_count;
  out["seed"] = est.seed;
  std::printf("%s\n", out.dump(2).c_str());
  if (to_file) write_json(ensure_out_dir(flags.out_dir) / "curvature.json", out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mkl-forge: kernel-combination learning experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "Override the config seed");
  app.add_option("--threads", flags.threads, "Override the config worker count");
  app.add_option("--out-dir", flags.out_dir, "Output directory (default: out)");

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "JSON experiment config")->required();
  };

  auto* run = app.add_subcommand("run", "Full experiment: CV, repeated splits, baselines");
  add_config(run);
  run->add_option("--algorithm", flags.algorithm, "Override the config algorithm");
  run->add_option("--decouple-lambda", flags.fit_lambda,
                  "Fit-stage ridge weight, decoupled from the learning lambda");

  auto* cv = app.add_subcommand("cv", "Grid selection by k-fold cross validation only");
  add_config(cv);
  cv->add_option("--algorithm", flags.algorithm, "Override the config algorithm");

  std::vector<double> sweep_grid;
  auto* sweep = app.add_subcommand("sweep", "Evaluation error against lambda, per degree");
  add_config(sweep);
  sweep->add_option("--lambda-grid", sweep_grid, "Lambda values to sweep");
  sweep->add_option("--algorithm", flags.algorithm, "Override the config algorithm");
  sweep->add_option("--decouple-lambda", flags.fit_lambda,
                    "Fit-stage ridge weight, decoupled from the learning lambda");

  double solve_lambda = 0.1, solve_Lambda = 1.0, solve_beta = 1.0;
  auto* solve = app.add_subcommand("solve", "Single solve on the full dataset");
  add_config(solve);
  solve->add_option("--algorithm", flags.algorithm,
                    "pgd|iia|riia|pgd2|rpgd2|svm_gmkl|tr (overrides config)");
  solve->add_option("--lambda", solve_lambda, "Ridge weight (default 0.1)");
  solve->add_option("--Lambda", solve_Lambda, "Feasible-region radius (default 1.0)");
  solve->add_option("--beta", solve_beta, "Weight-penalty strength (default 1.0)");

  mklforge::BoundInputs bound_in;
  std::string bound_family = "linear";
  std::optional<double> margin_loss;
  auto* bounds = app.add_subcommand("bounds", "Complexity and margin bound calculator");
  bounds->add_option("--family", bound_family, "linear|polynomial");
  bounds->add_option("--p", bound_in.p, "Number of base kernels")->required();
  bounds->add_option("--R", bound_in.R, "Kernel scale bound")->required();
  bounds->add_option("--m", bound_in.m, "Sample size")->required();
  bounds->add_option("--rho", bound_in.rho, "Margin (default 1)");
  bounds->add_option("--delta", bound_in.delta, "Confidence level (default 0.05)");
  bounds->add_option("--margin-loss", margin_loss, "Empirical margin loss; enables the full bound");
  bounds->add_flag("--write", "Also write bounds.json to the output directory");

  int curv_samples = 2000, curv_q = 2;
  double curv_Lambda = 0.5;
  auto* curvature = app.add_subcommand("curvature", "Monte-Carlo curvature constants for a bank");
  add_config(curvature);
  curvature->add_option("--n-samples", curv_samples, "Sample count (default 2000)");
  curvature->add_option("--Lambda", curv_Lambda, "Feasible-region radius (default 0.5)");
  curvature->add_option("--q", curv_q, "Region norm, 1 or 2 (default 2)");
  curvature->add_flag("--write", "Also write curvature.json to the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (cv->parsed()) return cmd_cv(flags);
    if (sweep->parsed()) return cmd_sweep(flags, sweep_grid);
    if (solve->parsed()) return cmd_solve(flags, solve_lambda, solve_Lambda, solve_beta);
    if (bounds->parsed()) {
      if (bound_family == "polynomial")
        bound_in.family = mklforge::BoundFamily::Polynomial;
      else if (bound_family != "linear")
        throw mklforge::ConfigError("--family must be linear or polynomial");
      return cmd_bounds(flags, bound_in, margin_loss, bounds->count("--write") > 0);
    }
    if (curvature->parsed())
      return cmd_curvature(flags, curv_samples, curv_Lambda, curv_q,
                           curvature->count("--write") > 0);
  } catch (const mklforge::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const mklforge::ParseError& e) {
    std::fprintf(stderr, "data error (line %ld): %s\n", e.line(), e.what());
    return kExitData;
  } catch (const mklforge::LabelCoercionError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const mklforge::EmptyDataset& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const mklforge::NonFiniteFeature& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const mklforge::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitData;
  } catch (const mklforge::ConvergenceFailure& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
