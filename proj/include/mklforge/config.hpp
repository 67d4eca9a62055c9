#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mklforge/dataset.hpp"
#include "mklforge/errors.hpp"
#include "mklforge/kernels.hpp"

namespace mklforge {

using Json = nlohmann::ordered_json;

enum class Task { Regression, Classification, SvmClassification };

enum class Algorithm { Pgd, Iia, Riia, Pgd2, Rpgd2, SvmGmkl, Tr, Bm, Unif };

// Optional overrides for the inner solvers; absent fields keep each
// algorithm's own default.
struct SolverOverrides {
  std::optional<double> eta;
  std::optional<double> eps;
  std::optional<int> max_iter;
  std::optional<double> backoff;
  std::optional<double> kkt_tol;
  std::optional<int> max_pair_updates;
  std::optional<double> grad_tol;
  std::optional<double> delta0;
  std::optional<double> delta_hat;
  std::optional<double> acceptance;
};

struct ExperimentConfig {
  std::string dataset_path;
  DataFormat dataset_format = DataFormat::Csv;
  std::string dataset_name;  // defaults to the path's stem when empty

  Task task = Task::Regression;
  Algorithm algorithm = Algorithm::Pgd;
  std::vector<KernelSpec> kernels;  // empty selects the default Gaussian bank
  int degree = 1;                   // combination degree where not fixed by the algorithm
  int q = 2;                        // feasible-region norm for the constrained solvers

  std::vector<double> lambda_grid{0.001, 0.01, 0.1, 1.0};
  std::vector<double> Lambda_grid{0.001, 0.1, 0.5, 1.0, 2.0, 10.0};
  std::vector<double> beta_grid{0.1, 1.0};
  // When set, final fits use this ridge weight while kernel learning keeps
  // the grid lambda.
  std::optional<double> fit_lambda;

  int cv_folds = 10;
  int n_splits = 30;
  double split_fraction = 0.5;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string rng = "splitmix64-v1";
  SolverOverrides solver;
};

inline std::string to_string(Task t) {
  switch (t) {
    case Task::Regression: return "regression";
    case Task::Classification: return "classification";
    case Task::SvmClassification: return "svm_classification";
  }
  return "regression";
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Pgd: return "pgd";
    case Algorithm::Iia: return "iia";
    case Algorithm::Riia: return "riia";
    case Algorithm::Pgd2: return "pgd2";
    case Algorithm::Rpgd2: return "rpgd2";
    case Algorithm::SvmGmkl: return "svm_gmkl";
    case Algorithm::Tr: return "tr";
    case Algorithm::Bm: return "bm";
    case Algorithm::Unif: return "unif";
  }
  return "pgd";
}

inline Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "classification") return Task::Classification;
  if (s == "svm_classification") return Task::SvmClassification;
  throw ConfigError("config: unknown task '" + s + "'");
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "pgd") return Algorithm::Pgd;
  if (s == "iia") return Algorithm::Iia;
  if (s == "riia") return Algorithm::Riia;
  if (s == "pgd2") return Algorithm::Pgd2;
  if (s == "rpgd2") return Algorithm::Rpgd2;
  if (s == "svm_gmkl") return Algorithm::SvmGmkl;
  if (s == "tr") return Algorithm::Tr;
  if (s == "bm") return Algorithm::Bm;
  if (s == "unif") return Algorithm::Unif;
  throw ConfigError("config: unknown algorithm '" + s + "'");
}

// Combination degree actually used by an algorithm; only those with a free
// degree consult the config value.
inline int algorithm_degree(Algorithm a, int config_degree) {
  switch (a) {
    case Algorithm::Pgd:
    case Algorithm::Iia:
      return 1;
    case Algorithm::Pgd2:
    case Algorithm::Rpgd2:
    case Algorithm::Riia:
    case Algorithm::Tr:
      return 2;
    default:
      return config_degree;
  }
}

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

inline double require_number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
  return v.get<double>();
}

inline int require_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError("config: " + where + " must be an integer");
  return v.get<int>();
}

inline std::string require_string(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError("config: " + where + " must be a string");
  return v.get<std::string>();
}

inline std::vector<double> require_grid(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty())
    throw ConfigError("config: " + where + " must be a non-empty array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(require_number(x, where + " entry"));
  return out;
}

inline KernelSpec parse_kernel(const Json& obj) {
  if (!obj.is_object()) throw ConfigError("config: kernels entries must be objects");
  const std::string kind = obj.contains("kind") ? require_string(obj.at("kind"), "kernels.kind")
                                                : throw ConfigError("config: kernel without kind");
  const bool normalize = obj.value("normalize", false);
  const auto norm = normalize ? Normalization::UnitDiagonal : Normalization::None;
  if (kind == "linear") {
    reject_unknown_keys(obj, {"kind", "normalize"}, "kernels[linear]");
    return KernelSpec::linear(norm);
  }
  if (kind == "gaussian") {
    reject_unknown_keys(obj, {"kind", "normalize", "gamma"}, "kernels[gaussian]");
    if (!obj.contains("gamma")) throw ConfigError("config: gaussian kernel requires gamma");
    return KernelSpec::gaussian(require_number(obj.at("gamma"), "gamma"), norm);
  }
  if (kind == "polynomial") {
    reject_unknown_keys(obj, {"kind", "normalize", "degree", "offset"}, "kernels[polynomial]");
    if (!obj.contains("degree")) throw ConfigError("config: polynomial kernel requires degree");
    return KernelSpec::polynomial(require_int(obj.at("degree"), "degree"),
                                  obj.contains("offset") ? require_number(obj.at("offset"), "offset")
                                                         : 0.0,
                                  norm);
  }
  if (kind == "single_feature") {
    reject_unknown_keys(obj, {"kind", "normalize", "index"}, "kernels[single_feature]");
    if (!obj.contains("index")) throw ConfigError("config: single_feature kernel requires index");
    return KernelSpec::single_feature(require_int(obj.at("index"), "index"), norm);
  }
  throw ConfigError("config: unknown kernel kind '" + kind + "'");
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.dataset_path.empty()) throw ConfigError("config: dataset.path is required");
  for (double l : cfg.lambda_grid)
    if (!(l > 0.0)) throw ConfigError("config: lambda_grid entries must be positive");
  for (double l : cfg.Lambda_grid)
    if (!(l > 0.0)) throw ConfigError("config: Lambda_grid entries must be positive");
  for (double b : cfg.beta_grid)
    if (!(b > 0.0)) throw ConfigError("config: beta_grid entries must be positive");
  if (cfg.fit_lambda && !(*cfg.fit_lambda > 0.0))
    throw ConfigError("config: fit_lambda must be positive");
  if (cfg.cv_folds < 2) throw ConfigError("config: cv_folds must be at least 2");
  if (cfg.n_splits < 1) throw ConfigError("config: n_splits must be at least 1");
  if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0))
    throw ConfigError("config: split_fraction must lie in (0, 1)");
  if (cfg.degree != 1 && cfg.degree != 2) throw ConfigError("config: degree must be 1 or 2");
  if (cfg.q != 1 && cfg.q != 2) throw ConfigError("config: q must be 1 or 2");
  if (cfg.threads < 1) throw ConfigError("config: threads must be at least 1");
  if (cfg.rng != "splitmix64-v1")
    throw ConfigError("config: rng must be 'splitmix64-v1' (pinned for seed portability)");
  if (cfg.solver.max_iter && *cfg.solver.max_iter < 1)
    throw ConfigError("config: solver.max_iter must be at least 1");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const Json& root) {
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown_keys(
      root,
      {"dataset", "task", "algorithm", "kernels", "degree", "q", "lambda_grid", "Lambda_grid",
       "beta_grid", "fit_lambda", "cv_folds", "n_splits", "split_fraction", "seed", "threads",
       "rng", "solver"},
      "top level");

  ExperimentConfig cfg;
  if (!root.contains("dataset")) throw ConfigError("config: dataset object is required");
  {
    const Json& d = root.at("dataset");
    if (!d.is_object()) throw ConfigError("config: dataset must be an object");
    detail::reject_unknown_keys(d, {"path", "format", "name"}, "dataset");
    if (!d.contains("path")) throw ConfigError("config: dataset.path is required");
    cfg.dataset_path = detail::require_string(d.at("path"), "dataset.path");
    if (d.contains("format")) {
      const std::string f = detail::require_string(d.at("format"), "dataset.format");
      if (f == "csv")
        cfg.dataset_format = DataFormat::Csv;
      else if (f == "libsvm")
        cfg.dataset_format = DataFormat::Libsvm;
      else
        throw ConfigError("config: dataset.format must be 'csv' or 'libsvm'");
    }
    if (d.contains("name")) cfg.dataset_name = detail::require_string(d.at("name"), "dataset.name");
  }

  if (root.contains("task"))
    cfg.task = task_from_string(detail::require_string(root.at("task"), "task"));
  if (root.contains("algorithm"))
    cfg.algorithm =
        algorithm_from_string(detail::require_string(root.at("algorithm"), "algorithm"));
  if (root.contains("kernels")) {
    const Json& arr = root.at("kernels");
    if (!arr.is_array() || arr.empty())
      throw ConfigError("config: kernels must be a non-empty array");
    for (const auto& k : arr) cfg.kernels.push_back(detail::parse_kernel(k));
  }
  if (root.contains("degree")) cfg.degree = detail::require_int(root.at("degree"), "degree");
  if (root.contains("q")) cfg.q = detail::require_int(root.at("q"), "q");
  if (root.contains("lambda_grid"))
    cfg.lambda_grid = detail::require_grid(root.at("lambda_grid"), "lambda_grid");
  if (root.contains("Lambda_grid"))
    cfg.Lambda_grid = detail::require_grid(root.at("Lambda_grid"), "Lambda_grid");
  if (root.contains("beta_grid"))
    cfg.beta_grid = detail::require_grid(root.at("beta_grid"), "beta_grid");
  if (root.contains("fit_lambda"))
    cfg.fit_lambda = detail::require_number(root.at("fit_lambda"), "fit_lambda");
  if (root.contains("cv_folds")) cfg.cv_folds = detail::require_int(root.at("cv_folds"), "cv_folds");
  if (root.contains("n_splits")) cfg.n_splits = detail::require_int(root.at("n_splits"), "n_splits");
  if (root.contains("split_fraction"))
    cfg.split_fraction = detail::require_number(root.at("split_fraction"), "split_fraction");
  if (root.contains("seed")) {
    const Json& s = root.at("seed");
    if (!s.is_number_integer() && !s.is_number_unsigned())
      throw ConfigError("config: seed must be an integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.contains("threads")) cfg.threads = detail::require_int(root.at("threads"), "threads");
  if (root.contains("rng")) cfg.rng = detail::require_string(root.at("rng"), "rng");

  if (root.contains("solver")) {
    const Json& s = root.at("solver");
    if (!s.is_object()) throw ConfigError("config: solver must be an object");
    detail::reject_unknown_keys(s,
                                {"eta", "eps", "max_iter", "backoff", "kkt_tol",
                                 "max_pair_updates", "grad_tol", "delta0", "delta_hat",
                                 "acceptance"},
                                "solver");
    const auto num = [&](const char* key) -> std::optional<double> {
      if (!s.contains(key)) return std::nullopt;
      return detail::require_number(s.at(key), std::string("solver.") + key);
    };
    cfg.solver.eta = num("eta");
    cfg.solver.eps = num("eps");
    cfg.solver.backoff = num("backoff");
    cfg.solver.kkt_tol = num("kkt_tol");
    cfg.solver.grad_tol = num("grad_tol");
    cfg.solver.delta0 = num("delta0");
    cfg.solver.delta_hat = num("delta_hat");
    cfg.solver.acceptance = num("acceptance");
    if (s.contains("max_iter"))
      cfg.solver.max_iter = detail::require_int(s.at("max_iter"), "solver.max_iter");
    if (s.contains("max_pair_updates"))
      cfg.solver.max_pair_updates =
          detail::require_int(s.at("max_pair_updates"), "solver.max_pair_updates");
  }

  detail::validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_experiment_config(root);
}

// Full effective configuration, defaults included, for reproducibility
// records. Deliberately contains no timing or host information.
inline Json resolved_config_json(const ExperimentConfig& cfg) {
  Json root;
  root["dataset"] = {{"path", cfg.dataset_path},
                     {"format", cfg.dataset_format == DataFormat::Csv ? "csv" : "libsvm"},
                     {"name", cfg.dataset_name}};
  root["task"] = to_string(cfg.task);
  root["algorithm"] = to_string(cfg.algorithm);
  Json kernels = Json::array();
  const auto specs = cfg.kernels.empty() ? default_gaussian_specs() : cfg.kernels;
  for (const auto& spec : specs) {
    Json k;
    switch (spec.kind) {
      case KernelKind::Linear:
        k["kind"] = "linear";
        break;
      case KernelKind::Polynomial:
        k["kind"] = "polynomial";
        k["degree"] = spec.degree;
        k["offset"] = spec.offset;
        break;
      case KernelKind::Gaussian:
        k["kind"] = "gaussian";
        k["gamma"] = spec.gamma;
        break;
      case KernelKind::SingleFeatureLinear:
        k["kind"] = "single_feature";
        k["index"] = spec.feature_index;
        break;
    }
    k["normalize"] = spec.normalize == Normalization::UnitDiagonal;
    kernels.push_back(std::move(k));
  }
  root["kernels"] = std::move(kernels);
  root["degree"] = cfg.degree;
  root["q"] = cfg.q;
  root["lambda_grid"] = cfg.lambda_grid;
  root["Lambda_grid"] = cfg.Lambda_grid;
  root["beta_grid"] = cfg.beta_grid;
  if (cfg.fit_lambda) root["fit_lambda"] = *cfg.fit_lambda;
  root["cv_folds"] = cfg.cv_folds;
  root["n_splits"] = cfg.n_splits;
  root["split_fraction"] = cfg.split_fraction;
  root["seed"] = cfg.seed;
  root["threads"] = cfg.threads;
  root["rng"] = cfg.rng;
  Json solver = Json::object();
  const auto put = [&](const char* key, const auto& opt) {
    if (opt) solver[key] = *opt;
  };
  put("eta", cfg.solver.eta);
  put("eps", cfg.solver.eps);
  put("max_iter", cfg.solver.max_iter);
  put("backoff", cfg.solver.backoff);
  put("kkt_tol", cfg.solver.kkt_tol);
  put("max_pair_updates", cfg.solver.max_pair_updates);
  put("grad_tol", cfg.solver.grad_tol);
  put("delta0", cfg.solver.delta0);
  put("delta_hat", cfg.solver.delta_hat);
  put("acceptance", cfg.solver.acceptance);
  root["solver"] = std::move(solver);
  return root;
}

}  // namespace mklforge
