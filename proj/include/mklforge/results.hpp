#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mklforge/config.hpp"
#include "mklforge/experiment.hpp"

namespace mklforge {

// Round-trip-safe decimal form; used for every numeric field so that result
// files are byte-reproducible across runs.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
  if (!out) throw IoError("emit_results: cannot write " + path.string());
  return out;
}

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_full(*v) : std::string();
}

inline std::string opt_field(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace detail

inline void emit_results_csv(const std::filesystem::path& path,
                             const std::vector<MetricsReport>& reports) {
  auto out = detail::open_output(path);
  out << "algorithm,degree,lambda,Lambda,beta,kernel_index,rmse_mean,rmse_std,msf_mean,msf_std,"
         "effective_splits,n_splits\n";
  for (const auto& r : reports) {
    out << r.algorithm << ',' << r.degree << ',' << format_full(r.params.lambda) << ','
        << detail::opt_field(r.params.Lambda) << ',' << detail::opt_field(r.params.beta) << ','
        << detail::opt_field(r.params.kernel_index) << ',' << format_full(r.rmse_mean) << ','
        << format_full(r.rmse_std) << ',' << format_full(r.msf_mean) << ','
        << format_full(r.msf_std) << ',' << r.effective_splits << ',' << r.n_splits << '\n';
  }
}

inline void emit_cv_table_csv(const std::filesystem::path& path, const CvResult& cv) {
  auto out = detail::open_output(path);
  out << "lambda,Lambda,beta,kernel_index,mean_rmse,selected,failed,message,fold_rmse\n";
  for (std::size_t c = 0; c < cv.cells.size(); ++c) {
    const CvCell& cell = cv.cells[c];
    std::string folds;
    for (std::size_t f = 0; f < cell.fold_rmse.size(); ++f) {
      if (f) folds += '|';
      folds += format_full(cell.fold_rmse[f]);
    }
    std::string message = cell.message;
    for (char& ch : message)
      if (ch == ',' || ch == '\n') ch = ';';
    out << format_full(cell.params.lambda) << ',' << detail::opt_field(cell.params.Lambda) << ','
        << detail::opt_field(cell.params.beta) << ','
        << detail::opt_field(cell.params.kernel_index) << ','
        << (cell.failed ? std::string() : format_full(cell.mean_rmse)) << ','
        << (static_cast<int>(c) == cv.selected ? 1 : 0) << ',' << (cell.failed ? 1 : 0) << ','
        << message << ',' << folds << '\n';
  }
}

// One line per solver iteration, grouped by split in ascending order.
inline void emit_trace_jsonl(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = detail::open_output(path);
  for (std::size_t r = 0; r < report.traces.size(); ++r)
    for (const IterationRecord& rec : report.traces[r]) {
      Json line;
      line["split"] = static_cast<int>(r);
      line["iter"] = rec.iter;
      line["objective"] = rec.objective;
      line["mu_norm"] = rec.mu_norm;
      line["eta"] = rec.eta;
      out << line.dump() << '\n';
    }
}

inline void emit_lambda_sweep_csv(const std::filesystem::path& path,
                                  const std::vector<SweepRow>& rows) {
  auto out = detail::open_output(path);
  out << "lambda,degree,algorithm,rmse_mean,rmse_std,msf_mean,msf_std\n";
  for (const auto& r : rows)
    out << format_full(r.lambda) << ',' << r.degree << ',' << r.algorithm << ','
        << format_full(r.rmse_mean) << ',' << format_full(r.rmse_std) << ','
        << format_full(r.msf_mean) << ',' << format_full(r.msf_std) << '\n';
}

inline void emit_config_json(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  auto out = detail::open_output(path);
  out << resolved_config_json(cfg).dump(2) << '\n';
}

// Writes the full artifact set for one experiment into out_dir.
inline void emit_results(const std::filesystem::path& out_dir, const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("emit_results: cannot create " + out_dir.string());
  std::vector<MetricsReport> reports;
  reports.push_back(result.main);
  for (const auto& b : result.baselines) reports.push_back(b);
  emit_results_csv(out_dir / "results.csv", reports);
  emit_cv_table_csv(out_dir / "cv_table.csv", result.cv);
  emit_trace_jsonl(out_dir / "trace.jsonl", result.main);
  emit_config_json(out_dir / "config.resolved.json", result.config);
}

}  // namespace mklforge
