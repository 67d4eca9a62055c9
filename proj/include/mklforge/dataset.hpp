#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mklforge/errors.hpp"
#include "mklforge/linalg.hpp"

namespace mklforge {

enum class DataFormat { Csv, Libsvm };

struct Dataset {
  std::string name;
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;  // empty when the source has no header

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

namespace detail {

inline bool parse_double(const std::string& token, double& out) {
  const char* s = token.c_str();
  char* end = nullptr;
  out = std::strtod(s, &end);
  if (end == s) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0';
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline void check_loaded(Dataset& data) {
  if (data.X.rows() < 2) throw EmptyDataset("load_dataset: need at least 2 rows");
  if (!data.X.allFinite() || !data.y.allFinite())
    throw NonFiniteFeature("load_dataset: non-finite value in data");
}

// Recognized binary codings, coerced onto {-1, +1} keeping the order of the
// original values. Anything else is rejected.
inline void coerce_labels(Vector& y) {
  std::set<double> values(y.data(), y.data() + y.size());
  const auto is = [&](double a, double b) {
    return values == std::set<double>{a, b};
  };
  if (is(-1.0, 1.0)) return;
  double hi = 1.0;
  if (is(0.0, 1.0)) {
    hi = 1.0;
  } else if (is(1.0, 2.0)) {
    hi = 2.0;
  } else {
    std::ostringstream msg;
    msg << "labels are not a recognized binary coding; saw {";
    for (double v : values) msg << " " << v;
    msg << " }";
    throw LabelCoercionError(msg.str());
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = (y(i) == hi) ? 1.0 : -1.0;
}

inline Dataset load_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j)
      if (!parse_double(fields[j], row[j])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      // Only the first row may be non-numeric; it is taken as the header.
      if (rows.empty() && header.empty()) {
        header.assign(fields.begin(), fields.end());
        continue;
      }
      throw ParseError("csv: non-numeric field", line_no);
    }
    if (fields.size() < 2) throw ParseError("csv: need at least one feature and a label", line_no);
    if (width == 0)
      width = fields.size();
    else if (fields.size() != width)
      throw ParseError("csv: inconsistent column count", line_no);
    rows.push_back(std::move(row));
  }
  if (!header.empty() && width != 0 && header.size() != width)
    throw ParseError("csv: header width differs from data", 1);

  Dataset data;
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(width == 0 ? 0 : width - 1);
  data.X.resize(m, n);
  data.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) data.X(i, j) = rows[i][j];
    data.y(i) = rows[i][width - 1];
  }
  if (!header.empty()) data.feature_names.assign(header.begin(), header.end() - 1);
  return data;
}

inline Dataset load_libsvm(std::istream& in) {
  std::vector<std::pair<double, std::vector<std::pair<long, double>>>> rows;
  std::string line;
  long line_no = 0;
  long max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty()) continue;
    std::istringstream stream(body);
    std::string token;
    if (!(stream >> token)) throw ParseError("libsvm: missing label", line_no);
    double label = 0.0;
    if (!parse_double(token, label)) throw ParseError("libsvm: bad label", line_no);
    std::vector<std::pair<long, double>> entries;
    while (stream >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw ParseError("libsvm: expected index:value", line_no);
      double idx_val = 0.0, val = 0.0;
      if (!parse_double(token.substr(0, colon), idx_val) ||
          !parse_double(token.substr(colon + 1), val))
        throw ParseError("libsvm: bad index:value pair", line_no);
      const long idx = static_cast<long>(idx_val);
      if (idx < 1 || static_cast<double>(idx) != idx_val)
        throw ParseError("libsvm: index must be a positive integer", line_no);
      max_index = std::max(max_index, idx);
      entries.emplace_back(idx, val);
    }
    rows.emplace_back(label, std::move(entries));
  }

  Dataset data;
  const auto m = static_cast<Eigen::Index>(rows.size());
  data.X = Matrix::Zero(m, max_index);
  data.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    data.y(i) = rows[i].first;
    for (const auto& [idx, val] : rows[i].second) data.X(i, idx - 1) = val;
  }
  return data;
}

}  // namespace detail

// Parses an in-memory dataset. CSV: last column is the label, header rows are
// auto-detected by a non-numeric first row. libsvm: `label idx:val ...` with
// 1-based indices, densified to the largest index seen. With
// classification = true, labels are coerced onto {-1,+1}; accepted codings
// are {-1,+1}, {0,1}, and {1,2}.
inline Dataset parse_dataset(std::istream& in, DataFormat format, bool classification = false,
                             std::string name = {}) {
  Dataset data = format == DataFormat::Csv ? detail::load_csv(in) : detail::load_libsvm(in);
  data.name = std::move(name);
  detail::check_loaded(data);
  if (classification) detail::coerce_labels(data.y);
  return data;
}

inline Dataset load_dataset(const std::string& path, DataFormat format,
                            bool classification = false) {
  std::ifstream in(path);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos)
    name = name.substr(slash + 1);
  if (const auto dot = name.find_last_of('.'); dot != std::string::npos && dot > 0)
    name = name.substr(0, dot);
  return parse_dataset(in, format, classification, std::move(name));
}

// Per-feature affine transform fitted on training rows only.
struct FeatureStats {
  Vector mean;
  Vector scale;  // 1.0 for (near-)constant features, so they are centered only
};

inline FeatureStats compute_feature_stats(const Matrix& x_train) {
  if (x_train.rows() < 1) throw EmptyDataset("compute_feature_stats: no rows");
  FeatureStats stats;
  stats.mean = x_train.colwise().mean();
  const Matrix centered = x_train.rowwise() - stats.mean.transpose();
  const Vector var = centered.array().square().colwise().mean();
  stats.scale.resize(var.size());
  for (Eigen::Index j = 0; j < var.size(); ++j) {
    const double sd = std::sqrt(var(j));
    stats.scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

inline Matrix apply_standardization(const Matrix& x, const FeatureStats& stats) {
  if (x.cols() != stats.mean.size())
    throw DimensionMismatch("apply_standardization: feature count mismatch");
  Matrix out = x.rowwise() - stats.mean.transpose();
  out.array().rowwise() /= stats.scale.transpose().array();
  return out;
}

inline Dataset standardize(const Dataset& data, const FeatureStats& stats) {
  Dataset out = data;
  out.X = apply_standardization(data.X, stats);
  return out;
}

}  // namespace mklforge
