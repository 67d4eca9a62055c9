#pragma once

#include <cmath>
#include <vector>

#include "mklforge/errors.hpp"
#include "mklforge/linalg.hpp"

namespace mklforge {

inline double rmse(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size()) throw DimensionMismatch("rmse: length mismatch");
  if (predicted.size() == 0) throw InvalidArgument("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

// Sign map used to recover a label from a real-valued prediction; zero maps
// to +1 so that every prediction gets a label.
inline double sign_label(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// Misclassification fraction of sign-mapped predictions against +/-1 labels.
inline double misclassification_fraction(const Vector& predicted, const Vector& labels) {
  if (predicted.size() != labels.size())
    throw DimensionMismatch("misclassification_fraction: length mismatch");
  if (predicted.size() == 0) throw InvalidArgument("misclassification_fraction: empty input");
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < predicted.size(); ++i) {
    // Equivalent to sign_label(predicted) != label for +/-1 labels.
    const bool predicted_positive = predicted(i) >= 0.0;
    const bool label_positive = labels(i) > 0.0;
    if (predicted_positive != label_positive) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw InvalidArgument("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation (divides by n, not n-1).
inline double population_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace mklforge
