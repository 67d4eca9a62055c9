#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mklforge/errors.hpp"
#include "mklforge/linalg.hpp"

namespace mklforge {

enum class KernelKind : std::uint8_t { Linear, Polynomial, Gaussian, SingleFeatureLinear };

enum class Normalization : std::uint8_t { None, UnitDiagonal };

// Description of one base kernel. Only the parameters relevant to `kind`
// are read; the factories below set the rest to inert defaults.
struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  int degree = 1;           // Polynomial
  double offset = 0.0;      // Polynomial
  double gamma = 1.0;       // Gaussian
  int feature_index = 0;    // SingleFeatureLinear
  Normalization normalize = Normalization::None;

  static KernelSpec linear(Normalization n = Normalization::None) {
    KernelSpec s;
    s.kind = KernelKind::Linear;
    s.normalize = n;
    return s;
  }

  static KernelSpec polynomial(int degree, double offset, Normalization n = Normalization::None) {
    if (degree < 1) throw InvalidArgument("KernelSpec::polynomial: degree must be at least 1");
    KernelSpec s;
    s.kind = KernelKind::Polynomial;
    s.degree = degree;
    s.offset = offset;
    s.normalize = n;
    return s;
  }

  static KernelSpec gaussian(double gamma, Normalization n = Normalization::None) {
    if (!(gamma > 0.0)) throw InvalidArgument("KernelSpec::gaussian: gamma must be positive");
    KernelSpec s;
    s.kind = KernelKind::Gaussian;
    s.gamma = gamma;
    s.normalize = n;
    return s;
  }

  static KernelSpec single_feature(int index, Normalization n = Normalization::None) {
    if (index < 0) throw InvalidArgument("KernelSpec::single_feature: index must be nonnegative");
    KernelSpec s;
    s.kind = KernelKind::SingleFeatureLinear;
    s.feature_index = index;
    s.normalize = n;
    return s;
  }
};

inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                          const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  switch (spec.kind) {
    case KernelKind::Linear:
      return x.dot(z);
    case KernelKind::Polynomial:
      return std::pow(x.dot(z) + spec.offset, spec.degree);
    case KernelKind::Gaussian:
      return std::exp(-spec.gamma * (x - z).squaredNorm());
    case KernelKind::SingleFeatureLinear: {
      if (spec.feature_index >= x.size())
        throw InvalidArgument("kernel_eval: feature index out of range");
      return x(spec.feature_index) * z(spec.feature_index);
    }
  }
  throw InvalidArgument("kernel_eval: unknown kernel kind");
}

// Weights of a learned combination plus the family degree: 1 combines the
// base Grams linearly, 2 additionally squares the combined Gram entrywise.
struct CombinationParams {
  Vector mu;
  int degree = 1;
};

// Precomputed per-kernel Gram blocks for a fixed training set, and
// optionally the rectangular test-by-train blocks needed for prediction.
class BaseKernelBank {
 public:
  BaseKernelBank(std::vector<KernelSpec> specs, std::vector<SymMatrix> train_grams,
                 std::optional<std::vector<Matrix>> cross_grams = std::nullopt)
      : specs_(std::move(specs)), train_(std::move(train_grams)), cross_(std::move(cross_grams)) {
    if (specs_.empty() || train_.size() != specs_.size())
      throw DimensionMismatch("BaseKernelBank: need one train Gram per kernel spec");
    const Eigen::Index m = train_.front().dim();
    for (const auto& g : train_)
      if (g.dim() != m) throw DimensionMismatch("BaseKernelBank: train Gram sizes differ");
    if (cross_) {
      if (cross_->size() != specs_.size())
        throw DimensionMismatch("BaseKernelBank: need one cross Gram per kernel spec");
      const Eigen::Index t = cross_->front().rows();
      for (const auto& c : *cross_)
        if (c.rows() != t || c.cols() != m)
          throw DimensionMismatch("BaseKernelBank: cross Gram shapes differ");
    }
  }

  int p() const { return static_cast<int>(specs_.size()); }
  Eigen::Index m() const { return train_.front().dim(); }
  bool has_cross() const { return cross_.has_value(); }
  Eigen::Index test_rows() const { return has_cross() ? (*cross_).front().rows() : 0; }

  const std::vector<KernelSpec>& specs() const { return specs_; }
  const SymMatrix& train_gram(int k) const { return train_.at(k); }

  const Matrix& cross_gram(int k) const {
    if (!cross_) throw MissingCrossGrams("BaseKernelBank: bank was built without test rows");
    return cross_->at(k);
  }

 private:
  std::vector<KernelSpec> specs_;
  std::vector<SymMatrix> train_;
  std::optional<std::vector<Matrix>> cross_;
};

namespace detail {

inline void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw NonFiniteFeature(std::string(what) + ": non-finite feature value");
}

inline SymMatrix train_gram(const KernelSpec& spec, const Matrix& x) {
  const Eigen::Index m = x.rows();
  SymMatrix g(m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) g.set(i, j, kernel_eval(spec, x.row(i), x.row(j)));
  return g;
}

}  // namespace detail

// Builds the per-kernel Gram blocks for `x_train`, validating each train
// block for positive semidefiniteness (eigenvalue floor -1e-8). With
// UnitDiagonal the block is rescaled to cosine form K_ij / sqrt(K_ii K_jj);
// cross blocks reuse the train diagonal together with each test point's
// self-kernel value, so prediction never touches test-test entries.
inline BaseKernelBank build_bank(const std::vector<KernelSpec>& specs, const Matrix& x_train,
                                 const Matrix* x_test = nullptr) {
  if (specs.empty()) throw InvalidArgument("build_bank: at least one kernel spec required");
  if (x_train.rows() < 1) throw EmptyDataset("build_bank: training set is empty");
  detail::require_finite(x_train, "build_bank(train)");
  if (x_test) {
    detail::require_finite(*x_test, "build_bank(test)");
    if (x_test->cols() != x_train.cols())
      throw DimensionMismatch("build_bank: test feature count differs from train");
  }

  const Eigen::Index m = x_train.rows();
  std::vector<SymMatrix> train;
  train.reserve(specs.size());
  std::optional<std::vector<Matrix>> cross;
  if (x_test) cross.emplace();

  for (const KernelSpec& spec : specs) {
    SymMatrix g = detail::train_gram(spec, x_train);

    Vector inv_sqrt_diag;
    if (spec.normalize == Normalization::UnitDiagonal) {
      inv_sqrt_diag.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d = g(i, i);
        if (!(d > 1e-12))
          throw DegenerateKernel("build_bank: diagonal entry too small for unit-diagonal scaling");
        inv_sqrt_diag(i) = 1.0 / std::sqrt(d);
      }
      SymMatrix scaled(m);
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i; j < m; ++j)
          scaled.set(i, j, g(i, j) * inv_sqrt_diag(i) * inv_sqrt_diag(j));
      g = std::move(scaled);
    }

    if (extremal_eigs(g).min < -1e-8)
      throw DegenerateKernel("build_bank: train Gram has a negative eigenvalue beyond tolerance");

    if (x_test) {
      const Eigen::Index t = x_test->rows();
      Matrix c(t, m);
      for (Eigen::Index r = 0; r < t; ++r)
        for (Eigen::Index j = 0; j < m; ++j)
          c(r, j) = kernel_eval(spec, x_test->row(r), x_train.row(j));
      if (spec.normalize == Normalization::UnitDiagonal) {
        for (Eigen::Index r = 0; r < t; ++r) {
          const double self = kernel_eval(spec, x_test->row(r), x_test->row(r));
          if (!(self > 1e-12))
            throw DegenerateKernel("build_bank: test self-kernel too small for unit-diagonal scaling");
          const double s = 1.0 / std::sqrt(self);
          for (Eigen::Index j = 0; j < m; ++j) c(r, j) *= s * inv_sqrt_diag(j);
        }
      }
      cross->push_back(std::move(c));
    }

    train.push_back(std::move(g));
  }

  return BaseKernelBank(specs, std::move(train), std::move(cross));
}

namespace detail {

inline void check_params(const BaseKernelBank& bank, const CombinationParams& params) {
  if (params.mu.size() != bank.p())
    throw DimensionMismatch("combined_gram: weight count does not match bank size");
  if (params.degree != 1 && params.degree != 2)
    throw InvalidArgument("combined_gram: degree must be 1 or 2");
}

}  // namespace detail

// Weighted train Gram: sum_k mu_k K_k, entrywise squared when degree = 2.
inline SymMatrix combined_gram(const BaseKernelBank& bank, const CombinationParams& params) {
  detail::check_params(bank, params);
  Matrix acc = Matrix::Zero(bank.m(), bank.m());
  for (int k = 0; k < bank.p(); ++k) acc += params.mu(k) * bank.train_gram(k).dense();
  if (params.degree == 2) acc = acc.cwiseProduct(acc);
  return SymMatrix::from_symmetric(std::move(acc));
}

// Weighted test-by-train Gram under the same combination rule.
inline Matrix combined_cross_gram(const BaseKernelBank& bank, const CombinationParams& params) {
  detail::check_params(bank, params);
  if (!bank.has_cross()) throw MissingCrossGrams("combined_cross_gram: bank was built without test rows");
  Matrix acc = Matrix::Zero(bank.test_rows(), bank.m());
  for (int k = 0; k < bank.p(); ++k) acc += params.mu(k) * bank.cross_gram(k);
  if (params.degree == 2) acc = acc.cwiseProduct(acc);
  return acc;
}

// Default bank: Gaussian bandwidth ladder gamma = 2^-3 ... 2^3 with
// unit-diagonal scaling. Meant for standardized features.
inline std::vector<KernelSpec> default_gaussian_specs() {
  std::vector<KernelSpec> specs;
  for (int e = -3; e <= 3; ++e)
    specs.push_back(KernelSpec::gaussian(std::ldexp(1.0, e), Normalization::UnitDiagonal));
  return specs;
}

}  // namespace mklforge
