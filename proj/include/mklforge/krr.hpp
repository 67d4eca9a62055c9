#pragma once

#include <cmath>

#include "mklforge/kernels.hpp"
#include "mklforge/linalg.hpp"

// Kernel ridge regression over a weighted kernel combination, together
// with the derivatives of the regularized objective
//
//   F(mu) = y' (K(mu) + lambda I)^-1 y + beta ||mu||^2
//
// with respect to the combination weights. K(mu) is the degree-1 or
// degree-2 combined Gram. All derivative formulas below are validated
// against central finite differences in the test suite; where printed
// references disagree with the finite-difference check, the code keeps
// the constant that differentiation and the check agree on.

namespace mklforge {

struct KrrModel {
  Vector alpha;
  double lambda = 1.0;
  CombinationParams params;
};

namespace detail {

inline void check_fit_inputs(const BaseKernelBank& bank, const Vector& y, double lambda) {
  if (y.size() != bank.m()) throw DimensionMismatch("krr: label length does not match bank rows");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("krr: lambda must be positive and finite");
}

}  // namespace detail

// alpha = (K(mu) + lambda I)^-1 y.
inline KrrModel krr_fit(const BaseKernelBank& bank, const CombinationParams& params, double lambda,
                        const Vector& y) {
  detail::check_fit_inputs(bank, y, lambda);
  const SymMatrix k = combined_gram(bank, params);
  return KrrModel{spd_solve(k, lambda, y), lambda, params};
}

inline Vector krr_predict(const KrrModel& model, const BaseKernelBank& bank) {
  if (model.alpha.size() != bank.m())
    throw DimensionMismatch("krr_predict: model size does not match bank rows");
  return combined_cross_gram(bank, model.params) * model.alpha;
}

// F(mu) as above. The quadratic term equals y' alpha at the fitted alpha.
inline double krr_objective(const BaseKernelBank& bank, const CombinationParams& params,
                            double lambda, const Vector& y, double beta = 0.0) {
  detail::check_fit_inputs(bank, y, lambda);
  const Vector alpha = spd_solve(combined_gram(bank, params), lambda, y);
  return y.dot(alpha) + beta * params.mu.squaredNorm();
}

namespace detail {

// Contraction sum_{s,t} K_k[s,t] * W[s,t] for every kernel in the bank.
inline Vector contract_with_bank(const BaseKernelBank& bank, const Matrix& w) {
  Vector out(bank.p());
  for (int k = 0; k < bank.p(); ++k) out(k) = bank.train_gram(k).dense().cwiseProduct(w).sum();
  return out;
}

inline Matrix weighted_linear_gram(const BaseKernelBank& bank, const Vector& mu) {
  Matrix acc = Matrix::Zero(bank.m(), bank.m());
  for (int k = 0; k < bank.p(); ++k) acc += mu(k) * bank.train_gram(k).dense();
  return acc;
}

}  // namespace detail

// Gradient of F. Degree 1: dF/dmu_k = -alpha' K_k alpha + 2 beta mu_k.
// Degree 2: dF/dmu_k = -2 alpha' (K_mu o K_k) alpha + 2 beta mu_k, where
// o is the entrywise product and K_mu the degree-1 combination.
inline Vector krr_gradient(const BaseKernelBank& bank, const CombinationParams& params,
                           double lambda, const Vector& y, double beta = 0.0) {
  detail::check_fit_inputs(bank, y, lambda);
  const SymMatrix gram = combined_gram(bank, params);
  const Vector alpha = spd_solve(gram, lambda, y);
  Vector grad(bank.p());
  if (params.degree == 1) {
    const Matrix w = alpha * alpha.transpose();
    grad = -detail::contract_with_bank(bank, w);
  } else {
    const Matrix kmu = detail::weighted_linear_gram(bank, params.mu);
    const Matrix w = kmu.cwiseProduct(alpha * alpha.transpose());
    grad = -2.0 * detail::contract_with_bank(bank, w);
  }
  grad += 2.0 * beta * params.mu;
  return grad;
}

// Hessian of F applied to a direction d.
// Degree 1: (H d)_j = 2 alpha' K_j (K_mu + lambda I)^-1 K_d alpha + 2 beta d_j.
// Degree 2, with U_k = K_mu o K_k and G = K_mu o K_mu:
//   (H d)_j = 8 alpha' U_j (G + lambda I)^-1 U_d alpha
//             - 2 alpha' (K_j o K_d) alpha + 2 beta d_j.
inline Vector krr_hessian_vector_product(const BaseKernelBank& bank, const CombinationParams& params,
                                         double lambda, const Vector& y, double beta,
                                         const Vector& direction) {
  detail::check_fit_inputs(bank, y, lambda);
  if (direction.size() != bank.p())
    throw DimensionMismatch("krr_hessian_vector_product: direction length does not match bank size");

  const SymMatrix gram = combined_gram(bank, params);
  const Vector alpha = spd_solve(gram, lambda, y);
  const Matrix kd = detail::weighted_linear_gram(bank, direction);

  Vector out(bank.p());
  if (params.degree == 1) {
    const Vector w = spd_solve(gram, lambda, kd * alpha);
    out = 2.0 * detail::contract_with_bank(bank, alpha * w.transpose());
  } else {
    const Matrix kmu = detail::weighted_linear_gram(bank, params.mu);
    const Matrix ud = kmu.cwiseProduct(kd);
    const Vector w = spd_solve(gram, lambda, ud * alpha);
    const Matrix aw = kmu.cwiseProduct(alpha * w.transpose());
    const Matrix aa = kd.cwiseProduct(alpha * alpha.transpose());
    out = 8.0 * detail::contract_with_bank(bank, aw) - 2.0 * detail::contract_with_bank(bank, aa);
  }
  out += 2.0 * beta * direction;
  return out;
}

// u' (Hessian F) u for a unit direction u.
inline double krr_hessian_quadratic_form(const BaseKernelBank& bank, const CombinationParams& params,
                                         double lambda, const Vector& y, double beta,
                                         const Vector& unit_direction) {
  if (std::abs(unit_direction.norm() - 1.0) > 1e-10)
    throw InvalidArgument("krr_hessian_quadratic_form: direction must have unit norm");
  return unit_direction.dot(
      krr_hessian_vector_product(bank, params, lambda, y, beta, unit_direction));
}

}  // namespace mklforge
