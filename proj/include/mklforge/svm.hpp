#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "mklforge/kernels.hpp"
#include "mklforge/linalg.hpp"
#include "mklforge/mkl.hpp"

// Two-norm soft-margin SVM in dual form,
//
//   max  2 <alpha, 1> - alpha' (G + lambda I) alpha
//   s.t. alpha >= 0,  <alpha, y> = 0,
//
// with G = diag(y) K diag(y). The ridge shift lambda plays the role of the
// squared-slack penalty, so the dual has no upper box on alpha. Because the
// feasible set in v = diag(y) alpha is a subset of the unconstrained ridge
// dual's, y'(K + lambda I)^-1 y upper-bounds the optimal value; see
// relaxation_gap.

namespace mklforge {

struct SvmConfig {
  double kkt_tol = 1e-6;
  int max_pair_updates = 10000;
};

struct SvmDualSolution {
  Vector alpha;
  double bias = 0.0;
  double objective_value = 0.0;
  // Largest remaining violation of the pairwise optimality condition.
  double kkt_residual = 0.0;
  bool converged = false;
};

namespace detail {

inline void check_labels(const Vector& y) {
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0)
      pos = true;
    else if (y(i) == -1.0)
      neg = true;
    else
      throw InvalidArgument("svm: labels must be exactly +1 or -1");
  }
  if (!pos || !neg) throw SingleClass("svm: both classes must be present");
}

}  // namespace detail

// Pairwise coordinate ascent: pick the pair most violating the optimality
// condition, solve its one-dimensional subproblem in closed form, repeat.
// Moving along y_i e_i - y_j e_j preserves <alpha, y> = 0 exactly, and the
// only clamp needed is alpha >= 0. On hitting the update cap the best
// iterate so far is returned with converged = false and the residual gap.
inline SvmDualSolution svm_dual_solve(const SymMatrix& k, const Vector& y, double lambda,
                                      const SvmConfig& cfg = {}) {
  if (y.size() != k.dim())
    throw DimensionMismatch("svm_dual_solve: label length does not match Gram size");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("svm_dual_solve: lambda must be positive and finite");
  detail::check_labels(y);

  const Eigen::Index m = k.dim();
  // A = G + lambda I with G = Y K Y.
  Matrix a_sys(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a_sys(i, j) = y(i) * k(i, j) * y(j);
  a_sys.diagonal().array() += lambda;

  Vector alpha = Vector::Zero(m);
  Vector a_alpha = Vector::Zero(m);  // A alpha, maintained incrementally

  // score_i = y_i dL/dalpha_i; optimality is max over raisable = min over
  // lowerable, where alpha_i can always move up (down) if y_i > 0 (< 0) and
  // either way while alpha_i > 0.
  const auto score = [&](Eigen::Index i) { return y(i) * 2.0 * (1.0 - a_alpha(i)); };

  double gap = std::numeric_limits<double>::infinity();
  for (int updates = 0; updates < cfg.max_pair_updates; ++updates) {
    Eigen::Index bi = -1, bj = -1;
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = score(i);
      if ((y(i) > 0.0 || alpha(i) > 0.0) && s > hi) {
        hi = s;
        bi = i;
      }
      if ((y(i) < 0.0 || alpha(i) > 0.0) && s < lo) {
        lo = s;
        bj = i;
      }
    }
    gap = hi - lo;
    if (bi < 0 || bj < 0 || bi == bj || gap <= cfg.kkt_tol) break;

    // Maximize along u = y_i e_i - y_j e_j: step gap / (2 u'Au), clamped so
    // neither coordinate goes negative.
    const double curvature = a_sys(bi, bi) + a_sys(bj, bj) - 2.0 * y(bi) * y(bj) * a_sys(bi, bj);
    double t = gap / (2.0 * curvature);
    if (y(bi) < 0.0) t = std::min(t, alpha(bi));
    if (y(bj) > 0.0) t = std::min(t, alpha(bj));
    if (!(t > 0.0)) break;

    alpha(bi) += y(bi) * t;
    alpha(bj) -= y(bj) * t;
    a_alpha += t * (y(bi) * a_sys.col(bi) - y(bj) * a_sys.col(bj));
  }

  SvmDualSolution sol;
  sol.alpha = alpha;
  sol.kkt_residual = std::max(0.0, gap);
  sol.converged = (sol.kkt_residual <= cfg.kkt_tol);
  sol.objective_value = 2.0 * alpha.sum() - alpha.dot(a_alpha);

  // Margin condition of the support vectors:
  // b = y_i - sum_j alpha_j y_j K_ij - lambda alpha_i y_i = y_i (1 - (A alpha)_i),
  // averaged over alpha_i > 0 for stability.
  double bias_sum = 0.0;
  int sv_count = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (alpha(i) > 1e-9) {
      bias_sum += y(i) * (1.0 - a_alpha(i));
      ++sv_count;
    }
  }
  sol.bias = sv_count > 0 ? bias_sum / sv_count : 0.0;
  return sol;
}

// Weight learning driven by full SVM dual solves: each round solves the
// dual at the current combined Gram, then steps the weights against
// g_k = -alpha' (dK/dmu_k) alpha and projects back onto the sphere. Steps
// that would raise the recorded dual value are rejected with the same
// permanent eta backoff as the ridge driver, so the trace is
// non-increasing. max_iter counts dual solves: max_iter = 1 performs the
// entry solve only and returns the projected start unchanged. An explicit
// mu_init is projected onto the region at entry; the default start (all
// ones) is only validated, since it typically sits at the sphere's center.
inline SolveResult svm_gmkl(const BaseKernelBank& bank, const Vector& y, double lambda,
                            const FeasibleRegion& region,
                            SolverConfig cfg = SolverConfig::pgd_defaults(), int degree = 1,
                            const SvmConfig& svm_cfg = {}) {
  validate_region(region);
  validate_solver_config(cfg);
  if (region.mu0.size() != bank.p())
    throw DimensionMismatch("svm_gmkl: region dimension does not match bank size");
  if (degree != 1 && degree != 2) throw InvalidArgument("svm_gmkl: degree must be 1 or 2");
  detail::check_labels(y);

  const auto solve_at = [&](const Vector& mu) {
    return svm_dual_solve(combined_gram(bank, {mu, degree}), y, lambda, svm_cfg);
  };
  const auto grad = [&](const Vector& mu, const Vector& alpha) {
    if (degree == 1) return Vector(-detail::contract_with_bank(bank, alpha * alpha.transpose()));
    const Matrix kmu = detail::weighted_linear_gram(bank, mu);
    const Matrix w = kmu.cwiseProduct(alpha * alpha.transpose());
    return Vector(-2.0 * detail::contract_with_bank(bank, w));
  };

  Vector mu;
  if (cfg.mu_init) {
    mu = project_onto_region(*cfg.mu_init, region);
  } else {
    mu = detail::default_start(region);
    detail::check_start(mu, region);
  }

  SolveResult res;
  SvmDualSolution sol = solve_at(mu);
  double f = sol.objective_value;
  res.objective_trace.push_back(f);

  double eta = cfg.eta;
  SolveStatus status = SolveStatus::MaxIter;
  for (int iter = 1; iter < cfg.max_iter; ++iter) {
    const Vector g = grad(mu, sol.alpha);

    bool accepted = false;
    Vector cand;
    SvmDualSolution cand_sol;
    for (int bt = 0; bt < detail::kMaxBacktracks; ++bt) {
      cand = project_onto_region(mu - eta * g, region);
      cand_sol = solve_at(cand);
      if (std::isfinite(cand_sol.objective_value) &&
          cand_sol.objective_value <= f + 1e-12 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
      eta *= cfg.backoff;
    }
    if (!accepted) {
      status = SolveStatus::Converged;
      break;
    }

    const double step = (cand - mu).norm();
    mu = cand;
    sol = std::move(cand_sol);
    f = sol.objective_value;
    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, mu.norm(), eta});
    res.iterations = iter;
    if (step < cfg.eps) {
      status = SolveStatus::Converged;
      break;
    }
  }

  res.mu_star = mu;
  res.alpha_star = sol.alpha;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

struct RelaxationGap {
  double svm_value = 0.0;
  double krr_bound = 0.0;
  double gap = 0.0;  // krr_bound - svm_value; nonnegative up to solver tolerance
};

// Dropping the sign and balance constraints from the dual leaves the ridge
// dual, whose maximum is y'(K + lambda I)^-1 y; the difference measures how
// binding the constraints are.
inline RelaxationGap relaxation_gap(const SymMatrix& k, const Vector& y, double lambda,
                                    const SvmConfig& cfg = {}) {
  RelaxationGap out;
  out.svm_value = svm_dual_solve(k, y, lambda, cfg).objective_value;
  out.krr_bound = y.dot(spd_solve(k, lambda, y));
  out.gap = out.krr_bound - out.svm_value;
  return out;
}

// Decision values sum_j alpha_j y_j K(x_t, x_j) + b over the bank's test
// rows.
inline Vector svm_decision_values(const SvmDualSolution& sol, const BaseKernelBank& bank,
                                  const CombinationParams& params, const Vector& y_train) {
  if (sol.alpha.size() != bank.m() || y_train.size() != bank.m())
    throw DimensionMismatch("svm_decision_values: solution size does not match bank rows");
  const Matrix cross = combined_cross_gram(bank, params);
  return (cross * sol.alpha.cwiseProduct(y_train)).array() + sol.bias;
}

// Predicted labels: sign of the decision value, with sign(0) = +1.
inline Vector svm_predict(const SvmDualSolution& sol, const BaseKernelBank& bank,
                          const CombinationParams& params, const Vector& y_train) {
  const Vector dec = svm_decision_values(sol, bank, params, y_train);
  Vector labels(dec.size());
  for (Eigen::Index i = 0; i < dec.size(); ++i) labels(i) = dec(i) >= 0.0 ? 1.0 : -1.0;
  return labels;
}

}  // namespace mklforge
