#pragma once

// Independent oracles the solver implementations are checked against:
// finite differences, dense grid minimization, scalar bisection, and an
// exhaustive active-set quadratic-program solver. These deliberately use
// the dumbest correct method available.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mklforge/krr.hpp"
#include "mklforge/linalg.hpp"

namespace testsupport {

using mklforge::Matrix;
using mklforge::Vector;

// Central finite-difference gradient with per-coordinate step
// h_k = scale * (1 + |mu_k|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& mu,
                          double scale = 1e-5) {
  Vector g(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    const double h = scale * (1.0 + std::abs(mu(k)));
    Vector hi = mu, lo = mu;
    hi(k) += h;
    lo(k) -= h;
    g(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Second directional difference (f(mu+hu) - 2 f(mu) + f(mu-hu)) / h^2.
inline double fd_second_directional(const std::function<double(const Vector&)>& f, const Vector& mu,
                                    const Vector& u, double scale = 1e-4) {
  const double h = scale * (1.0 + mu.cwiseAbs().maxCoeff());
  return (f(mu + h * u) - 2.0 * f(mu) + f(mu - h * u)) / (h * h);
}

// Minimum of f over an axis-aligned 2-D grid restricted by a feasibility
// predicate. Returns +inf if no grid point is feasible.
inline double grid_min_2d(const std::function<double(const Vector&)>& f,
                          const std::function<bool(const Vector&)>& feasible, double lo0, double hi0,
                          double lo1, double hi1, int steps = 101) {
  double best = std::numeric_limits<double>::infinity();
  Vector mu(2);
  for (int i = 0; i < steps; ++i) {
    mu(0) = lo0 + (hi0 - lo0) * static_cast<double>(i) / (steps - 1);
    for (int j = 0; j < steps; ++j) {
      mu(1) = lo1 + (hi1 - lo1) * static_cast<double>(j) / (steps - 1);
      if (!feasible(mu)) continue;
      best = std::min(best, f(mu));
    }
  }
  return best;
}

// Root of g on [lo, hi] by bisection; g(lo) and g(hi) must bracket it.
inline double bisect(const std::function<double(double)>& g, double lo, double hi,
                     double tol = 1e-12) {
  double flo = g(lo);
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = g(mid);
    if ((flo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Exhaustive reference solver for
//   max 2 <a, 1> - a' (G + lambda I) a   s.t.  a >= 0, <a, y> = 0.
// Every support set S is tried: the equality-constrained stationary point
// on S is computed from its KKT system and kept when it is feasible. The
// best feasible candidate over all 2^m sets is the exact optimum. Only
// usable for tiny m.
struct BruteQpResult {
  Vector alpha;
  double value = 0.0;
};

inline BruteQpResult brute_force_box_qp(const Matrix& a_sys, const Vector& y) {
  const int m = static_cast<int>(y.size());
  BruteQpResult best;
  best.alpha = Vector::Zero(m);
  best.value = 0.0;  // alpha = 0 is always feasible with value 0

  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int s = static_cast<int>(idx.size());

    // Stationarity on the support: 2 A_S a_S - b y_S = 2, <a_S, y_S> = 0.
    Matrix kkt(s + 1, s + 1);
    Vector rhs(s + 1);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) kkt(r, c) = 2.0 * a_sys(idx[r], idx[c]);
      kkt(r, s) = -y(idx[r]);
      kkt(s, r) = y(idx[r]);
      rhs(r) = 2.0;
    }
    kkt(s, s) = 0.0;
    rhs(s) = 0.0;

    const Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);

    bool feasible = true;
    for (int r = 0; r < s; ++r)
      if (sol(r) < -1e-12) {
        feasible = false;
        break;
      }
    if (!feasible) continue;

    Vector alpha = Vector::Zero(m);
    for (int r = 0; r < s; ++r) alpha(idx[r]) = std::max(0.0, sol(r));
    const double value = 2.0 * alpha.sum() - alpha.dot(a_sys * alpha);
    if (value > best.value) {
      best.value = value;
      best.alpha = alpha;
    }
  }
  return best;
}

// Convenience wrapper: the regularized combination objective as a plain
// function of the weights.
inline std::function<double(const Vector&)> objective_fn(const mklforge::BaseKernelBank& bank,
                                                         int degree, double lambda, const Vector& y,
                                                         double beta) {
  return [&bank, degree, lambda, y, beta](const Vector& mu) {
    return mklforge::krr_objective(bank, {mu, degree}, lambda, y, beta);
  };
}

}  // namespace testsupport
