#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "mklforge/krr.hpp"

// Learners for the combination weights mu. All of them minimize
//
//   F(mu) = y' (K(mu) + lambda I)^-1 y + r(mu)
//
// either over the shifted sphere M = { mu >= 0 : ||mu - mu0||_q = Lambda }
// (projected gradient and fixed-point interpolation) or over the
// nonnegative orthant with a ridge penalty r(mu) = beta ||mu||^2.

namespace mklforge {

// Norm-ball constraint ||mu - mu0||_q <= Lambda intersected with mu >= 0.
// Solvers keep iterates on the boundary sphere.
struct FeasibleRegion {
  Vector mu0;
  double Lambda = 1.0;
  int q = 2;
};

inline void validate_region(const FeasibleRegion& region) {
  if (region.q != 1 && region.q != 2) throw InvalidArgument("FeasibleRegion: q must be 1 or 2");
  if (!(region.Lambda > 0.0) || !std::isfinite(region.Lambda))
    throw InvalidArgument("FeasibleRegion: Lambda must be positive and finite");
  if (region.mu0.size() < 1) throw InvalidArgument("FeasibleRegion: mu0 must be nonempty");
  for (Eigen::Index k = 0; k < region.mu0.size(); ++k)
    if (!(region.mu0(k) >= 0.0)) throw InvalidArgument("FeasibleRegion: mu0 must be nonnegative");
}

inline double offset_norm(const Vector& v, int q) {
  return q == 1 ? v.lpNorm<1>() : v.norm();
}

// Clips negatives, then rescales the offset from mu0 onto the radius-Lambda
// sphere. The rescale itself can push entries negative (the step directions
// used by the solvers only ever produce tiny such violations), so the
// clip/rescale pair is repeated until both constraints hold together; for
// tiny violations one extra pass reaches the joint fixed point, which is
// what makes the projection idempotent.
inline Vector project_onto_region(const Vector& mu, const FeasibleRegion& region) {
  validate_region(region);
  if (mu.size() != region.mu0.size())
    throw DimensionMismatch("project_onto_region: weight length does not match mu0");
  Vector out = mu;
  for (int pass = 0; pass < 100; ++pass) {
    const Vector clipped = out.cwiseMax(0.0);
    const Vector dir = clipped - region.mu0;
    const double n = offset_norm(dir, region.q);
    if (n <= 1e-14)
      throw DegenerateDirection("project_onto_region: direction from mu0 has zero length");
    out = region.mu0 + (region.Lambda / n) * dir;
    if (out.minCoeff() >= -1e-15) break;
  }
  return out.cwiseMax(0.0);
}

enum class SolveStatus { Converged, MaxIter, Diverged };

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double mu_norm = 0.0;
  double eta = 0.0;
};

struct SolveResult {
  Vector mu_star;
  Vector alpha_star;
  std::vector<double> objective_trace;
  std::vector<IterationRecord> trace;
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxIter;
  // Consistency of the final iterate with its defining equation, where the
  // algorithm has one (fixed-point methods).
  double fixed_point_residual = 0.0;
};

struct SolverConfig {
  double eta = 1.0;
  double eps = 1e-6;
  int max_iter = 50;
  double backoff = 0.8;
  std::uint64_t seed = 0;
  // Optional explicit start; defaults are documented per solver.
  std::optional<Vector> mu_init;
  // Replays the sign-flipped ridge update of the quadratic orthant solver
  // (an ascent step on the objective). Diagnostic only.
  bool ridge_quadratic_flip_sign = false;

  static SolverConfig pgd_defaults() { return SolverConfig{}; }

  static SolverConfig iia_defaults() {
    SolverConfig c;
    c.eta = 0.5;
    return c;
  }
};

inline void validate_solver_config(const SolverConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw InvalidArgument("SolverConfig: eta must be positive");
  if (!(cfg.eps > 0.0)) throw InvalidArgument("SolverConfig: eps must be positive");
  if (cfg.max_iter < 1) throw InvalidArgument("SolverConfig: max_iter must be at least 1");
  if (!(cfg.backoff > 0.0 && cfg.backoff < 1.0))
    throw InvalidArgument("SolverConfig: backoff must lie in (0, 1)");
}

namespace detail {

constexpr double kDivergenceCap = 1e12;
constexpr int kMaxBacktracks = 60;

inline Vector default_start(const FeasibleRegion& region) {
  return Vector::Ones(region.mu0.size());
}

inline void check_start(const Vector& mu, const FeasibleRegion& region) {
  if (mu.size() != region.mu0.size())
    throw DimensionMismatch("solver: mu_init length does not match mu0");
  for (Eigen::Index k = 0; k < mu.size(); ++k)
    if (!(mu(k) >= 0.0)) throw InvalidArgument("solver: mu_init must be nonnegative");
  if (offset_norm(mu - region.mu0, region.q) > region.Lambda * (1.0 + 1e-9) + 1e-12)
    throw InvalidArgument("solver: mu_init lies outside the feasible region");
}

}  // namespace detail

using MklGradient = std::function<Vector(const Vector& mu, const Vector& alpha)>;

// Generic projected-gradient driver. Per iteration: fit alpha at the
// current weights, take a step against grad(mu, alpha), and project back
// onto the sphere. A step that would increase the recorded objective is
// rejected and retried with eta scaled by `backoff` (the reduction is
// permanent), which keeps the objective trace non-increasing. Stops when
// consecutive accepted iterates move less than eps.
inline SolveResult gmkl(const BaseKernelBank& bank, const Vector& y, double lambda,
                        const FeasibleRegion& region, int degree, const MklGradient& grad,
                        SolverConfig cfg, const std::function<double(const Vector&)>& penalty = {}) {
  validate_region(region);
  validate_solver_config(cfg);
  if (region.mu0.size() != bank.p())
    throw DimensionMismatch("gmkl: region dimension does not match bank size");

  Vector mu = cfg.mu_init ? *cfg.mu_init : detail::default_start(region);
  detail::check_start(mu, region);

  const auto value = [&](const Vector& m) {
    double v = krr_objective(bank, {m, degree}, lambda, y, 0.0);
    if (penalty) v += penalty(m);
    return v;
  };
  const auto fit = [&](const Vector& m) {
    return spd_solve(combined_gram(bank, {m, degree}), lambda, y);
  };

  SolveResult res;
  Vector alpha = fit(mu);
  double f = y.dot(alpha) + (penalty ? penalty(mu) : 0.0);
  res.objective_trace.push_back(f);
  if (!std::isfinite(f) || f > detail::kDivergenceCap) {
    res.mu_star = mu;
    res.alpha_star = alpha;
    res.status = SolveStatus::Diverged;
    return res;
  }

  double eta = cfg.eta;
  SolveStatus status = SolveStatus::MaxIter;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const Vector g = grad(mu, alpha);

    bool accepted = false;
    Vector cand;
    double f_cand = 0.0;
    for (int bt = 0; bt < detail::kMaxBacktracks; ++bt) {
      cand = project_onto_region(mu - eta * g, region);
      f_cand = value(cand);
      if (std::isfinite(f_cand) && f_cand <= f + 1e-12 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
      eta *= cfg.backoff;
    }
    if (!accepted) {
      // No descent left along this direction at any usable step size.
      status = SolveStatus::Converged;
      break;
    }

    const double step = (cand - mu).norm();
    mu = cand;
    alpha = fit(mu);
    f = f_cand;
    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, mu.norm(), eta});
    res.iterations = iter;
    if (step < cfg.eps) {
      status = SolveStatus::Converged;
      break;
    }
  }

  res.mu_star = mu;
  res.alpha_star = alpha;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

// Linear-family projected ascent on the dual value: the descent direction
// of F has components -alpha' K_k alpha.
inline SolveResult pgd_linear(const BaseKernelBank& bank, const Vector& y, double lambda,
                              const FeasibleRegion& region, SolverConfig cfg = SolverConfig::pgd_defaults()) {
  const auto grad = [&bank](const Vector&, const Vector& alpha) {
    return Vector(-detail::contract_with_bank(bank, alpha * alpha.transpose()));
  };
  return gmkl(bank, y, lambda, region, 1, grad, std::move(cfg));
}

// Quadratic-family variant: descent components -2 alpha' (K_mu o K_k) alpha.
inline SolveResult pgd_quadratic(const BaseKernelBank& bank, const Vector& y, double lambda,
                                 const FeasibleRegion& region,
                                 SolverConfig cfg = SolverConfig::pgd_defaults()) {
  const auto grad = [&bank](const Vector& mu, const Vector& alpha) {
    const Matrix kmu = detail::weighted_linear_gram(bank, mu);
    const Matrix w = kmu.cwiseProduct(alpha * alpha.transpose());
    return Vector(-2.0 * detail::contract_with_bank(bank, w));
  };
  return gmkl(bank, y, lambda, region, 2, grad, std::move(cfg));
}

namespace detail {

// Tightens a pair near the interpolation fixed point. The undamped map
// alpha -> ridge(mu(alpha)) typically oscillates (that is why the solvers
// interpolate), so the extra sweeps keep the same damping and only the
// final sweep is exact: alpha from the ridge system, then mu from alpha.
// Ending on the mu update makes the returned pair satisfy the weight map
// exactly, and the reported residual measures the remaining ridge
// inconsistency.
struct FixedPointMaps {
  std::function<Vector(const Vector& mu)> alpha_at;
  std::function<Vector(const Vector& alpha)> mu_at;
};

inline double polish_fixed_point(Vector& mu, Vector& alpha, const FixedPointMaps& maps, double eta,
                                 int max_sweeps = 400, double tol = 1e-13) {
  Vector a = alpha;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector ridge = maps.alpha_at(mu);
    const Vector a_next = eta * a + (1.0 - eta) * ridge;
    const double move = (a_next - a).norm();
    a = a_next;
    mu = maps.mu_at(a);
    if (move <= tol * (1.0 + a.norm())) break;
  }
  alpha = maps.alpha_at(mu);
  mu = maps.mu_at(alpha);
  return (maps.alpha_at(mu) - alpha).norm();
}

}  // namespace detail

// Interpolated fixed-point iteration for the linear family on the sphere
// (q = 2): mu is the sphere point aligned with v_k = alpha' K_k alpha and
// alpha is relaxed toward the ridge solution with weight eta (default 1/2).
// Stops when consecutive alpha iterates move less than eps.
inline SolveResult iia(const BaseKernelBank& bank, const Vector& y, double lambda,
                       const FeasibleRegion& region, SolverConfig cfg = SolverConfig::iia_defaults()) {
  validate_region(region);
  validate_solver_config(cfg);
  if (region.q != 2) throw InvalidArgument("iia: requires a q = 2 region");
  if (region.mu0.size() != bank.p())
    throw DimensionMismatch("iia: region dimension does not match bank size");
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0))
    throw InvalidArgument("iia: interpolation weight must lie in (0, 1)");

  const auto alpha_at = [&](const Vector& mu) {
    return spd_solve(combined_gram(bank, {mu, 1}), lambda, y);
  };
  const auto mu_at = [&](const Vector& alpha) {
    const Vector v = detail::contract_with_bank(bank, alpha * alpha.transpose());
    const double n = v.norm();
    if (n <= 1e-14) throw DegenerateDirection("iia: alignment direction has zero length");
    return Vector(region.mu0 + (region.Lambda / n) * v);
  };

  Vector mu = cfg.mu_init ? *cfg.mu_init : detail::default_start(region);
  detail::check_start(mu, region);

  SolveResult res;
  Vector alpha_next = alpha_at(mu);
  res.objective_trace.push_back(y.dot(alpha_next));
  Vector alpha = alpha_next;

  SolveStatus status = SolveStatus::MaxIter;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    alpha = alpha_next;
    mu = mu_at(alpha);
    const Vector ridge = alpha_at(mu);
    alpha_next = cfg.eta * alpha + (1.0 - cfg.eta) * ridge;

    const double f = y.dot(ridge);
    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, mu.norm(), cfg.eta});
    res.iterations = iter;
    if (!std::isfinite(f) || std::abs(f) > detail::kDivergenceCap) {
      status = SolveStatus::Diverged;
      break;
    }
    if ((alpha_next - alpha).norm() < cfg.eps) {
      status = SolveStatus::Converged;
      break;
    }
  }

  if (status != SolveStatus::Diverged) {
    // Tighten the pair to the undamped fixed point so the returned iterate
    // meets the stationarity and ridge-consistency contracts directly.
    res.fixed_point_residual = detail::polish_fixed_point(mu, alpha, {alpha_at, mu_at}, cfg.eta);
  }
  res.mu_star = mu;
  res.alpha_star = alpha;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

// Ridge-penalized fixed point over the orthant for the linear family:
// minimizes y'(K_mu + lambda I)^-1 y + beta ||mu||^2, whose stationary
// points satisfy mu_k = alpha' K_k alpha / (2 beta). Same interpolation
// and stopping rule as iia.
inline SolveResult riia(const BaseKernelBank& bank, const Vector& y, double lambda, double beta,
                        SolverConfig cfg = SolverConfig::iia_defaults()) {
  validate_solver_config(cfg);
  if (!(beta > 0.0)) throw InvalidArgument("riia: beta must be positive");
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0))
    throw InvalidArgument("riia: interpolation weight must lie in (0, 1)");

  const auto alpha_at = [&](const Vector& mu) {
    return spd_solve(combined_gram(bank, {mu, 1}), lambda, y);
  };
  const auto mu_at = [&](const Vector& alpha) {
    const Vector v = detail::contract_with_bank(bank, alpha * alpha.transpose());
    return Vector(v / (2.0 * beta));
  };
  const auto value = [&](const Vector& mu) {
    return krr_objective(bank, {mu, 1}, lambda, y, beta);
  };

  Vector mu = cfg.mu_init ? *cfg.mu_init : Vector::Ones(bank.p());
  if (mu.size() != bank.p()) throw DimensionMismatch("riia: mu_init length does not match bank size");

  SolveResult res;
  Vector alpha_next = alpha_at(mu);
  res.objective_trace.push_back(value(mu));
  Vector alpha = alpha_next;

  SolveStatus status = SolveStatus::MaxIter;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    alpha = alpha_next;
    mu = mu_at(alpha);
    const Vector ridge = alpha_at(mu);
    alpha_next = cfg.eta * alpha + (1.0 - cfg.eta) * ridge;

    const double f = value(mu);
    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, mu.norm(), cfg.eta});
    res.iterations = iter;
    if (!std::isfinite(f) || std::abs(f) > detail::kDivergenceCap) {
      status = SolveStatus::Diverged;
      break;
    }
    if ((alpha_next - alpha).norm() < cfg.eps) {
      status = SolveStatus::Converged;
      break;
    }
  }

  if (status != SolveStatus::Diverged) {
    res.fixed_point_residual = detail::polish_fixed_point(mu, alpha, {alpha_at, mu_at}, cfg.eta);
  }
  res.mu_star = mu;
  res.alpha_star = alpha;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

// Ridge-penalized projected descent over the orthant for the quadratic
// family: steps against 2 beta mu_k - 2 alpha' (K_mu o K_k) alpha and clips
// at zero. Converged when the projected gradient (components pointing out
// of the orthant at active bounds are zeroed) has norm at most 1e-4.
inline SolveResult rpgd_quadratic(const BaseKernelBank& bank, const Vector& y, double lambda,
                                  double beta, SolverConfig cfg = SolverConfig::pgd_defaults()) {
  validate_solver_config(cfg);
  if (!(beta > 0.0)) throw InvalidArgument("rpgd_quadratic: beta must be positive");

  const auto value = [&](const Vector& mu) {
    return krr_objective(bank, {mu, 2}, lambda, y, beta);
  };
  const auto fit = [&](const Vector& mu) {
    return spd_solve(combined_gram(bank, {mu, 2}), lambda, y);
  };
  const auto gradient = [&](const Vector& mu, const Vector& alpha) {
    const Matrix kmu = detail::weighted_linear_gram(bank, mu);
    const Matrix w = kmu.cwiseProduct(alpha * alpha.transpose());
    return Vector(2.0 * beta * mu - 2.0 * detail::contract_with_bank(bank, w));
  };
  const auto projected_norm = [](const Vector& mu, const Vector& g) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      if (mu(k) <= 1e-12 && g(k) > 0.0) continue;  // pinned at the bound
      s += g(k) * g(k);
    }
    return std::sqrt(s);
  };

  constexpr double grad_tol = 1e-4;

  Vector mu = cfg.mu_init ? *cfg.mu_init : Vector::Ones(bank.p());
  if (mu.size() != bank.p())
    throw DimensionMismatch("rpgd_quadratic: mu_init length does not match bank size");

  SolveResult res;
  Vector alpha = fit(mu);
  double f = y.dot(alpha) + beta * mu.squaredNorm();
  res.objective_trace.push_back(f);
  if (!std::isfinite(f) || f > detail::kDivergenceCap) {
    res.mu_star = mu;
    res.alpha_star = alpha;
    res.status = SolveStatus::Diverged;
    return res;
  }

  double eta = cfg.eta;
  SolveStatus status = SolveStatus::MaxIter;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    Vector g = gradient(mu, alpha);
    res.fixed_point_residual = projected_norm(mu, g);
    if (res.fixed_point_residual <= grad_tol) {
      status = SolveStatus::Converged;
      break;
    }
    if (cfg.ridge_quadratic_flip_sign) g = -g;  // replay the ascent variant

    if (cfg.ridge_quadratic_flip_sign) {
      // Literal replay: always accept, shrink eta after the fact when the
      // objective went up, and let the divergence guard fire.
      mu = (mu - eta * g).cwiseMax(0.0);
      alpha = fit(mu);
      const double f_new = y.dot(alpha) + beta * mu.squaredNorm();
      if (f_new > f) eta *= cfg.backoff;
      f = f_new;
      res.objective_trace.push_back(f);
      res.trace.push_back({iter, f, mu.norm(), eta});
      res.iterations = iter;
      if (!std::isfinite(f) || f > detail::kDivergenceCap) {
        status = SolveStatus::Diverged;
        break;
      }
      continue;
    }

    bool accepted = false;
    Vector cand;
    double f_cand = 0.0;
    for (int bt = 0; bt < detail::kMaxBacktracks; ++bt) {
      cand = (mu - eta * g).cwiseMax(0.0);
      f_cand = value(cand);
      if (std::isfinite(f_cand) && f_cand <= f + 1e-12 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
      eta *= cfg.backoff;
    }
    if (!accepted) break;  // stalled; projected gradient still reported

    mu = cand;
    alpha = fit(mu);
    f = f_cand;
    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, mu.norm(), eta});
    res.iterations = iter;
  }

  if (status == SolveStatus::MaxIter) {
    const Vector g = gradient(mu, alpha);
    res.fixed_point_residual = projected_norm(mu, g);
    if (res.fixed_point_residual <= grad_tol) status = SolveStatus::Converged;
  }
  res.mu_star = mu;
  res.alpha_star = alpha;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

}  // namespace mklforge
