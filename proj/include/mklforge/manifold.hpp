#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "mklforge/krr.hpp"
#include "mklforge/mkl.hpp"

// Optimization restricted to the sphere ||mu - mu0||_2 = Lambda: tangent
// projection, retraction, the induced gradient and Hessian of a smooth
// ambient objective, and a trust-region minimizer whose subproblems are
// solved by truncated conjugate gradients. Nonnegativity of mu is not
// enforced here; the trust-region entry check requires mu0 > 0 and
// Lambda <= ||mu0||_inf and otherwise leaves the geometry alone.

namespace mklforge {

struct SpherePoint {
  Vector mu;
  FeasibleRegion region;
};

struct TangentVector {
  Vector xi;
  SpherePoint base;
};

inline SpherePoint make_sphere_point(Vector mu, FeasibleRegion region) {
  validate_region(region);
  if (region.q != 2) throw InvalidArgument("SpherePoint: requires a q = 2 region");
  if (mu.size() != region.mu0.size())
    throw DimensionMismatch("SpherePoint: weight length does not match mu0");
  if (std::abs((mu - region.mu0).norm() - region.Lambda) > 1e-10)
    throw InvalidArgument("SpherePoint: point does not lie on the sphere");
  return SpherePoint{std::move(mu), std::move(region)};
}

namespace detail {

inline void check_same_base(const SpherePoint& a, const SpherePoint& b, const char* what) {
  if (a.mu.size() != b.mu.size() || (a.mu - b.mu).norm() > 1e-12 * (1.0 + a.mu.norm()))
    throw InvalidArgument(std::string(what) + ": tangent vector is based at a different point");
}

}  // namespace detail

// P xi = (I - (1/Lambda^2) (mu - mu0)(mu - mu0)') xi, the orthogonal
// projection onto the tangent space at the point.
inline TangentVector tangent_project(const SpherePoint& point, const Vector& xi) {
  if (xi.size() != point.mu.size())
    throw DimensionMismatch("tangent_project: direction length does not match point");
  const Vector normal = point.mu - point.region.mu0;
  const double lam2 = point.region.Lambda * point.region.Lambda;
  return TangentVector{xi - (normal.dot(xi) / lam2) * normal, point};
}

// Center-and-radius corrected normalization back onto the sphere,
// mu0 + Lambda (mu + xi - mu0) / ||mu + xi - mu0||. With mu0 = 0 and
// Lambda = 1 this is the plain normalization retraction.
inline SpherePoint retract(const SpherePoint& point, const TangentVector& v) {
  detail::check_same_base(point, v.base, "retract");
  const Vector dir = point.mu + v.xi - point.region.mu0;
  const double n = dir.norm();
  if (n <= 1e-14) throw DegenerateDirection("retract: moved point coincides with the center");
  return SpherePoint{point.region.mu0 + (point.region.Lambda / n) * dir, point.region};
}

// Smooth ambient objective with analytic first and second derivatives.
struct ManifoldObjective {
  std::function<double(const Vector& mu)> value;
  std::function<Vector(const Vector& mu)> gradient;
  std::function<Vector(const Vector& mu, const Vector& dir)> hessian_vec;
};

inline TangentVector riemannian_gradient(const ManifoldObjective& obj, const SpherePoint& point) {
  return tangent_project(point, obj.gradient(point.mu));
}

// Differential of the projected-gradient field along a tangent direction:
// projecting the ambient Hessian product and differentiating the projector
// itself leaves P H eta - ((mu - mu0)' grad / Lambda^2) eta; the rank-one
// second term is what the curved sphere adds to the flat Hessian.
inline TangentVector riemannian_hess_vec(const ManifoldObjective& obj, const SpherePoint& point,
                                         const TangentVector& eta) {
  detail::check_same_base(point, eta.base, "riemannian_hess_vec");
  const Vector normal = point.mu - point.region.mu0;
  const double lam2 = point.region.Lambda * point.region.Lambda;
  if (std::abs(normal.dot(eta.xi)) > 1e-8 * (1.0 + eta.xi.norm()) * point.region.Lambda)
    throw InvalidArgument("riemannian_hess_vec: direction is not tangent at the point");
  TangentVector out = tangent_project(point, obj.hessian_vec(point.mu, eta.xi));
  out.xi -= (normal.dot(obj.gradient(point.mu)) / lam2) * eta.xi;
  return out;
}

// Regularized combination objective restricted to the sphere; the
// squared-combination family is the one the sphere solver targets.
inline ManifoldObjective krr_manifold_objective(const BaseKernelBank& bank, const Vector& y,
                                                double lambda, int degree = 2) {
  ManifoldObjective obj;
  obj.value = [&bank, &y, lambda, degree](const Vector& mu) {
    return krr_objective(bank, {mu, degree}, lambda, y, 0.0);
  };
  obj.gradient = [&bank, &y, lambda, degree](const Vector& mu) {
    return krr_gradient(bank, {mu, degree}, lambda, y, 0.0);
  };
  obj.hessian_vec = [&bank, &y, lambda, degree](const Vector& mu, const Vector& dir) {
    return krr_hessian_vector_product(bank, {mu, degree}, lambda, y, 0.0, dir);
  };
  return obj;
}

inline TangentVector riemannian_grad(const BaseKernelBank& bank, const SpherePoint& point,
                                     double lambda, const Vector& y, int degree = 2) {
  return riemannian_gradient(krr_manifold_objective(bank, y, lambda, degree), point);
}

inline TangentVector hess_vec(const BaseKernelBank& bank, const SpherePoint& point, double lambda,
                              const Vector& y, const TangentVector& eta, int degree = 2) {
  return riemannian_hess_vec(krr_manifold_objective(bank, y, lambda, degree), point, eta);
}

struct TrustRegionConfig {
  // Radius cap and initial radius; nonpositive values mean the defaults
  // Lambda and Lambda / 8.
  double delta_hat = 0.0;
  double delta0 = 0.0;
  // Step acceptance threshold for the reduction ratio, in [0, 1/4].
  double acceptance = 0.1;
  int max_iter = 100;
  double grad_tol = 1e-5;
  std::optional<Vector> mu_init;
  // Called with every accepted iterate; handy for residence checks.
  std::function<void(const Vector&)> on_iterate;
};

// Radius rule: quarter the radius below ratio 1/4; double it (capped) when
// the ratio exceeds 3/4 and the step reached the trust boundary; keep it
// otherwise.
inline double tr_radius_update(double delta, double rho, bool hit_boundary, double delta_hat) {
  if (rho < 0.25) return 0.25 * delta;
  if (rho > 0.75 && hit_boundary) return std::min(2.0 * delta, delta_hat);
  return delta;
}

inline bool tr_step_accepted(double rho, double acceptance) { return rho > acceptance; }

namespace detail {

// Positive root of ||xi + tau d|| = delta.
inline double boundary_tau(const Vector& xi, const Vector& d, double delta) {
  const double dd = d.squaredNorm();
  const double xd = xi.dot(d);
  const double xx = xi.squaredNorm();
  return (-xd + std::sqrt(std::max(0.0, xd * xd + dd * (delta * delta - xx)))) / dd;
}

// Truncated conjugate gradients for min <g, xi> + 1/2 <H xi, xi> over
// ||xi|| <= delta: stops early at negative curvature or the trust boundary
// by stepping out to the sphere of radius delta.
inline Vector steihaug_cg(const Vector& g, const std::function<Vector(const Vector&)>& hvp,
                          double delta, bool& hit_boundary) {
  hit_boundary = false;
  Vector xi = Vector::Zero(g.size());
  Vector r = g;
  Vector d = -r;
  double rr = r.squaredNorm();
  const double g_norm = std::sqrt(rr);
  if (g_norm == 0.0) return xi;
  const double tol = g_norm * std::min(0.5, std::sqrt(g_norm));

  const int max_cg = 2 * static_cast<int>(g.size()) + 5;
  for (int j = 0; j < max_cg; ++j) {
    const Vector hd = hvp(d);
    const double curvature = d.dot(hd);
    if (curvature <= 0.0) {
      hit_boundary = true;
      return xi + boundary_tau(xi, d, delta) * d;
    }
    const double a = rr / curvature;
    if ((xi + a * d).norm() >= delta) {
      hit_boundary = true;
      return xi + boundary_tau(xi, d, delta) * d;
    }
    xi += a * d;
    r += a * hd;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= tol) break;
    d = -r + (rr_next / rr) * d;
    rr = rr_next;
  }
  return xi;
}

}  // namespace detail

// Trust-region minimization of the objective over the sphere. Each round
// builds the tangent-space quadratic model from the point's gradient and
// Hessian, solves it within the current radius, and scores the retracted
// candidate by the actual-over-predicted reduction ratio; the radius
// follows tr_radius_update and only ratio > acceptance moves the iterate.
// Stops when the tangent gradient norm falls to grad_tol.
inline SolveResult trust_region_minimize(const ManifoldObjective& obj, const FeasibleRegion& region,
                                         TrustRegionConfig cfg = {}) {
  validate_region(region);
  if (region.q != 2) throw InvalidArgument("trust_region: requires a q = 2 region");
  // The sphere must stay clear of the orthant walls the iterates ignore.
  if (region.mu0.minCoeff() <= 0.0)
    throw InvalidArgument("trust_region: mu0 must be strictly positive");
  if (region.Lambda > region.mu0.lpNorm<Eigen::Infinity>())
    throw InvalidArgument("trust_region: Lambda must not exceed the largest center weight");

  const double delta_hat = cfg.delta_hat > 0.0 ? cfg.delta_hat : region.Lambda;
  const double delta0 = cfg.delta0 > 0.0 ? cfg.delta0 : region.Lambda / 8.0;
  if (!(delta0 > 0.0 && delta0 < delta_hat))
    throw InvalidArgument("trust_region: need 0 < delta0 < delta_hat");
  if (!(cfg.acceptance >= 0.0 && cfg.acceptance <= 0.25))
    throw InvalidArgument("trust_region: acceptance threshold must lie in [0, 1/4]");
  if (cfg.max_iter < 1) throw InvalidArgument("trust_region: max_iter must be at least 1");

  const int p = static_cast<int>(region.mu0.size());
  Vector start;
  if (cfg.mu_init) {
    if (cfg.mu_init->size() != p)
      throw DimensionMismatch("trust_region: mu_init length does not match mu0");
    const Vector dir = *cfg.mu_init - region.mu0;
    if (dir.norm() <= 1e-14)
      throw DegenerateDirection("trust_region: mu_init coincides with the center");
    start = region.mu0 + (region.Lambda / dir.norm()) * dir;
  } else {
    start = region.mu0 + (region.Lambda / std::sqrt(static_cast<double>(p))) * Vector::Ones(p);
  }

  SpherePoint point = make_sphere_point(start, region);
  double f = obj.value(point.mu);

  SolveResult res;
  res.objective_trace.push_back(f);
  if (!std::isfinite(f)) {
    res.mu_star = point.mu;
    res.status = SolveStatus::Diverged;
    return res;
  }

  double delta = delta0;
  SolveStatus status = SolveStatus::MaxIter;
  int accepted_steps = 0;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const Vector g_ambient = obj.gradient(point.mu);
    const TangentVector g = tangent_project(point, g_ambient);
    res.fixed_point_residual = g.xi.norm();
    if (res.fixed_point_residual <= cfg.grad_tol) {
      status = SolveStatus::Converged;
      break;
    }

    const Vector normal = point.mu - region.mu0;
    const double curvature_shift =
        normal.dot(g_ambient) / (region.Lambda * region.Lambda);
    const auto hvp = [&](const Vector& v) {
      TangentVector out = tangent_project(point, obj.hessian_vec(point.mu, v));
      return Vector(out.xi - curvature_shift * v);
    };

    bool hit_boundary = false;
    const Vector xi = detail::steihaug_cg(g.xi, hvp, delta, hit_boundary);
    const double predicted = -(g.xi.dot(xi) + 0.5 * xi.dot(hvp(xi)));

    const SpherePoint cand = retract(point, TangentVector{xi, point});
    const double f_cand = obj.value(cand.mu);
    if (!std::isfinite(f_cand)) {
      status = SolveStatus::Diverged;
      break;
    }
    const double rho = predicted > 0.0 ? (f - f_cand) / predicted
                                       : -std::numeric_limits<double>::infinity();
    if (tr_step_accepted(rho, cfg.acceptance)) {
      point = cand;
      f = f_cand;
      ++accepted_steps;
      if (cfg.on_iterate) cfg.on_iterate(point.mu);
    }
    delta = tr_radius_update(delta, rho, hit_boundary, delta_hat);

    res.objective_trace.push_back(f);
    res.trace.push_back({iter, f, point.mu.norm(), delta});
  }

  if (status == SolveStatus::MaxIter) {
    res.fixed_point_residual = tangent_project(point, obj.gradient(point.mu)).xi.norm();
    if (res.fixed_point_residual <= cfg.grad_tol) status = SolveStatus::Converged;
  }
  res.iterations = accepted_steps;
  res.mu_star = point.mu;
  res.status = status;
  res.converged = (status == SolveStatus::Converged);
  return res;
}

// Sphere-constrained weight learning for the squared combination, with the
// ridge coefficients of the final weights attached.
inline SolveResult trust_region(const BaseKernelBank& bank, const Vector& y, double lambda,
                                const FeasibleRegion& region, TrustRegionConfig cfg = {},
                                int degree = 2) {
  if (region.mu0.size() != bank.p())
    throw DimensionMismatch("trust_region: region dimension does not match bank size");
  detail::check_fit_inputs(bank, y, lambda);
  SolveResult res = trust_region_minimize(krr_manifold_objective(bank, y, lambda, degree), region,
                                          std::move(cfg));
  res.alpha_star = spd_solve(combined_gram(bank, {res.mu_star, degree}), lambda, y);
  return res;
}

}  // namespace mklforge
