#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mklforge/kernels.hpp"
#include "mklforge/krr.hpp"
#include "mklforge/linalg.hpp"
#include "mklforge/mkl.hpp"
#include "mklforge/parallel.hpp"
#include "mklforge/rng.hpp"

// Complexity-bound calculators for learned kernel combinations and
// Monte-Carlo estimators for the curvature constants that locate the
// convex and concave regimes of the regularization path.

namespace mklforge {

enum class BoundFamily { Linear, Polynomial };

struct BoundInputs {
  int p = 1;          // number of base kernels
  double R = 1.0;     // kernel-diagonal bound, K_k(x, x) <= R^2
  int m = 1;          // sample count
  double rho = 1.0;   // margin
  double delta = 0.05;
  BoundFamily family = BoundFamily::Linear;
};

inline void validate_bound_inputs(const BoundInputs& in) {
  if (in.p < 1) throw InvalidArgument("BoundInputs: p must be a positive integer");
  if (!(in.R > 0.0) || !std::isfinite(in.R)) throw InvalidArgument("BoundInputs: R must be positive");
  if (in.m < 1) throw InvalidArgument("BoundInputs: m must be a positive integer");
  if (!(in.rho > 0.0) || !std::isfinite(in.rho))
    throw InvalidArgument("BoundInputs: rho must be positive");
  if (!(in.delta > 0.0 && in.delta < 1.0))
    throw InvalidArgument("BoundInputs: delta must lie in (0, 1)");
}

namespace detail {

// Capacity factor of the kernel family: p^{1/4} R for linear combinations,
// p^{1/2} R^2 for the squared ones.
inline double family_capacity(const BoundInputs& in) {
  return in.family == BoundFamily::Linear
             ? std::pow(static_cast<double>(in.p), 0.25) * in.R
             : std::sqrt(static_cast<double>(in.p)) * in.R * in.R;
}

}  // namespace detail

// Complexity bound sqrt(23/11) * capacity / sqrt(m).
inline double rademacher_bound(const BoundInputs& in) {
  validate_bound_inputs(in);
  const double eta0 = std::sqrt(23.0 / 11.0);
  return eta0 * detail::family_capacity(in) / std::sqrt(static_cast<double>(in.m));
}

// Margin-loss bound: empirical term, sqrt(46/11)-scaled capacity term, and
// the usual confidence term 3 sqrt(log(2/delta) / (2m)).
inline double generalization_bound(const BoundInputs& in, double empirical_margin_loss) {
  validate_bound_inputs(in);
  if (!(empirical_margin_loss >= 0.0 && empirical_margin_loss <= 1.0))
    throw InvalidArgument("generalization_bound: empirical margin loss must lie in [0, 1]");
  const double eta1 = std::sqrt(46.0 / 11.0);
  const double md = static_cast<double>(in.m);
  return empirical_margin_loss + eta1 * detail::family_capacity(in) / (in.rho * std::sqrt(md)) +
         3.0 * std::sqrt(std::log(2.0 / in.delta) / (2.0 * md));
}

// Sampled extremal constants of the squared-combination objective over the
// region. Max-type constants (B, C, E, H) are empirical lower bounds on
// the true suprema and D is an upper bound on the true infimum; all are
// exact in the limit and reproducible for a fixed seed.
struct CurvatureConstants {
  double B = 0.0;  // max over unit u of lambda_max(K_u o K_u)
  double C = 0.0;  // max over (mu, u) of ||K_mu o K_u||^2
  double D = 0.0;  // min over unit u of lambda_min(K_u o K_u), floored at 0
  double E = 0.0;  // largest sampled lambda_max(K_u o K_u); coincides with B
  double H = 0.0;  // max over (mu, u) of ||(K_mu o K_u)^-1||^2
  double concavity_threshold = std::numeric_limits<double>::infinity();  // 4C/D
  bool concavity_defined = false;
  double convexity_threshold = std::numeric_limits<double>::quiet_NaN();  // E log(4/(EHB))
  bool convexity_defined = false;
  int sample_count = 0;
  std::uint64_t seed = 0;
  // Samples whose K_mu o K_u was numerically singular and therefore
  // contributed nothing to H.
  int singular_samples = 0;
};

namespace detail {

// ||M^-1||^2 for symmetric M via the full spectrum; the smallest-magnitude
// eigenvalue may sit strictly inside the extremal pair.
inline double inverse_norm_squared(const Matrix& m_sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("inverse_norm_squared: eigensolver did not converge");
  const Vector abs_ev = es.eigenvalues().cwiseAbs();
  const double lo = abs_ev.minCoeff();
  const double hi = abs_ev.maxCoeff();
  if (lo <= 1e-12 * std::max(1.0, hi))
    throw SingularSample("curvature: K_mu o K_u is numerically singular");
  return 1.0 / (lo * lo);
}

// Uniform draw from the feasible part of the region boundary by rejection;
// folding the offset into the orthant is the (always feasible) fallback
// for regions whose boundary is almost entirely clipped away.
inline Vector sample_boundary(Rng& rng, const FeasibleRegion& region) {
  const Eigen::Index p = region.mu0.size();
  Vector v;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    v = region.q == 2 ? rng.unit_sphere(p) : rng.l1_sphere(p);
    const Vector mu = region.mu0 + region.Lambda * v;
    if (mu.minCoeff() >= 0.0) return mu;
  }
  return region.mu0 + region.Lambda * v.cwiseAbs();
}

struct CurvatureSample {
  double b = 0.0;
  double d = 0.0;
  double c = 0.0;
  double h = 0.0;
  bool singular = false;
};

inline CurvatureSample evaluate_curvature_sample(const BaseKernelBank& bank, const Vector& u,
                                                 const Vector& mu) {
  const Matrix ku = weighted_linear_gram(bank, u);
  const Matrix kmu = weighted_linear_gram(bank, mu);

  CurvatureSample s;
  const EigRange squared = extremal_eigs(SymMatrix::from_symmetric(Matrix(ku.cwiseProduct(ku))));
  s.b = squared.max;
  s.d = squared.min;

  const Matrix mixed = kmu.cwiseProduct(ku);
  const double norm = spectral_norm(SymMatrix::from_symmetric(Matrix(mixed)));
  s.c = norm * norm;
  try {
    s.h = inverse_norm_squared(mixed);
  } catch (const SingularSample&) {
    s.singular = true;
  }
  return s;
}

}  // namespace detail

// Monte-Carlo estimate of the curvature constants: n_samples pairs of a
// uniform unit direction u and a uniform feasible boundary point mu, drawn
// from per-sample derived seeds (so enlarging n_samples only appends
// samples and thread count cannot change the result), plus deterministic
// axis anchors u = +-e_k paired with the poles mu0 +- Lambda e_k, which
// make low-dimensional instances exact.
inline CurvatureConstants estimate_curvature_constants(const BaseKernelBank& bank,
                                                       const FeasibleRegion& region, int n_samples,
                                                       std::uint64_t seed, int threads = 1) {
  validate_region(region);
  if (region.mu0.size() != bank.p())
    throw DimensionMismatch("estimate_curvature_constants: region dimension does not match bank");
  if (n_samples < 1)
    throw InvalidArgument("estimate_curvature_constants: n_samples must be at least 1");

  const int p = bank.p();
  std::vector<std::pair<Vector, Vector>> anchors;
  for (int k = 0; k < p; ++k) {
    for (double sign : {1.0, -1.0}) {
      Vector u = Vector::Zero(p);
      u(k) = sign;
      Vector up = region.mu0;
      up(k) += region.Lambda;
      anchors.emplace_back(u, up);
      Vector down = region.mu0;
      down(k) -= region.Lambda;
      if (down.minCoeff() >= 0.0) anchors.emplace_back(std::move(u), std::move(down));
    }
  }

  const int total = static_cast<int>(anchors.size()) + n_samples;
  std::vector<detail::CurvatureSample> samples(total);
  parallel_for(total, threads, [&](int i) {
    if (i < static_cast<int>(anchors.size())) {
      samples[i] = detail::evaluate_curvature_sample(bank, anchors[i].first, anchors[i].second);
    } else {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i - anchors.size())));
      const Vector u = rng.unit_sphere(p);
      const Vector mu = detail::sample_boundary(rng, region);
      samples[i] = detail::evaluate_curvature_sample(bank, u, mu);
    }
  });

  CurvatureConstants out;
  out.sample_count = n_samples;
  out.seed = seed;
  double d_raw = std::numeric_limits<double>::infinity();
  bool any_h = false;
  for (const auto& s : samples) {
    out.B = std::max(out.B, s.b);
    out.E = std::max(out.E, s.b);
    out.C = std::max(out.C, s.c);
    d_raw = std::min(d_raw, s.d);
    if (s.singular) {
      ++out.singular_samples;
    } else {
      out.H = std::max(out.H, s.h);
      any_h = true;
    }
  }
  out.D = std::max(0.0, d_raw);
  if (!any_h) out.H = std::numeric_limits<double>::infinity();

  out.concavity_defined = out.D > 0.0;
  out.concavity_threshold =
      out.concavity_defined ? 4.0 * out.C / out.D : std::numeric_limits<double>::infinity();

  const double ehb = out.E * out.H * out.B;
  out.convexity_defined = out.E > 0.0 && out.B > 0.0 && out.H > 0.0 && std::isfinite(out.H) &&
                          std::isfinite(ehb) && ehb < 4.0;
  out.convexity_threshold = out.convexity_defined ? out.E * std::log(4.0 / ehb)
                                                  : std::numeric_limits<double>::quiet_NaN();
  return out;
}

struct HessianSignProbe {
  double frac_nonneg = 0.0;
  double frac_nonpos = 0.0;
};

// Sign census of the squared-combination objective's curvature at mu:
// the fraction of sampled unit directions whose second derivative is
// nonnegative (resp. nonpositive) up to a 1e-8 slack.
inline HessianSignProbe hessian_sign_probe(const BaseKernelBank& bank, const Vector& mu,
                                           double lambda, const Vector& y, int n_directions,
                                           std::uint64_t seed, int threads = 1) {
  if (mu.size() != bank.p())
    throw DimensionMismatch("hessian_sign_probe: weight length does not match bank size");
  if (mu.minCoeff() < 0.0) throw InvalidArgument("hessian_sign_probe: weights must be nonnegative");
  if (n_directions < 1) throw InvalidArgument("hessian_sign_probe: n_directions must be at least 1");

  std::vector<double> values(n_directions);
  parallel_for(n_directions, threads, [&](int i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const Vector u = rng.unit_sphere(bank.p());
    values[i] = krr_hessian_quadratic_form(bank, {mu, 2}, lambda, y, 0.0, u);
  });

  HessianSignProbe probe;
  for (double v : values) {
    if (v >= -1e-8) probe.frac_nonneg += 1.0;
    if (v <= 1e-8) probe.frac_nonpos += 1.0;
  }
  probe.frac_nonneg /= n_directions;
  probe.frac_nonpos /= n_directions;
  return probe;
}

}  // namespace mklforge
