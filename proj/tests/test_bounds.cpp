#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "mklforge/bounds.hpp"
#include "mklforge/rng.hpp"
#include "support/test_instances.hpp"

using mklforge::BoundFamily;
using mklforge::BoundInputs;
using mklforge::CurvatureConstants;
using mklforge::FeasibleRegion;
using mklforge::Rng;
using mklforge::SymMatrix;
using mklforge::Vector;

namespace {

mklforge::BaseKernelBank single_gram_bank(SymMatrix gram) {
  std::vector<SymMatrix> grams;
  grams.push_back(std::move(gram));
  return mklforge::BaseKernelBank({mklforge::KernelSpec::linear()}, std::move(grams));
}

}  // namespace

TEST_CASE("complexity bound reproduces frozen arithmetic") {
  BoundInputs in;  // p=1, R=1, m=1, Linear
  REQUIRE(mklforge::rademacher_bound(in) ==
          Catch::Approx(1.4459976109624424).margin(1e-12));

  in.family = BoundFamily::Polynomial;  // powers of p and R coincide at 1
  REQUIRE(mklforge::rademacher_bound(in) ==
          Catch::Approx(1.4459976109624424).margin(1e-12));

  in.family = BoundFamily::Linear;
  in.p = 16;
  in.m = 100;
  REQUIRE(mklforge::rademacher_bound(in) ==
          Catch::Approx(0.28919952219248848).margin(1e-12));
}

TEST_CASE("complexity bound is monotone in its arguments") {
  BoundInputs in;
  in.p = 4;
  in.R = 1.5;
  in.m = 50;
  for (BoundFamily family : {BoundFamily::Linear, BoundFamily::Polynomial}) {
    in.family = family;
    double prev = mklforge::rademacher_bound(in);
    for (int m : {100, 200, 400}) {
      BoundInputs larger = in;
      larger.m = m;
      const double next = mklforge::rademacher_bound(larger);
      REQUIRE(next < prev);
      prev = next;
    }
    prev = 0.0;
    for (int p : {1, 2, 4, 9, 16}) {
      BoundInputs wider = in;
      wider.p = p;
      const double next = mklforge::rademacher_bound(wider);
      REQUIRE(next > prev);
      prev = next;
    }
    prev = 0.0;
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
      BoundInputs taller = in;
      taller.R = r;
      const double next = mklforge::rademacher_bound(taller);
      REQUIRE(next > prev);
      prev = next;
    }
  }
}

TEST_CASE("squared-family bound dominates the linear one for large kernels") {
  for (int p : {1, 2, 4, 9})
    for (double r : {1.0, 1.5, 2.0}) {
      BoundInputs in;
      in.p = p;
      in.R = r;
      in.m = 64;
      in.family = BoundFamily::Linear;
      const double linear = mklforge::rademacher_bound(in);
      in.family = BoundFamily::Polynomial;
      REQUIRE(mklforge::rademacher_bound(in) >= linear);
    }
}

TEST_CASE("margin bound reproduces frozen arithmetic and vanishes with data") {
  BoundInputs in;
  in.p = 1;
  in.R = 1.0;
  in.rho = 1.0;
  in.delta = 0.05;
  in.m = 100;
  REQUIRE(mklforge::generalization_bound(in, 0.1) ==
          Catch::Approx(0.7119253979804039).margin(1e-12));

  in.m = 100000000;
  REQUIRE(mklforge::generalization_bound(in, 0.0) <= 1e-3);
}

TEST_CASE("bound inputs are range-checked") {
  const auto reject = [](auto mutate) {
    BoundInputs in;
    mutate(in);
    REQUIRE_THROWS_AS(mklforge::rademacher_bound(in), mklforge::InvalidArgument);
  };
  reject([](BoundInputs& in) { in.p = 0; });
  reject([](BoundInputs& in) { in.R = 0.0; });
  reject([](BoundInputs& in) { in.m = 0; });
  reject([](BoundInputs& in) { in.rho = -1.0; });
  reject([](BoundInputs& in) { in.delta = 0.0; });
  reject([](BoundInputs& in) { in.delta = 1.0; });
  reject([](BoundInputs& in) { in.delta = 2.0; });

  BoundInputs in;
  REQUIRE_THROWS_AS(mklforge::generalization_bound(in, -0.1), mklforge::InvalidArgument);
  REQUIRE_THROWS_AS(mklforge::generalization_bound(in, 1.1), mklforge::InvalidArgument);
}

TEST_CASE("curvature constants are exact for the identity kernel") {
  auto bank = single_gram_bank(SymMatrix::identity(6));
  const FeasibleRegion region{Vector::Ones(1), 0.5, 2};

  for (int n : {1, 20}) {
    const CurvatureConstants est = mklforge::estimate_curvature_constants(bank, region, n, 42);
    REQUIRE(est.B == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(est.D == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(est.E == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(est.C == Catch::Approx(2.25).margin(1e-12));  // (mu0 + Lambda)^2
    REQUIRE(est.H == Catch::Approx(4.0).margin(1e-12));   // 1 / (mu0 - Lambda)^2
    REQUIRE(est.concavity_defined);
    REQUIRE(est.concavity_threshold == Catch::Approx(9.0).margin(1e-12));
    // E*H*B = 4 exactly sits outside the usable convex regime.
    REQUIRE_FALSE(est.convexity_defined);
    REQUIRE(std::isnan(est.convexity_threshold));
    REQUIRE(est.singular_samples == 0);
  }
}

TEST_CASE("curvature estimates are seeded, nested, and thread-independent") {
  Rng rng(999);
  auto bank = testsupport::random_gram_bank(rng, 8, 2);
  const FeasibleRegion region{Vector::Ones(2), 0.6, 2};

  const CurvatureConstants a = mklforge::estimate_curvature_constants(bank, region, 40, 7);
  const CurvatureConstants b = mklforge::estimate_curvature_constants(bank, region, 40, 7);
  REQUIRE(a.B == b.B);
  REQUIRE(a.C == b.C);
  REQUIRE(a.D == b.D);
  REQUIRE(a.E == b.E);
  REQUIRE(a.H == b.H);

  // Growing the sample count only appends samples, so maxima can only grow
  // and the minimum can only shrink.
  const CurvatureConstants big = mklforge::estimate_curvature_constants(bank, region, 400, 7);
  REQUIRE(big.B >= a.B);
  REQUIRE(big.C >= a.C);
  REQUIRE(big.E >= a.E);
  REQUIRE(big.H >= a.H);
  REQUIRE(big.D <= a.D);

  const CurvatureConstants threaded =
      mklforge::estimate_curvature_constants(bank, region, 400, 7, 4);
  REQUIRE(threaded.B == big.B);
  REQUIRE(threaded.C == big.C);
  REQUIRE(threaded.D == big.D);
  REQUIRE(threaded.H == big.H);
}

TEST_CASE("curvature constants keep their ordering on random banks") {
  Rng rng(123);
  for (int rep = 0; rep < 8; ++rep) {
    const int p = 1 + static_cast<int>(rng.below(3));
    auto bank = testsupport::random_gram_bank(rng, 7, p);
    const FeasibleRegion region{Vector::Ones(p), 0.5, rep % 2 == 0 ? 2 : 1};
    const CurvatureConstants est = mklforge::estimate_curvature_constants(bank, region, 60, rep);
    REQUIRE(est.B >= est.D);
    REQUIRE(est.D >= 0.0);
    REQUIRE(est.E == est.B);
    REQUIRE(est.C >= 0.0);
    if (est.convexity_defined) REQUIRE(est.convexity_threshold > 0.0);
  }
}

TEST_CASE("rank-deficient products are skipped and counted in the inverse estimate") {
  auto bank = single_gram_bank(SymMatrix::from_symmetric(mklforge::Matrix::Ones(5, 5)));
  const FeasibleRegion region{Vector::Ones(1), 0.5, 2};
  const CurvatureConstants est = mklforge::estimate_curvature_constants(bank, region, 10, 3);

  // K_u o K_u = ones has eigenvalues {5, 0, 0, 0, 0}.
  REQUIRE(est.B == Catch::Approx(5.0).margin(1e-10));
  REQUIRE(est.D == 0.0);
  REQUIRE(est.C == Catch::Approx(56.25).margin(1e-9));  // (1.5 * 5)^2
  REQUIRE(est.singular_samples == 10 + 4);              // every draw plus every anchor
  REQUIRE(std::isinf(est.H));
  REQUIRE_FALSE(est.concavity_defined);
  REQUIRE(std::isinf(est.concavity_threshold));
  REQUIRE_FALSE(est.convexity_defined);
}

TEST_CASE("curvature estimation validates its inputs") {
  Rng rng(5);
  auto bank = testsupport::random_gram_bank(rng, 6, 2);
  const FeasibleRegion region{Vector::Ones(2), 0.5, 2};
  REQUIRE_THROWS_AS(mklforge::estimate_curvature_constants(bank, region, 0, 1),
                    mklforge::InvalidArgument);
  const FeasibleRegion wrong{Vector::Ones(3), 0.5, 2};
  REQUIRE_THROWS_AS(mklforge::estimate_curvature_constants(bank, wrong, 10, 1),
                    mklforge::DimensionMismatch);
}

TEST_CASE("sign census is all-of-both for zero labels") {
  Rng rng(777);
  auto bank = testsupport::random_gram_bank(rng, 8, 2);
  const auto probe =
      mklforge::hessian_sign_probe(bank, Vector::Ones(2), 1.0, Vector::Zero(8), 64, 11);
  REQUIRE(probe.frac_nonneg == 1.0);
  REQUIRE(probe.frac_nonpos == 1.0);
}

TEST_CASE("sign census matches the estimated curvature regimes") {
  Rng rng(2468);
  auto bank = testsupport::random_gram_bank(rng, 10, 1);
  const Vector y = testsupport::random_vector(rng, 10);
  const FeasibleRegion region{Vector::Ones(1), 0.5, 2};
  Vector mu(1);
  mu << 1.5;

  const CurvatureConstants est = mklforge::estimate_curvature_constants(bank, region, 500, 17);
  REQUIRE(est.concavity_defined);

  const auto concave =
      mklforge::hessian_sign_probe(bank, mu, est.concavity_threshold, y, 400, 29);
  REQUIRE(concave.frac_nonpos == 1.0);
  const auto very_concave = mklforge::hessian_sign_probe(bank, mu, 1e6, y, 400, 29);
  REQUIRE(very_concave.frac_nonpos == 1.0);

  // Full-rank base kernel keeps the squared combination invertible, so the
  // small-shift regime is convex.
  const auto convex = mklforge::hessian_sign_probe(bank, mu, 1e-6, y, 400, 29);
  REQUIRE(convex.frac_nonneg == 1.0);
}

TEST_CASE("census saturates above the estimated concavity threshold across instances") {
  Rng rng(1357);
  int checked = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const int p = 1 + inst % 3;
    const int m = 8 + inst % 5;
    auto bank = testsupport::random_gram_bank(rng, m, p);
    const Vector y = testsupport::random_vector(rng, m);
    const FeasibleRegion region{Vector::Ones(p), 0.5, 2};

    CurvatureConstants est = mklforge::estimate_curvature_constants(bank, region, 1500, 100 + inst);
    mklforge::BaseKernelBank probe_bank = bank;
    Vector probe_y = y;
    int probe_p = p;
    if (!est.concavity_defined || est.D <= 1e-6) {
      // Squared single full-rank kernels always have strictly positive
      // minimum curvature; fall back so every round checks something.
      auto fallback = testsupport::random_gram_bank(rng, m, 1);
      const FeasibleRegion r1{Vector::Ones(1), 0.5, 2};
      est = mklforge::estimate_curvature_constants(fallback, r1, 1500, 200 + inst);
      REQUIRE(est.concavity_defined);
      probe_bank = fallback;
      probe_p = 1;
    }

    Vector mu = Vector::Ones(probe_p);
    mu.array() += 0.5 / std::sqrt(static_cast<double>(probe_p));
    for (double factor : {1.0, 2.0}) {
      const auto probe = mklforge::hessian_sign_probe(
          probe_bank, mu, factor * est.concavity_threshold, probe_y, 400, 300 + inst);
      REQUIRE(probe.frac_nonpos == 1.0);
    }
    ++checked;
  }
  REQUIRE(checked == 10);
}

TEST_CASE("sign census validates its inputs") {
  Rng rng(31);
  auto bank = testsupport::random_gram_bank(rng, 6, 2);
  const Vector y = testsupport::random_vector(rng, 6);
  Vector neg(2);
  neg << 1.0, -0.1;
  REQUIRE_THROWS_AS(mklforge::hessian_sign_probe(bank, neg, 1.0, y, 10, 1),
                    mklforge::InvalidArgument);
  REQUIRE_THROWS_AS(mklforge::hessian_sign_probe(bank, Vector::Ones(2), 1.0, y, 0, 1),
                    mklforge::InvalidArgument);
  REQUIRE_THROWS_AS(mklforge::hessian_sign_probe(bank, Vector::Ones(3), 1.0, y, 10, 1),
                    mklforge::DimensionMismatch);
}
