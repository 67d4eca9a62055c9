#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mklforge/kernels.hpp"
#include "mklforge/linalg.hpp"
#include "mklforge/rng.hpp"
#include "support/test_instances.hpp"

using mklforge::BaseKernelBank;
using mklforge::CombinationParams;
using mklforge::KernelSpec;
using mklforge::Matrix;
using mklforge::Normalization;
using mklforge::Rng;
using mklforge::SymMatrix;
using mklforge::Vector;

TEST_CASE("polynomial kernel of degree two matches squared inner products") {
  Matrix x(2, 1);
  x << 1.0, 2.0;
  const auto bank = mklforge::build_bank({KernelSpec::polynomial(2, 0.0)}, x);
  const SymMatrix& g = bank.train_gram(0);
  REQUIRE(g(0, 0) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(g(0, 1) == Catch::Approx(4.0).margin(1e-14));
  REQUIRE(g(1, 0) == Catch::Approx(4.0).margin(1e-14));
  REQUIRE(g(1, 1) == Catch::Approx(16.0).margin(1e-14));
}

TEST_CASE("linear and single-feature kernels agree with direct products") {
  Matrix x(3, 2);
  x << 1.0, 2.0, 0.0, 1.0, -1.0, 0.5;
  const auto bank = mklforge::build_bank(
      {KernelSpec::linear(), KernelSpec::single_feature(1)}, x);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      REQUIRE(bank.train_gram(0)(i, j) == Catch::Approx(x.row(i).dot(x.row(j))).margin(1e-14));
      REQUIRE(bank.train_gram(1)(i, j) == Catch::Approx(x(i, 1) * x(j, 1)).margin(1e-14));
    }
}

TEST_CASE("gaussian kernel has unit diagonal and entries in (0, 1]") {
  Rng rng(99);
  const Matrix x = testsupport::random_features(rng, 12, 4);
  const auto bank = mklforge::build_bank({KernelSpec::gaussian(0.7)}, x);
  const SymMatrix& g = bank.train_gram(0);
  for (int i = 0; i < 12; ++i) {
    REQUIRE(g(i, i) == Catch::Approx(1.0).margin(1e-14));
    for (int j = 0; j < 12; ++j) {
      REQUIRE(g(i, j) > 0.0);
      REQUIRE(g(i, j) <= 1.0);
    }
  }
  REQUIRE(mklforge::extremal_eigs(g).min >= -1e-8);
}

TEST_CASE("unit-diagonal scaling produces cosine-normalized grams") {
  Rng rng(1234);
  Matrix x = testsupport::random_features(rng, 10, 3);
  x.array() += 0.5;  // keep rows away from zero
  const auto bank = mklforge::build_bank(
      {KernelSpec::polynomial(2, 1.0, Normalization::UnitDiagonal)}, x);
  const SymMatrix& g = bank.train_gram(0);
  for (int i = 0; i < 10; ++i) REQUIRE(std::abs(g(i, i) - 1.0) <= 1e-12);

  // Cross blocks use the train diagonal and each test row's self-kernel.
  Matrix xt = testsupport::random_features(rng, 4, 3);
  xt.array() += 0.5;
  const auto spec = KernelSpec::polynomial(2, 1.0, Normalization::UnitDiagonal);
  const auto bank2 = mklforge::build_bank({spec}, x, &xt);
  const auto raw_spec = KernelSpec::polynomial(2, 1.0);
  const auto raw = mklforge::build_bank({raw_spec}, x, &xt);
  for (int r = 0; r < 4; ++r) {
    const double self = mklforge::kernel_eval(raw_spec, xt.row(r), xt.row(r));
    for (int j = 0; j < 10; ++j) {
      const double want = raw.cross_gram(0)(r, j) /
                          std::sqrt(self * mklforge::kernel_eval(raw_spec, x.row(j), x.row(j)));
      REQUIRE(bank2.cross_gram(0)(r, j) == Catch::Approx(want).margin(1e-12));
    }
  }
}

TEST_CASE("combined_gram applies weights linearly and squares entrywise at degree 2") {
  SymMatrix k1(2);
  k1.set(0, 0, 1.0);
  k1.set(0, 1, 2.0);
  k1.set(1, 1, 3.0);
  BaseKernelBank bank({KernelSpec::linear()}, {k1});

  Vector mu(1);
  mu << 2.0;
  const SymMatrix lin = mklforge::combined_gram(bank, {mu, 1});
  REQUIRE(lin(0, 1) == Catch::Approx(4.0).margin(1e-14));

  const SymMatrix quad = mklforge::combined_gram(bank, {mu, 2});
  REQUIRE(quad(0, 0) == Catch::Approx(4.0).margin(1e-14));
  REQUIRE(quad(0, 1) == Catch::Approx(16.0).margin(1e-14));
  REQUIRE(quad(1, 1) == Catch::Approx(36.0).margin(1e-14));

  Vector bad(2);
  bad << 1.0, 1.0;
  REQUIRE_THROWS_AS(mklforge::combined_gram(bank, {bad, 1}), mklforge::DimensionMismatch);
  REQUIRE_THROWS_AS(mklforge::combined_gram(bank, {mu, 3}), mklforge::InvalidArgument);
  REQUIRE_THROWS_AS(mklforge::combined_cross_gram(bank, {mu, 1}), mklforge::MissingCrossGrams);
}

TEST_CASE("combined_gram is linear in the weights and PSD for nonnegative weights") {
  Rng rng(777);
  auto bank = testsupport::random_gaussian_bank(rng, 15, 3, {0.25, 1.0, 4.0});
  Vector a = testsupport::random_vector(rng, 3).cwiseAbs();
  Vector b = testsupport::random_vector(rng, 3).cwiseAbs();

  const Matrix lhs = mklforge::combined_gram(bank, {a + b, 1}).dense();
  const Matrix rhs = mklforge::combined_gram(bank, {a, 1}).dense() +
                     mklforge::combined_gram(bank, {b, 1}).dense();
  REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

  REQUIRE(mklforge::extremal_eigs(mklforge::combined_gram(bank, {a, 1})).min >= -1e-8);
  REQUIRE(mklforge::extremal_eigs(mklforge::combined_gram(bank, {a, 2})).min >= -1e-8);
}

TEST_CASE("bank construction validates inputs") {
  Matrix x(2, 2);
  x << 1.0, 2.0, 3.0, 4.0;

  Matrix bad = x;
  bad(0, 1) = std::nan("");
  REQUIRE_THROWS_AS(mklforge::build_bank({KernelSpec::linear()}, bad), mklforge::NonFiniteFeature);

  Matrix empty(0, 2);
  REQUIRE_THROWS_AS(mklforge::build_bank({KernelSpec::linear()}, empty), mklforge::EmptyDataset);

  // A zero row makes the linear-kernel diagonal vanish under unit scaling.
  Matrix with_zero(2, 2);
  with_zero << 0.0, 0.0, 1.0, 1.0;
  REQUIRE_THROWS_AS(
      mklforge::build_bank({KernelSpec::linear(Normalization::UnitDiagonal)}, with_zero),
      mklforge::DegenerateKernel);

  Matrix xt(2, 3);
  xt.setOnes();
  REQUIRE_THROWS_AS(mklforge::build_bank({KernelSpec::linear()}, x, &xt),
                    mklforge::DimensionMismatch);
}

TEST_CASE("default gaussian ladder spans 2^-3 .. 2^3 with unit diagonals") {
  const auto specs = mklforge::default_gaussian_specs();
  REQUIRE(specs.size() == 7);
  REQUIRE(specs.front().gamma == Catch::Approx(0.125));
  REQUIRE(specs.back().gamma == Catch::Approx(8.0));
  for (const auto& s : specs) {
    REQUIRE(s.kind == mklforge::KernelKind::Gaussian);
    REQUIRE(s.normalize == Normalization::UnitDiagonal);
  }
}

TEST_CASE("cross grams line up with pointwise kernel evaluation") {
  Rng rng(4242);
  const Matrix x = testsupport::random_features(rng, 8, 3);
  const Matrix xt = testsupport::random_features(rng, 3, 3);
  const auto spec = KernelSpec::gaussian(0.5);
  const auto bank = mklforge::build_bank({spec}, x, &xt);
  REQUIRE(bank.has_cross());
  REQUIRE(bank.test_rows() == 3);
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 8; ++j)
      REQUIRE(bank.cross_gram(0)(r, j) ==
              Catch::Approx(mklforge::kernel_eval(spec, xt.row(r), x.row(j))).margin(1e-14));
}
