#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mklforge/krr.hpp"
#include "mklforge/rng.hpp"
#include "support/oracles.hpp"
#include "support/test_instances.hpp"

using mklforge::BaseKernelBank;
using mklforge::CombinationParams;
using mklforge::KernelSpec;
using mklforge::Matrix;
using mklforge::Rng;
using mklforge::SymMatrix;
using mklforge::Vector;

namespace {

BaseKernelBank identity_bank(int m) {
  return BaseKernelBank({KernelSpec::linear()}, {SymMatrix::identity(m)});
}

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

}  // namespace

TEST_CASE("objective closed form on the identity kernel") {
  const auto bank = identity_bank(2);
  Vector y(2);
  y << 1.0, 1.0;
  REQUIRE(mklforge::krr_objective(bank, {vec1(1.0), 1}, 1.0, y, 0.0) ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE(mklforge::krr_objective(bank, {vec1(1.0), 1}, 1.0, y, 2.0) ==
          Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("fit solves the shifted system and predict applies cross grams") {
  Rng rng(311);
  const auto bank = testsupport::random_gaussian_bank(rng, 12, 3, {0.5, 2.0}, 4);
  const Vector y = testsupport::random_vector(rng, 12);
  Vector mu(2);
  mu << 0.7, 0.3;
  const CombinationParams params{mu, 1};
  const auto model = mklforge::krr_fit(bank, params, 0.1, y);

  const Matrix k = mklforge::combined_gram(bank, params).dense();
  const Vector resid = k * model.alpha + 0.1 * model.alpha - y;
  REQUIRE(resid.norm() <= 1e-9 * y.norm());

  const Vector pred = mklforge::krr_predict(model, bank);
  REQUIRE(pred.size() == 4);
  const Matrix cross = mklforge::combined_cross_gram(bank, params);
  REQUIRE((pred - cross * model.alpha).norm() == 0.0);
}

TEST_CASE("fitted alpha maximizes the regularized dual") {
  // At the maximizer the dual value 2 a'y - a'(K + lambda I)a collapses to
  // y'a, and the objective function reports exactly that number.
  Rng rng(8112);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(12));
    auto bank = testsupport::random_gram_bank(rng, m, 2);
    const Vector y = testsupport::random_vector(rng, m);
    const double lambda = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    Vector mu = testsupport::random_vector(rng, 2).cwiseAbs();

    const CombinationParams params{mu, 1};
    const auto model = mklforge::krr_fit(bank, params, lambda, y);
    const Matrix sys =
        mklforge::combined_gram(bank, params).dense() + lambda * Matrix::Identity(m, m);
    const double dual = 2.0 * model.alpha.dot(y) - model.alpha.dot(sys * model.alpha);
    const double direct = mklforge::krr_objective(bank, params, lambda, y, 0.0);
    REQUIRE(dual == Catch::Approx(direct).epsilon(1e-8));

    // Any perturbed alpha scores no higher.
    const Vector noisy = model.alpha + 0.01 * testsupport::random_vector(rng, m);
    const double worse = 2.0 * noisy.dot(y) - noisy.dot(sys * noisy);
    REQUIRE(worse <= dual + 1e-12);
  }
}

TEST_CASE("gradient closed form at zero weights") {
  const auto bank = identity_bank(2);
  Vector y(2);
  y << 1.0, 1.0;
  const Vector g = mklforge::krr_gradient(bank, {vec1(0.0), 1}, 1.0, y, 0.0);
  REQUIRE(g.size() == 1);
  REQUIRE(g(0) == Catch::Approx(-2.0).margin(1e-12));
}

TEST_CASE("gradient matches central finite differences for both degrees") {
  Rng rng(90210);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(10));
    const int p = 1 + static_cast<int>(rng.below(4));
    std::vector<double> gammas;
    for (int k = 0; k < p; ++k) gammas.push_back(std::exp(rng.uniform(-1.5, 1.5)));
    auto bank = testsupport::random_gaussian_bank(rng, m, 3, gammas);

    const Vector y = testsupport::random_vector(rng, m);
    const double lambda = std::exp(rng.uniform(std::log(1e-2), std::log(2.0)));
    const double beta = (trial % 2 == 0) ? 0.0 : 0.5;
    const int degree = (trial % 4 < 2) ? 1 : 2;
    Vector mu = testsupport::random_vector(rng, p).cwiseAbs() + Vector::Constant(p, 0.05);

    const Vector g = mklforge::krr_gradient(bank, {mu, degree}, lambda, y, beta);
    const Vector fd =
        testsupport::fd_gradient(testsupport::objective_fn(bank, degree, lambda, y, beta), mu);
    for (int k = 0; k < p; ++k)
      REQUIRE(std::abs(g(k) - fd(k)) <= 1e-5 * std::max(1.0, std::abs(fd(k))));
  }
}

TEST_CASE("hessian quadratic form closed forms") {
  const auto bank = identity_bank(2);
  const Vector y0 = Vector::Zero(2);
  // Zero labels give alpha = 0, so only the ridge term can contribute.
  REQUIRE(mklforge::krr_hessian_quadratic_form(bank, {vec1(1.0), 2}, 1.0, y0, 0.0, vec1(1.0)) ==
          Catch::Approx(0.0).margin(1e-14));
  REQUIRE(mklforge::krr_hessian_quadratic_form(bank, {vec1(1.0), 1}, 1.0, y0, 1.0, vec1(1.0)) ==
          Catch::Approx(2.0).margin(1e-14));

  Vector not_unit(1);
  not_unit << 2.0;
  REQUIRE_THROWS_AS(
      mklforge::krr_hessian_quadratic_form(bank, {vec1(1.0), 1}, 1.0, y0, 0.0, not_unit),
      mklforge::InvalidArgument);
}

TEST_CASE("hessian quadratic form matches second finite differences for both degrees") {
  // The leading constants here were fixed by this check: for the linear
  // family the correct mixed second derivative carries a factor 2 on the
  // K_j (K_mu + lambda I)^-1 K_k term.
  Rng rng(60601);
  for (int trial = 0; trial < 24; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(8));
    const int p = 1 + static_cast<int>(rng.below(3));
    std::vector<double> gammas;
    for (int k = 0; k < p; ++k) gammas.push_back(std::exp(rng.uniform(-1.0, 1.0)));
    auto bank = testsupport::random_gaussian_bank(rng, m, 3, gammas);

    const Vector y = testsupport::random_vector(rng, m);
    const double lambda = std::exp(rng.uniform(std::log(5e-2), std::log(2.0)));
    const double beta = (trial % 2 == 0) ? 0.0 : 0.5;
    const int degree = (trial % 4 < 2) ? 1 : 2;
    Vector mu = testsupport::random_vector(rng, p).cwiseAbs() + Vector::Constant(p, 0.1);
    Vector u = testsupport::random_vector(rng, p);
    u /= u.norm();

    const double quad =
        mklforge::krr_hessian_quadratic_form(bank, {mu, degree}, lambda, y, beta, u);
    const double fd = testsupport::fd_second_directional(
        testsupport::objective_fn(bank, degree, lambda, y, beta), mu, u);
    REQUIRE(std::abs(quad - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("hessian vector product is consistent with the quadratic form") {
  Rng rng(445);
  auto bank = testsupport::random_gaussian_bank(rng, 10, 3, {0.3, 1.0, 3.0});
  const Vector y = testsupport::random_vector(rng, 10);
  Vector mu(3);
  mu << 0.5, 1.0, 0.2;
  for (int degree : {1, 2}) {
    Vector u = testsupport::random_vector(rng, 3);
    u /= u.norm();
    const Vector hu =
        mklforge::krr_hessian_vector_product(bank, {mu, degree}, 0.5, y, 0.25, u);
    const double quad = mklforge::krr_hessian_quadratic_form(bank, {mu, degree}, 0.5, y, 0.25, u);
    REQUIRE(u.dot(hu) == Catch::Approx(quad).epsilon(1e-12));
  }
}

TEST_CASE("krr validates shapes and lambda") {
  const auto bank = identity_bank(3);
  Vector y(2);
  y << 1.0, -1.0;
  REQUIRE_THROWS_AS(mklforge::krr_fit(bank, {vec1(1.0), 1}, 1.0, y), mklforge::DimensionMismatch);
  Vector y3(3);
  y3 << 1.0, -1.0, 0.5;
  REQUIRE_THROWS_AS(mklforge::krr_fit(bank, {vec1(1.0), 1}, 0.0, y3), mklforge::InvalidArgument);
  const auto model = mklforge::krr_fit(bank, {vec1(1.0), 1}, 1.0, y3);
  REQUIRE_THROWS_AS(mklforge::krr_predict(model, bank), mklforge::MissingCrossGrams);
}
