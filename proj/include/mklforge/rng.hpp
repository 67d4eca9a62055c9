#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mklforge/errors.hpp"

// Seeded randomness with portable output. std::mt19937_64 has a fully
// specified bit stream, but the standard distributions do not, so all
// variate generation here is hand-rolled on top of the raw 64-bit draws.
// Identical seeds therefore give identical results on every platform.

namespace mklforge {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Decorrelates the root seed into independent per-stream seeds. Used to
// give each split / fold / sample its own generator so that results do
// not depend on evaluation order or thread count.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t s = root ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("Rng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::VectorXd normal_vector(Eigen::Index p) {
    Eigen::VectorXd v(p);
    for (Eigen::Index i = 0; i < p; ++i) v(i) = normal();
    return v;
  }

  // Uniform on the Euclidean unit sphere in R^p.
  Eigen::VectorXd unit_sphere(Eigen::Index p) {
    for (;;) {
      Eigen::VectorXd v = normal_vector(p);
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

  // Uniform on the l1 unit sphere in R^p (Dirichlet magnitudes, random signs).
  Eigen::VectorXd l1_sphere(Eigen::Index p) {
    Eigen::VectorXd v(p);
    for (;;) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        double u = uniform01();
        while (u <= 0.0) u = uniform01();
        const double e = -std::log(u);
        v(i) = e;
        total += e;
      }
      if (total <= 1e-12) continue;
      for (Eigen::Index i = 0; i < p; ++i) {
        v(i) /= total;
        if (gen_() & 1ULL) v(i) = -v(i);
      }
      return v;
    }
  }

  // Fisher-Yates permutation of {0, ..., m-1}.
  std::vector<int> permutation(int m) {
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = m - 1; i > 0; --i) {
      const int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(idx[i], idx[j]);
    }
    return idx;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mklforge
