#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "crossq/eigen.hpp"
#include "crossq/qkernel.hpp"
#include "crossq/state_factory.hpp"

using namespace crossq;

namespace {

// Dense reference: build every gate as a 2^d x 2^d matrix and multiply.
CMatrix single_qubit_full(std::size_t d, std::size_t q, const CMatrix& g) {
  CMatrix full = CMatrix::identity(1);
  for (std::size_t k = d; k-- > 0;) full = kron(full, k == q ? g : CMatrix::identity(2));
  return full;
}

CMatrix rx(double t) {
  CMatrix m(2, 2);
  m(0, 0) = m(1, 1) = std::cos(t / 2);
  m(0, 1) = m(1, 0) = Complex(0, -std::sin(t / 2));
  return m;
}

CMatrix ry(double t) {
  CMatrix m(2, 2);
  m(0, 0) = m(1, 1) = std::cos(t / 2);
  m(0, 1) = -std::sin(t / 2);
  m(1, 0) = std::sin(t / 2);
  return m;
}

std::vector<Complex> reference_encode(const std::vector<double>& x, double alpha, int reps) {
  const std::size_t d = x.size(), n = std::size_t{1} << d;
  std::vector<Complex> psi(n, 0.0);
  psi[0] = 1.0;
  auto apply = [&](const CMatrix& u) {
    std::vector<Complex> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i] += u(i, j) * psi[j];
    psi = out;
  };
  for (int r = 0; r < reps; ++r) {
    for (std::size_t q = 0; q < d; ++q) {
      apply(single_qubit_full(d, q, rx(alpha * x[q])));
      apply(single_qubit_full(d, q, ry(alpha * x[q])));
    }
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j + 1; k < d; ++k) {
        // exp(-i phi_j phi_k Z_j Z_k), phi = alpha x
        const double th = (alpha * x[j]) * (alpha * x[k]);
        CMatrix u(n, n);
        for (std::size_t b = 0; b < n; ++b) {
          const double zz = (((b >> j) & 1) ? -1.0 : 1.0) * (((b >> k) & 1) ? -1.0 : 1.0);
          u(b, b) = std::exp(Complex(0, -th * zz));
        }
        apply(u);
      }
  }
  return psi;
}

std::vector<std::vector<double>> random_dm16(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < n; ++k) {
    const auto rho = apply_local_unitary(make_state(draw_family_params({FamilyKind::mems}, rng)), random_local_unitary(rng));
    out.push_back(features(rho));
  }
  return out;
}

}  // namespace

TEST(Encode, ZeroVectorIsGroundState) {
  const std::vector<double> x(16, 0.0);
  const auto psi = encode(x, {});
  EXPECT_EQ(psi[0], Complex(1.0, 0.0));
  for (std::size_t i = 1; i < psi.size(); ++i) ASSERT_EQ(psi[i], Complex(0.0, 0.0));
  EXPECT_EQ(fidelity_kernel(x, x, {}), 1.0);
}

TEST(Encode, SingleQubitClosedForm) {
  const FeatureMapConfig cfg{1, 1.0, 1};
  const std::vector<double> x{std::numbers::pi / 2};
  const auto psi = encode(x, cfg);
  EXPECT_NEAR(std::abs(psi[0] - Complex(0.5, 0.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::norm(psi[0]), 0.5, 1e-12);
  EXPECT_NEAR(fidelity_kernel(x, std::vector<double>{0.0}, cfg), 0.5, 1e-12);
}

TEST(Encode, MatchesDenseGateProduct) {
  Rng rng(5);
  for (std::size_t d : {2u, 3u, 4u, 5u}) {
    for (double alpha : {1.0, std::numbers::pi / 2, 2.7}) {
      for (int reps : {1, 2}) {
        std::vector<double> x(d);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const auto got = encode(x, {d, alpha, reps});
        const auto want = reference_encode(x, alpha, reps);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(std::abs(got[i] - want[i]), 1e-12) << d << ' ' << i;
      }
    }
  }
}

TEST(Encode, NormalizedAndDeterministic) {
  const auto xs = random_dm16(5, 1);
  const FeatureMapConfig cfg{16, std::numbers::pi, 2};
  for (const auto& x : xs) {
    const auto a = encode(x, cfg);
    double norm = 0;
    for (const auto& z : a) norm += std::norm(z);
    EXPECT_NEAR(norm, 1.0, 1e-10);
    EXPECT_EQ(a, encode(x, cfg));
  }
  EXPECT_THROW(encode(std::vector<double>(15, 0.0), cfg), ContractError);
  EXPECT_THROW(fidelity_kernel(xs[0], std::vector<double>(3, 0.0), cfg), ContractError);
  EXPECT_THROW(encode(xs[0], {16, std::numbers::pi, 0}), ContractError);
}

TEST(Gram, SymmetricUnitDiagonalPsd) {
  const auto xs = random_dm16(20, 2);
  const auto k = gram_matrix(xs, FeatureMapConfig{16, std::numbers::pi, 1});
  ASSERT_TRUE(k.symmetric);
  EXPECT_NO_THROW(k.validate(1e-12));
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_NEAR(k(i, i), 1.0, 1e-10);
    for (std::size_t j = 0; j < 20; ++j) {
      EXPECT_GE(k(i, j), 0.0);
      EXPECT_LE(k(i, j), 1.0 + 1e-10);
    }
  }
  EXPECT_GE(min_eigenvalue(k.values), -1e-8);
}

TEST(Gram, EntriesMatchPairwiseKernel) {
  const auto xs = random_dm16(4, 3);
  const auto ys = random_dm16(3, 4);
  const FeatureMapConfig cfg{16, 1.3, 1};
  const auto cross = cross_gram_matrix(xs, ys, cfg);
  ASSERT_EQ(cross.rows(), 3u);
  ASSERT_EQ(cross.cols(), 4u);
  EXPECT_FALSE(cross.symmetric);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(cross(i, j), fidelity_kernel(ys[i], xs[j], cfg), 1e-14);
  EXPECT_NEAR(fidelity_kernel(xs[0], xs[1], cfg), fidelity_kernel(xs[1], xs[0], cfg), 1e-12);
}

TEST(Gram, SingletonAndDuplicates) {
  auto xs = random_dm16(2, 6);
  const auto k1 = gram_matrix(std::vector<std::vector<double>>{xs[0]}, FeatureMapConfig{});
  EXPECT_NEAR(k1(0, 0), 1.0, 1e-10);
  xs.push_back(xs[0]);
  const auto k = gram_matrix(xs, FeatureMapConfig{});
  EXPECT_NEAR(k(0, 2), 1.0, 1e-10);
}

TEST(Gram, BlockModeEqualsCachedMode) {
  const auto xs = random_dm16(9, 7);
  const auto ys = random_dm16(5, 8);
  const FeatureMapConfig cfg{16, std::numbers::pi, 1};
  const std::size_t state_bytes = (std::size_t{1} << 16) * sizeof(Complex);
  for (std::size_t cap : {2 * state_bytes, 5 * state_bytes}) {
    const auto cached = gram_matrix(xs, cfg);
    const auto blocked = gram_matrix(xs, cfg, cap);
    const auto cc = cross_gram_matrix(xs, ys, cfg);
    const auto cb = cross_gram_matrix(xs, ys, cfg, cap);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(cached(i, j), blocked(i, j), 1e-12);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(cc(i, j), cb(i, j), 1e-12);
  }
}

// Every qubit sees the same gates and the ZZ layer couples all pairs, so a
// consistent permutation of feature positions leaves the kernel unchanged.
TEST(Gram, QubitRelabelingInvariance) {
  const auto xs = random_dm16(2, 9);
  const std::vector<std::size_t> perm{3, 15, 0, 7, 1, 12, 9, 4, 2, 14, 6, 11, 5, 13, 10, 8};
  auto permute = [&](const std::vector<double>& x) {
    std::vector<double> y(16);
    for (std::size_t i = 0; i < 16; ++i) y[i] = x[perm[i]];
    return y;
  };
  const FeatureMapConfig cfg{16, std::numbers::pi, 2};
  EXPECT_NEAR(fidelity_kernel(xs[0], xs[1], cfg), fidelity_kernel(permute(xs[0]), permute(xs[1]), cfg), 1e-12);
}

// Werner and Bell-diagonal features have mostly zero entries, so the Gram takes
// the support-restricted path. Its entries must be bit-identical to the dense
// pairwise kernel, and the compact encode must agree with the full gate product.
TEST(Gram, SparseSupportMatchesDenseExactly) {
  Rng rng(21);
  std::vector<std::vector<double>> xs;
  for (auto f : {FamilySpec{FamilyKind::werner, BellKind::psi_minus}, FamilySpec{FamilyKind::werner, BellKind::phi_plus},
                 FamilySpec{FamilyKind::bell_diagonal}})
    for (int k = 0; k < 3; ++k) xs.push_back(features(make_state(draw_family_params(f, rng))));
  xs.push_back(std::vector<double>(16, 0.0));
  auto dense = random_dm16(2, 22);
  dense[1][5] = 0.0;
  xs.insert(xs.end(), dense.begin(), dense.end());

  for (const FeatureMapConfig cfg : {FeatureMapConfig{16, std::numbers::pi, 1}, FeatureMapConfig{16, 5.0, 2}}) {
    const auto k = gram_matrix(xs, cfg);
    const auto c = cross_gram_matrix(xs, dense, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < xs.size(); ++j) EXPECT_EQ(k(i, j), fidelity_kernel(xs[i], xs[j], cfg)) << i << ' ' << j;
    for (std::size_t i = 0; i < dense.size(); ++i)
      for (std::size_t j = 0; j < xs.size(); ++j) EXPECT_EQ(c(i, j), fidelity_kernel(dense[i], xs[j], cfg));
  }

  const std::vector<double> x{0.4, 0.0, -0.7, 0.0, 0.2};
  for (int reps : {1, 2}) {
    const auto got = encode(x, {5, 2.1, reps});
    const auto want = reference_encode(x, 2.1, reps);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(std::abs(got[i] - want[i]), 1e-12) << i;
  }
}
