#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "crossq/error.hpp"
#include "crossq/matrix.hpp"

namespace crossq {

template <typename T>
struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix<T> vectors;           // column k pairs with values[k]
};

namespace detail {

inline double unit_phase(double x) { return x < 0.0 ? -1.0 : 1.0; }
inline Complex unit_phase(const Complex& z) { return z / std::abs(z); }

template <typename T>
double offdiag_norm(const Matrix<T>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi eigensolver for real symmetric or complex Hermitian matrices.
//
// Each rotation first removes the phase of the pivot a_pq with diag(1, e^{-i phi})
// and then applies the classical real rotation. Sweeps stop once the
// off-diagonal Frobenius norm drops below 1e-13 (relative to max(1, |A|_F)) or
// after 100 sweeps. Eigenvalues come back in descending order.
template <typename T>
EigenDecomposition<T> hermitian_eigen(const Matrix<T>& m, double hermitian_tol = 1e-10) {
  if (!m.square() || m.rows() == 0) throw ContractError("hermitian_eigen: matrix must be square and non-empty");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      if (!std::isfinite(std::abs(m(i, j)))) throw ContractError("hermitian_eigen: non-finite entry");
      if (std::abs(m(i, j) - conj(m(j, i))) > hermitian_tol)
        throw ContractError("hermitian_eigen: matrix is not Hermitian at (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
    }

  Matrix<T> a = m;
  Matrix<T> v = Matrix<T>::identity(n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = T{std::real(a(i, i))};

  double total = 0.0;
  for (auto x : a.data()) total += std::norm(x);
  const double stop = 1e-13 * std::max(1.0, std::sqrt(total));

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps && detail::offdiag_norm(a) >= stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag < 1e-300) continue;
        const T phase = detail::unit_phase(a(p, q));
        const double app = std::real(a(p, p));
        const double aqq = std::real(a(q, q));
        const double theta = (aqq - app) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // V restricted to (p, q): [[c, s], [-conj(phase) s, conj(phase) c]]
        const T vpp = T{c};
        const T vpq = T{s};
        const T vqp = -conj(phase) * s;
        const T vqq = conj(phase) * c;

        for (std::size_t k = 0; k < n; ++k) {  // A <- A V
          const T akp = a(k, p);
          const T akq = a(k, q);
          a(k, p) = akp * vpp + akq * vqp;
          a(k, q) = akp * vpq + akq * vqq;
        }
        for (std::size_t k = 0; k < n; ++k) {  // A <- V^H A
          const T apk = a(p, k);
          const T aqk = a(q, k);
          a(p, k) = conj(vpp) * apk + conj(vqp) * aqk;
          a(q, k) = conj(vpq) * apk + conj(vqq) * aqk;
        }
        a(p, q) = T{};
        a(q, p) = T{};
        a(p, p) = T{std::real(a(p, p))};
        a(q, q) = T{std::real(a(q, q))};

        for (std::size_t k = 0; k < n; ++k) {  // vectors <- vectors V
          const T vkp = v(k, p);
          const T vkq = v(k, q);
          v(k, p) = vkp * vpp + vkq * vqp;
          v(k, q) = vkp * vpq + vkq * vqq;
        }
      }
    }
  }
  if (detail::offdiag_norm(a) >= stop && detail::offdiag_norm(a) > 1e-9 * std::max(1.0, std::sqrt(total)))
    throw NumericalError("hermitian_eigen: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::real(a(i, i)) > std::real(a(j, j)); });

  EigenDecomposition<T> out{std::vector<double>(n), Matrix<T>(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = std::real(a(order[k], order[k]));
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

template <typename T>
double min_eigenvalue(const Matrix<T>& m, double hermitian_tol = 1e-10) {
  return hermitian_eigen(m, hermitian_tol).values.back();
}

}  // namespace crossq
