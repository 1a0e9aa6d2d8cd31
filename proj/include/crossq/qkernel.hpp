#pragma once

// Statevector simulation of the ZZ + UC feature map and the fidelity kernel
// built from it.
//
// With phi_j = alpha x_j, one layer applies UC(phi_j) = Ry(phi_j) Rx(phi_j) on
// every qubit j, then RZZ(2 phi_j phi_k) = exp(-i phi_j phi_k Z_j Z_k) on every
// pair j < k. The ZZ terms commute and are applied together as one diagonal
// phase.
// Qubit 0 is the least significant bit of the amplitude index.

#include <cmath>
#include <algorithm>
#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "crossq/error.hpp"
#include "crossq/kernel_matrix.hpp"
#include "crossq/matrix.hpp"

namespace crossq {

struct FeatureMapConfig {
  std::size_t d = 16;                    // qubits = feature length
  double alpha = std::numbers::pi / 2;  // radians per unit feature
  int reps = 2;

  void validate() const {
    if (d < 1 || d > 26) throw ContractError("feature map: qubit count must be in [1, 26]");
    if (reps < 1) throw ContractError("feature map: reps must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ContractError("feature map: alpha must be positive");
  }

  bool operator==(const FeatureMapConfig&) const = default;
};

using StateVector = std::vector<Complex>;

namespace detail {

// 2x2 gate [[m00, m01], [m10, m11]] on qubit q.
inline void apply_single_qubit(StateVector& psi, std::size_t q, const std::array<Complex, 4>& g) {
  const std::size_t stride = std::size_t{1} << q;
  const std::size_t n = psi.size();
  for (std::size_t base = 0; base < n; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const Complex a0 = psi[i];
      const Complex a1 = psi[i + stride];
      psi[i] = g[0] * a0 + g[1] * a1;
      psi[i + stride] = g[2] * a0 + g[3] * a1;
    }
  }
}

// Ry(theta) * Rx(theta).
inline std::array<Complex, 4> uc_gate(double theta) {
  const double c = std::cos(theta / 2);
  const double s = std::sin(theta / 2);
  const Complex mis(0.0, -s);
  // Rx = [[c, -is], [-is, c]], Ry = [[c, -s], [s, c]]
  return {c * c - s * mis, c * mis - s * c, s * c + c * mis, s * mis + c * c};
}

inline double spin(std::size_t bits, std::size_t q) { return ((bits >> q) & 1U) ? -1.0 : 1.0; }

// Diagonal phase exp(-i sum_{j<k} w_jk z_j z_k), w_jk = phi_j phi_k. The
// qubits are split in a low and a high half so the energy of each basis state
// costs O(d) instead of O(d^2).
inline void apply_zz_layer(StateVector& psi, std::span<const double> x, double alpha) {
  const std::size_t d = x.size();
  if (d < 2) return;
  const std::size_t lo_bits = d / 2;
  const std::size_t hi_bits = d - lo_bits;
  const std::size_t n_lo = std::size_t{1} << lo_bits;
  const std::size_t n_hi = std::size_t{1} << hi_bits;
  auto w = [&](std::size_t j, std::size_t k) { return (alpha * x[j]) * (alpha * x[k]); };

  std::vector<double> e_lo(n_lo, 0.0);
  for (std::size_t b = 0; b < n_lo; ++b)
    for (std::size_t j = 0; j < lo_bits; ++j)
      for (std::size_t k = j + 1; k < lo_bits; ++k) e_lo[b] += w(j, k) * spin(b, j) * spin(b, k);

  std::vector<double> e_hi(n_hi, 0.0);
  std::vector<double> field(n_hi * lo_bits, 0.0);  // field[h][j] = sum_k w(j, k) z_k over high k
  for (std::size_t h = 0; h < n_hi; ++h) {
    for (std::size_t j = 0; j < hi_bits; ++j)
      for (std::size_t k = j + 1; k < hi_bits; ++k)
        e_hi[h] += w(lo_bits + j, lo_bits + k) * spin(h, j) * spin(h, k);
    for (std::size_t j = 0; j < lo_bits; ++j)
      for (std::size_t k = 0; k < hi_bits; ++k) field[h * lo_bits + j] += w(j, lo_bits + k) * spin(h, k);
  }

  for (std::size_t h = 0; h < n_hi; ++h) {
    for (std::size_t l = 0; l < n_lo; ++l) {
      double e = e_hi[h] + e_lo[l];
      for (std::size_t j = 0; j < lo_bits; ++j) e += spin(l, j) * field[h * lo_bits + j];
      psi[(h << lo_bits) | l] *= Complex(std::cos(e), -std::sin(e));
    }
  }
}

}  // namespace detail

inline StateVector encode(std::span<const double> x, const FeatureMapConfig& cfg) {
  cfg.validate();
  if (x.size() != cfg.d)
    throw ContractError("encode: feature length " + std::to_string(x.size()) + " does not match qubit count " +
                        std::to_string(cfg.d));
  // Qubits with a zero feature stay in |0>, so the circuit runs on the active
  // qubits only and the amplitudes are scattered back into the full register.
  std::vector<double> xa;
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < cfg.d; ++j)
    if (cfg.alpha * x[j] != 0.0) {
      xa.push_back(x[j]);
      active.push_back(j);
    }
  StateVector small(std::size_t{1} << active.size(), Complex(0.0, 0.0));
  small[0] = 1.0;
  for (int r = 0; r < cfg.reps; ++r) {
    for (std::size_t j = 0; j < xa.size(); ++j) detail::apply_single_qubit(small, j, detail::uc_gate(cfg.alpha * xa[j]));
    detail::apply_zz_layer(small, xa, cfg.alpha);
  }
  if (active.size() == cfg.d) return small;
  StateVector psi(std::size_t{1} << cfg.d, Complex(0.0, 0.0));
  for (std::size_t s = 0; s < small.size(); ++s) {
    std::size_t full = 0;
    for (std::size_t b = 0; b < active.size(); ++b)
      if ((s >> b) & 1U) full |= std::size_t{1} << active[b];
    psi[full] = small[s];
  }
  return psi;
}

namespace detail {

// Running value of <a|b> split over four interleaved lanes. Every caller adds
// the amplitudes in the same order, so a tiled Gram and a single pair produce
// bit-identical fidelities.
struct Overlap {
  double re[4] = {0, 0, 0, 0};
  double im[4] = {0, 0, 0, 0};

  // Adds amplitudes [begin, end); begin must be a multiple of 4.
  void add(const Complex* a, const Complex* b, std::size_t begin, std::size_t end) {
    std::size_t k = begin;
    for (; k + 4 <= end; k += 4)
      for (std::size_t l = 0; l < 4; ++l) {
        const double ar = a[k + l].real(), ai = a[k + l].imag();
        const double br = b[k + l].real(), bi = b[k + l].imag();
        re[l] += ar * br + ai * bi;
        im[l] += ar * bi - ai * br;
      }
    for (std::size_t l = 0; k < end; ++k, ++l) {
      re[l] += a[k].real() * b[k].real() + a[k].imag() * b[k].imag();
      im[l] += a[k].real() * b[k].imag() - a[k].imag() * b[k].real();
    }
  }

  double fidelity() const {
    const double r = (re[0] + re[1]) + (re[2] + re[3]);
    const double i = (im[0] + im[1]) + (im[2] + im[3]);
    return r * r + i * i;
  }
};

}  // namespace detail

inline double state_fidelity(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) throw ContractError("state_fidelity: dimension mismatch");
  detail::Overlap o;
  o.add(a.data(), b.data(), 0, a.size());
  return o.fidelity();
}

// Qubits whose feature is zero are never rotated and carry no ZZ weight, so
// encode(x) vanishes exactly outside the basis states spanned by this mask.
inline std::size_t support_mask(std::span<const double> x, const FeatureMapConfig& cfg) {
  std::size_t mask = 0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (cfg.alpha * x[j] != 0.0) mask |= std::size_t{1} << j;
  return mask;
}

inline double fidelity_kernel(std::span<const double> xi, std::span<const double> xj, const FeatureMapConfig& cfg) {
  if (xi.size() != xj.size()) throw ContractError("fidelity_kernel: feature lengths differ");
  return state_fidelity(encode(xi, cfg), encode(xj, cfg));
}

inline constexpr std::size_t kDefaultCacheCap = std::size_t{4} << 30;  // 4 GiB

namespace detail {

inline std::vector<StateVector> encode_all(std::span<const std::vector<double>> xs, std::size_t begin, std::size_t end,
                                           const FeatureMapConfig& cfg) {
  std::vector<StateVector> out(end - begin);
  const auto count = static_cast<std::ptrdiff_t>(end - begin);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = encode(xs[begin + static_cast<std::size_t>(i)], cfg);
  return out;
}

inline void check_lengths(std::span<const std::vector<double>> xs, std::size_t d) {
  for (const auto& x : xs)
    if (x.size() != d) throw ContractError("gram_matrix: feature length " + std::to_string(x.size()) +
                                           " does not match qubit count " + std::to_string(d));
}

// Overlap restricted to the basis states inside `mask`, visited in increasing
// index order with the same lane per index as Overlap::add. The skipped terms
// are exact zeros, so the result equals the dense sum bit for bit.
inline double masked_fidelity(const StateVector& a, const StateVector& b, std::size_t mask) {
  Overlap o;
  std::size_t s = 0;
  do {
    const std::size_t l = s & 3U;
    o.re[l] += a[s].real() * b[s].real() + a[s].imag() * b[s].imag();
    o.im[l] += a[s].real() * b[s].imag() - a[s].imag() * b[s].real();
    s = (s - mask) & mask;
  } while (s != 0);
  return o.fidelity();
}

// Fills k(i, j) for rows [r0, r0 + rows.size()) and columns [c0, c0 +
// cols.size()); with `symmetric`, only j >= i is computed and mirrored.
// Pairs with a small common support use masked_fidelity. The rest are
// processed in tiles with the amplitudes in chunks, so the statevectors of one
// tile stay in cache while all its pairs are accumulated.
inline void fill_tile_pairs(KernelMatrix& k, const std::vector<StateVector>& rows, std::span<const std::size_t> row_masks,
                            std::size_t r0, const std::vector<StateVector>& cols, std::span<const std::size_t> col_masks,
                            std::size_t c0, bool symmetric) {
  constexpr std::size_t kTile = 16;
  constexpr std::size_t kChunk = 1024;  // amplitudes; 16 KiB per state
  const std::size_t n_amp = rows.empty() ? 0 : rows.front().size();
  const std::size_t tiles_r = (rows.size() + kTile - 1) / kTile;
  const std::size_t tiles_c = (cols.size() + kTile - 1) / kTile;
  const auto n_tiles = static_cast<std::ptrdiff_t>(tiles_r * tiles_c);
  auto sparse = [&](std::size_t i, std::size_t j) {
    return (std::size_t{1} << std::popcount(row_masks[i] & col_masks[j])) * 8 <= n_amp;
  };
  auto skip = [&](std::size_t i, std::size_t j) { return symmetric && c0 + j < r0 + i; };
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < n_tiles; ++t) {
    const std::size_t ti = static_cast<std::size_t>(t) / tiles_c;
    const std::size_t tj = static_cast<std::size_t>(t) % tiles_c;
    const std::size_t i0 = ti * kTile, i1 = std::min(rows.size(), i0 + kTile);
    const std::size_t j0 = tj * kTile, j1 = std::min(cols.size(), j0 + kTile);
    if (symmetric && c0 + j1 <= r0 + i0) continue;  // tile lies below the diagonal
    std::array<Overlap, kTile * kTile> acc{};
    bool any_dense = false;
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = j0; j < j1; ++j) any_dense = any_dense || (!skip(i, j) && !sparse(i, j));
    for (std::size_t a0 = 0; any_dense && a0 < n_amp; a0 += kChunk) {
      const std::size_t a1 = std::min(n_amp, a0 + kChunk);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j)
          if (!skip(i, j) && !sparse(i, j)) acc[(i - i0) * kTile + (j - j0)].add(rows[i].data(), cols[j].data(), a0, a1);
    }
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = j0; j < j1; ++j) {
        if (skip(i, j)) continue;
        const double v = sparse(i, j) ? masked_fidelity(rows[i], cols[j], row_masks[i] & col_masks[j])
                                      : acc[(i - i0) * kTile + (j - j0)].fidelity();
        k.values(r0 + i, c0 + j) = v;
        if (symmetric) k.values(c0 + j, r0 + i) = v;
      }
  }
}

}  // namespace detail

// Without `y`: symmetric |X| x |X| Gram. With `y`: |Y| x |X| cross kernel.
// Every vector is encoded once when the statevectors fit in `cache_cap` bytes;
// otherwise blocks of states are re-encoded as needed. Both modes perform the
// same arithmetic per entry.
inline KernelMatrix gram_matrix(std::span<const std::vector<double>> x, const std::vector<std::vector<double>>* y,
                                const FeatureMapConfig& cfg, std::size_t cache_cap = kDefaultCacheCap) {
  cfg.validate();
  detail::check_lengths(x, cfg.d);
  if (y) detail::check_lengths(*y, cfg.d);
  const std::size_t state_bytes = (std::size_t{1} << cfg.d) * sizeof(Complex);
  const std::span<const std::vector<double>> rows = y ? std::span<const std::vector<double>>(*y) : x;
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = x.size();
  KernelMatrix k{RMatrix(n_rows, n_cols), y == nullptr};

  const std::size_t needed = (y ? n_rows + n_cols : n_cols) * state_bytes;
  const std::size_t block = needed <= cache_cap ? std::max(n_rows, n_cols) : std::max<std::size_t>(1, cache_cap / (2 * state_bytes));

  for (std::size_t r0 = 0; r0 < n_rows; r0 += block) {
    const std::size_t r1 = std::min(n_rows, r0 + block);
    const auto row_states = detail::encode_all(rows, r0, r1, cfg);
    std::vector<std::size_t> row_masks;
    for (std::size_t i = r0; i < r1; ++i) row_masks.push_back(support_mask(rows[i], cfg));
    for (std::size_t c0 = y ? 0 : r0; c0 < n_cols; c0 += block) {
      const std::size_t c1 = std::min(n_cols, c0 + block);
      const bool same = !y && c0 == r0;
      const auto col_states = same ? std::vector<StateVector>{} : detail::encode_all(x, c0, c1, cfg);
      const auto& cs = same ? row_states : col_states;
      std::vector<std::size_t> col_masks;
      for (std::size_t j = c0; j < c1; ++j) col_masks.push_back(support_mask(x[j], cfg));
      detail::fill_tile_pairs(k, row_states, row_masks, r0, cs, col_masks, c0, y == nullptr);
    }
  }
  return k;
}

inline KernelMatrix gram_matrix(std::span<const std::vector<double>> x, const FeatureMapConfig& cfg,
                                std::size_t cache_cap = kDefaultCacheCap) {
  return gram_matrix(x, nullptr, cfg, cache_cap);
}

inline KernelMatrix cross_gram_matrix(std::span<const std::vector<double>> train,
                                      const std::vector<std::vector<double>>& test, const FeatureMapConfig& cfg,
                                      std::size_t cache_cap = kDefaultCacheCap) {
  return gram_matrix(train, &test, cfg, cache_cap);
}

}  // namespace crossq
