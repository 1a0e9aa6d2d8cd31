#pragma once

// Analytic labelers: concurrence and geometric discord.

#include <algorithm>
#include <cmath>
#include <vector>

#include "crossq/eigen.hpp"
#include "crossq/state_factory.hpp"

namespace crossq {

inline constexpr double kLabelTol = 1e-9;

// Eigenvalues of rho below this are rounding noise (Jacobi is accurate to
// ~1e-16 absolute); they are zeroed before taking square roots.
inline constexpr double kZeroEigenvalue = 1e-14;

struct EntanglementLabel {
  int value = -1;  // +1 entangled, -1 separable
  double concurrence = 0.0;
};

struct DiscordLabel {
  int value = -1;  // +1 non-zero discord, -1 zero discord
  double discord = 0.0;
};

namespace detail {

inline CMatrix psd_sqrt(const CMatrix& m) {
  const auto eig = hermitian_eigen(m, kHermitianTol);
  const std::size_t n = m.rows();
  CMatrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = eig.values[k];
    if (lam <= kZeroEigenvalue) continue;
    const double s = std::sqrt(lam);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) += s * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
  }
  return out;
}

// Singular values (descending) of a square matrix, read off the spectrum of
// the Hermitian dilation [[0, A], [A^H, 0]] = +/- sigma_k. Avoids the square
// root of a Gram matrix, which loses accuracy for small sigma.
inline std::vector<double> singular_values(const CMatrix& a) {
  const std::size_t n = a.rows();
  CMatrix h(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      h(i, n + j) = a(i, j);
      h(n + j, i) = std::conj(a(i, j));
    }
  const auto eig = hermitian_eigen(h, 1e-10);
  std::vector<double> sv(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto& s : sv) s = std::max(0.0, s);
  return sv;
}

}  // namespace detail

// Spin-flipped state (sy x sy) rho* (sy x sy).
inline CMatrix spin_flip(const CMatrix& rho) {
  const CMatrix& yy = pauli::pair(2, 2);
  CMatrix conj_rho(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) conj_rho(i, j) = std::conj(rho(i, j));
  return yy * conj_rho * yy;
}

// C = max(0, l1 - l2 - l3 - l4), l_k the descending square roots of the
// spectrum of sqrt(rho) rho~ sqrt(rho). These are the singular values of
// sqrt(rho) sqrt(rho~), and sqrt(rho~) = Y conj(sqrt(rho)) Y.
inline double concurrence(const DensityMatrix& rho) {
  const CMatrix root = detail::psd_sqrt(rho.matrix());
  const CMatrix root_flip = spin_flip(root);
  const auto lam = detail::singular_values(root * root_flip);
  const double c = lam[0] - lam[1] - lam[2] - lam[3];
  return std::clamp(c, 0.0, 1.0);
}

// Bell-diagonal closed form: 1/4 (t11^2 + t22^2 + t33^2 - max t_ii^2).
inline double geometric_discord_bd(double t11, double t22, double t33) {
  const double a = t11 * t11, b = t22 * t22, c = t33 * t33;
  return 0.25 * (a + b + c - std::max({a, b, c}));
}

// D_G = 1/4 (|a|^2 + tr(T T^T) - lambda_max(a a^T + T T^T)).
inline double geometric_discord(const DensityMatrix& rho) {
  const auto bf = to_bloch(rho);
  RMatrix k(3, 3);
  double a2 = 0.0;
  double t2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    a2 += bf.a[i] * bf.a[i];
    for (std::size_t j = 0; j < 3; ++j) {
      t2 += bf.t[i][j] * bf.t[i][j];
      double tt = 0.0;
      for (std::size_t l = 0; l < 3; ++l) tt += bf.t[i][l] * bf.t[j][l];
      k(i, j) = bf.a[i] * bf.a[j] + tt;
    }
  }
  const double lmax = hermitian_eigen(k).values.front();
  const double d = 0.25 * (a2 + t2 - lmax);
  if (d < -1e-12) throw NumericalError("geometric_discord: negative result " + std::to_string(d));
  return std::max(0.0, d);
}

inline EntanglementLabel entanglement_label(const DensityMatrix& rho) {
  const double c = concurrence(rho);
  return {c > kLabelTol ? 1 : -1, c};
}

inline DiscordLabel discord_label(const DensityMatrix& rho) {
  const double d = geometric_discord(rho);
  return {d > kLabelTol ? 1 : -1, d};
}

enum class Task { entanglement, discord };

inline std::string_view to_string(Task t) { return t == Task::entanglement ? "entanglement" : "discord"; }

inline Task parse_task(std::string_view s) {
  if (s == "entanglement") return Task::entanglement;
  if (s == "discord") return Task::discord;
  throw ParameterError("unknown task '" + std::string(s) + "'");
}

// Fills the label for `task` on every record; returns the underlying measure values.
inline std::vector<double> label_records(std::vector<StateRecord>& records, Task task) {
  std::vector<double> measure(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (task == Task::entanglement) {
      const auto l = entanglement_label(records[i].dm);
      records[i].label_ent = l.value;
      measure[i] = l.concurrence;
    } else {
      const auto l = discord_label(records[i].dm);
      records[i].label_discord = l.value;
      measure[i] = l.discord;
    }
  }
  return measure;
}

inline int task_label(const StateRecord& r, Task task) {
  const auto& l = task == Task::entanglement ? r.label_ent : r.label_discord;
  if (!l) throw ContractError("record " + std::to_string(r.id) + " has no " + std::string(to_string(task)) + " label");
  return *l;
}

}  // namespace crossq
