#pragma once

// Two-qubit state families, their Bloch representation, local rotations, and
// the feature vectors fed to the kernels.
//
// Basis order is |00>, |01>, |10>, |11>. Bell states follow
//   psi(+/-) = (|00> +/- |11>)/sqrt2,   phi(+/-) = (|01> +/- |10>)/sqrt2,
// so in correlation-matrix coordinates psi- sits at diag(-1, 1, 1), psi+ at
// diag(1, -1, 1), phi- at diag(-1, -1, -1) and phi+ at diag(1, 1, -1).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crossq/eigen.hpp"
#include "crossq/error.hpp"
#include "crossq/matrix.hpp"
#include "crossq/rng.hpp"

namespace crossq {

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kBellDiagonalSlack = 1e-12;
inline constexpr std::size_t kRejectionBudget = 1'000'000;

// ---------------------------------------------------------------------------
// Pauli matrices

namespace pauli {

inline CMatrix identity() { return CMatrix::identity(2); }

// index 0 -> identity, 1..3 -> sigma_x, sigma_y, sigma_z
inline CMatrix sigma(int i) {
  CMatrix m(2, 2);
  switch (i) {
    case 0: m(0, 0) = 1.0; m(1, 1) = 1.0; break;
    case 1: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
    case 2: m(0, 1) = Complex(0, -1); m(1, 0) = Complex(0, 1); break;
    case 3: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    default: throw ContractError("pauli::sigma: index must be in 0..3");
  }
  return m;
}

// sigma_i (x) sigma_j with 0 meaning identity.
inline const CMatrix& pair(int i, int j) {
  static const auto table = [] {
    std::array<CMatrix, 16> t;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) t[a * 4 + b] = kron(sigma(a), sigma(b));
    return t;
  }();
  return table.at(static_cast<std::size_t>(i * 4 + j));
}

}  // namespace pauli

// ---------------------------------------------------------------------------
// Domain types

enum class BellKind { psi_minus, psi_plus, phi_minus, phi_plus };

inline constexpr std::array<BellKind, 4> kAllBellKinds = {BellKind::psi_minus, BellKind::psi_plus, BellKind::phi_minus,
                                                           BellKind::phi_plus};

inline std::string_view to_string(BellKind k) {
  switch (k) {
    case BellKind::psi_minus: return "psi-minus";
    case BellKind::psi_plus: return "psi-plus";
    case BellKind::phi_minus: return "phi-minus";
    case BellKind::phi_plus: return "phi-plus";
  }
  return "?";
}

// Accepts both "psi-minus" and "psi_minus".
inline BellKind parse_bell_kind(std::string_view s) {
  std::string norm(s);
  for (auto& c : norm)
    if (c == '_') c = '-';
  for (auto k : kAllBellKinds)
    if (to_string(k) == norm) return k;
  throw ParameterError("unknown Bell state '" + std::string(s) + "'");
}

class DensityMatrix {
 public:
  // Validates Hermiticity, unit trace and positivity.
  static DensityMatrix from_matrix(CMatrix m) {
    validate(m);
    return DensityMatrix(std::move(m));
  }

  // 32 reals: row-major, interleaved (re, im).
  static DensityMatrix from_interleaved(std::span<const double> v) {
    if (v.size() != 32) throw ContractError("density matrix needs 32 interleaved reals, got " + std::to_string(v.size()));
    CMatrix m(4, 4);
    for (std::size_t k = 0; k < 16; ++k) m(k / 4, k % 4) = Complex(v[2 * k], v[2 * k + 1]);
    return from_matrix(std::move(m));
  }

  static DensityMatrix maximally_mixed() {
    CMatrix m(4, 4);
    for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.25;
    return DensityMatrix(std::move(m));
  }

  std::vector<double> interleaved() const {
    std::vector<double> out;
    out.reserve(32);
    for (const auto& z : m_.data()) {
      out.push_back(z.real());
      out.push_back(z.imag());
    }
    return out;
  }

  const CMatrix& matrix() const { return m_; }
  Complex operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  std::vector<double> eigenvalues() const { return hermitian_eigen(m_).values; }

  bool operator==(const DensityMatrix&) const = default;

  static void validate(const CMatrix& m) {
    if (m.rows() != 4 || m.cols() != 4) throw ContractError("density matrix must be 4x4");
    for (const auto& z : m.data())
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ContractError("density matrix has non-finite entry");
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i; j < 4; ++j)
        if (std::abs(m(i, j) - std::conj(m(j, i))) > kHermitianTol)
          throw InfeasibleError("density matrix is not Hermitian");
    if (std::abs(trace(m) - 1.0) > kTraceTol) throw InfeasibleError("density matrix trace differs from 1");
    const double lo = min_eigenvalue(m, kHermitianTol);
    if (lo < -kPsdTol) throw InfeasibleError("density matrix is not positive semidefinite (min eigenvalue " +
                                             std::to_string(lo) + ")");
  }

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

// rho = 1/4 (I + sum a_i s_i x I + sum b_j I x s_j + sum t_ij s_i x s_j)
struct BlochForm {
  std::array<double, 3> a{};
  std::array<double, 3> b{};
  std::array<std::array<double, 3>, 3> t{};

  bool operator==(const BlochForm&) const = default;
};

struct WernerParams {
  BellKind kind = BellKind::psi_minus;
  double p = 0.0;
  bool operator==(const WernerParams&) const = default;
};

struct HorodeckiParams {
  BellKind kind = BellKind::phi_plus;
  double p = 0.0;
  bool operator==(const HorodeckiParams&) const = default;
};

struct MemsParams {
  double q = 0, r = 0, s = 0, t = 0, lambda = 0;
  bool operator==(const MemsParams&) const = default;
};

struct BellDiagonalParams {
  double t11 = 0, t22 = 0, t33 = 0;
  bool operator==(const BellDiagonalParams&) const = default;
};

using FamilyParams = std::variant<WernerParams, HorodeckiParams, MemsParams, BellDiagonalParams>;

// U(theta1) (x) U(theta2) with U(theta) = [[cos, -sin], [sin, cos]].
struct LocalUnitary {
  double theta1 = 0.0;
  double theta2 = 0.0;

  CMatrix matrix() const {
    auto rot = [](double th) {
      CMatrix u(2, 2);
      u(0, 0) = std::cos(th);
      u(0, 1) = -std::sin(th);
      u(1, 0) = std::sin(th);
      u(1, 1) = std::cos(th);
      return u;
    };
    return kron(rot(theta1), rot(theta2));
  }

  bool operator==(const LocalUnitary&) const = default;
};

struct StateRecord {
  std::int64_t id = 0;
  FamilyParams family;
  DensityMatrix dm = DensityMatrix::maximally_mixed();
  std::optional<int> label_ent;
  std::optional<int> label_discord;
  // Set when dm is a locally rotated version of the family state.
  std::optional<LocalUnitary> rotation;

  bool operator==(const StateRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Constructors

inline std::array<Complex, 4> bell_vector(BellKind kind) {
  const double h = std::numbers::sqrt2 / 2.0;
  switch (kind) {
    case BellKind::psi_minus: return {h, 0, 0, -h};
    case BellKind::psi_plus: return {h, 0, 0, h};
    case BellKind::phi_minus: return {0, h, -h, 0};
    case BellKind::phi_plus: return {0, h, h, 0};
  }
  return {};
}

namespace detail {

inline CMatrix bell_projector(BellKind kind) {
  const auto v = bell_vector(kind);
  CMatrix m(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = v[i] * std::conj(v[j]);
  return m;
}

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(what) + ": p must lie in [0, 1], got " + std::to_string(p));
}

}  // namespace detail

inline DensityMatrix make_bell(BellKind kind) { return DensityMatrix::from_matrix(detail::bell_projector(kind)); }

inline DensityMatrix make_werner(BellKind kind, double p) {
  detail::check_probability(p, "make_werner");
  CMatrix m = detail::bell_projector(kind);
  for (auto& z : m.data()) z *= p;
  for (std::size_t i = 0; i < 4; ++i) m(i, i) += (1.0 - p) / 4.0;
  return DensityMatrix::from_matrix(std::move(m));
}

inline DensityMatrix make_horodecki(BellKind kind, double p) {
  detail::check_probability(p, "make_horodecki");
  CMatrix m = detail::bell_projector(kind);
  for (auto& z : m.data()) z *= p;
  m(0, 0) += 1.0 - p;
  return DensityMatrix::from_matrix(std::move(m));
}

inline DensityMatrix make_mems(double q, double r, double s, double t, double lambda) {
  for (double x : {q, r, s, t, lambda})
    if (!(x >= 0.0)) throw ParameterError("make_mems: all parameters must be non-negative");
  const double sum = q + r + s + t + lambda;
  if (std::abs(sum - 1.0) > kSimplexTol)
    throw ParameterError("make_mems: q + r + s + t + lambda must equal 1, got " + std::to_string(sum));
  CMatrix m(4, 4);
  m(0, 0) = q + lambda / 2.0;
  m(1, 1) = s;
  m(2, 2) = t;
  m(3, 3) = r + lambda / 2.0;
  m(0, 3) = lambda / 2.0;
  m(3, 0) = lambda / 2.0;
  return DensityMatrix::from_matrix(std::move(m));
}

// Returns the name of the first violated positivity inequality, or empty.
inline std::string bell_diagonal_violation(double t11, double t22, double t33, double slack = kBellDiagonalSlack) {
  if (1 - t11 + t22 + t33 < -slack) return "1 - t11 + t22 + t33 >= 0";
  if (1 + t11 - t22 + t33 < -slack) return "1 + t11 - t22 + t33 >= 0";
  if (1 + t11 + t22 - t33 < -slack) return "1 + t11 + t22 - t33 >= 0";
  if (1 - t11 - t22 - t33 < -slack) return "1 - t11 - t22 - t33 >= 0";
  return {};
}

inline DensityMatrix make_bell_diagonal(double t11, double t22, double t33) {
  for (double x : {t11, t22, t33})
    if (!std::isfinite(x)) throw ParameterError("make_bell_diagonal: non-finite correlation");
  if (auto v = bell_diagonal_violation(t11, t22, t33); !v.empty())
    throw InfeasibleError("make_bell_diagonal: violates " + v);
  CMatrix m(4, 4);
  const std::array<double, 3> t{t11, t22, t33};
  for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.25;
  for (int k = 0; k < 3; ++k) {
    const auto& ss = pauli::pair(k + 1, k + 1);
    for (std::size_t i = 0; i < 16; ++i) m.data()[i] += 0.25 * t[static_cast<std::size_t>(k)] * ss.data()[i];
  }
  return DensityMatrix::from_matrix(std::move(m));
}

inline DensityMatrix make_state(const FamilyParams& f) {
  return std::visit(
      [](const auto& v) -> DensityMatrix {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WernerParams>) return make_werner(v.kind, v.p);
        else if constexpr (std::is_same_v<T, HorodeckiParams>) return make_horodecki(v.kind, v.p);
        else if constexpr (std::is_same_v<T, MemsParams>) return make_mems(v.q, v.r, v.s, v.t, v.lambda);
        else return make_bell_diagonal(v.t11, v.t22, v.t33);
      },
      f);
}

// ---------------------------------------------------------------------------
// Bloch form

inline BlochForm to_bloch(const DensityMatrix& rho) {
  auto expect = [&](int i, int j) {
    const auto& op = pauli::pair(i, j);
    Complex acc = 0;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) acc += rho(r, c) * op(c, r);
    return acc.real();
  };
  BlochForm bf;
  for (int i = 0; i < 3; ++i) {
    bf.a[i] = expect(i + 1, 0);
    bf.b[i] = expect(0, i + 1);
    for (int j = 0; j < 3; ++j) bf.t[i][j] = expect(i + 1, j + 1);
  }
  return bf;
}

inline CMatrix bloch_matrix(const BlochForm& bf) {
  CMatrix m(4, 4);
  auto add = [&](int i, int j, double w) {
    const auto& op = pauli::pair(i, j);
    for (std::size_t k = 0; k < 16; ++k) m.data()[k] += 0.25 * w * op.data()[k];
  };
  add(0, 0, 1.0);
  for (int i = 0; i < 3; ++i) {
    add(i + 1, 0, bf.a[i]);
    add(0, i + 1, bf.b[i]);
    for (int j = 0; j < 3; ++j) add(i + 1, j + 1, bf.t[i][j]);
  }
  return m;
}

// Throws InfeasibleError when the parameters do not describe a positive operator.
inline DensityMatrix from_bloch(const BlochForm& bf) {
  CMatrix m = bloch_matrix(bf);
  const double lo = min_eigenvalue(m);
  if (lo < -kPsdTol) throw InfeasibleError("from_bloch: parameters give a non-positive operator (min eigenvalue " +
                                           std::to_string(lo) + ")");
  return DensityMatrix::from_matrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Local unitaries

inline DensityMatrix apply_local_unitary(const DensityMatrix& rho, const LocalUnitary& u) {
  const CMatrix U = u.matrix();
  CMatrix out = U * rho.matrix() * adjoint(U);
  // Restore exact Hermiticity lost to rounding.
  for (std::size_t i = 0; i < 4; ++i) {
    out(i, i) = out(i, i).real();
    for (std::size_t j = i + 1; j < 4; ++j) {
      const Complex avg = 0.5 * (out(i, j) + std::conj(out(j, i)));
      out(i, j) = avg;
      out(j, i) = std::conj(avg);
    }
  }
  return DensityMatrix::from_matrix(std::move(out));
}

inline LocalUnitary random_local_unitary(Rng& rng) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double t1 = rng.uniform(0.0, two_pi);
  const double t2 = rng.uniform(0.0, two_pi);
  return {t1, t2};
}

// ---------------------------------------------------------------------------
// Features

enum class FeatureScheme { dm16, bloch15 };

inline std::string_view to_string(FeatureScheme s) { return s == FeatureScheme::dm16 ? "dm16" : "bloch15"; }

inline FeatureScheme parse_feature_scheme(std::string_view s) {
  if (s == "dm16") return FeatureScheme::dm16;
  if (s == "bloch15") return FeatureScheme::bloch15;
  throw ParameterError("unknown feature scheme '" + std::string(s) + "'");
}

inline constexpr std::size_t feature_length(FeatureScheme s) { return s == FeatureScheme::dm16 ? 16 : 15; }

inline constexpr std::array<std::pair<std::size_t, std::size_t>, 6> kUpperPairs = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

// dm16: diagonal reals, then (re, im) for each upper off-diagonal pair in
// the order (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
// bloch15: a1..a3, b1..b3, t11, t12, ..., t33 row-major.
inline std::vector<double> features(const DensityMatrix& rho, FeatureScheme scheme = FeatureScheme::dm16) {
  std::vector<double> f;
  if (scheme == FeatureScheme::dm16) {
    f.reserve(16);
    for (std::size_t i = 0; i < 4; ++i) f.push_back(rho(i, i).real());
    for (auto [i, j] : kUpperPairs) {
      f.push_back(rho(i, j).real());
      f.push_back(rho(i, j).imag());
    }
  } else {
    const auto bf = to_bloch(rho);
    f.reserve(15);
    f.insert(f.end(), bf.a.begin(), bf.a.end());
    f.insert(f.end(), bf.b.begin(), bf.b.end());
    for (const auto& row : bf.t) f.insert(f.end(), row.begin(), row.end());
  }
  return f;
}

// Inverse of the dm16 layout for Hermitian matrices.
inline CMatrix matrix_from_dm16(std::span<const double> f) {
  if (f.size() != 16) throw ContractError("matrix_from_dm16: need 16 features");
  CMatrix m(4, 4);
  for (std::size_t i = 0; i < 4; ++i) m(i, i) = f[i];
  std::size_t k = 4;
  for (auto [i, j] : kUpperPairs) {
    m(i, j) = Complex(f[k], f[k + 1]);
    m(j, i) = Complex(f[k], -f[k + 1]);
    k += 2;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sampling

enum class FamilyKind { werner, horodecki, mems, bell_diagonal };

inline std::string_view to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::werner: return "werner";
    case FamilyKind::horodecki: return "horodecki";
    case FamilyKind::mems: return "mems";
    case FamilyKind::bell_diagonal: return "bell-diagonal";
  }
  return "?";
}

inline FamilyKind parse_family_kind(std::string_view s) {
  std::string norm(s);
  for (auto& c : norm)
    if (c == '_') c = '-';
  for (auto k : {FamilyKind::werner, FamilyKind::horodecki, FamilyKind::mems, FamilyKind::bell_diagonal})
    if (to_string(k) == norm) return k;
  throw ParameterError("unknown state family '" + std::string(s) + "'");
}

inline FamilyKind family_kind(const FamilyParams& f) { return static_cast<FamilyKind>(f.index()); }

// Parameter ranges for one family. Only the fields relevant to `kind` are used.
struct FamilySpec {
  FamilyKind kind = FamilyKind::werner;
  BellKind bell = BellKind::psi_minus;
  double p_min = 0.0;
  double p_max = 1.0;
  double t_min = -1.0;
  double t_max = 1.0;

  bool operator==(const FamilySpec&) const = default;
};

// Draws the family parameters for one record from its own stream.
inline FamilyParams draw_family_params(const FamilySpec& spec, Rng& rng) {
  switch (spec.kind) {
    case FamilyKind::werner: return WernerParams{spec.bell, rng.uniform(spec.p_min, spec.p_max)};
    case FamilyKind::horodecki: return HorodeckiParams{spec.bell, rng.uniform(spec.p_min, spec.p_max)};
    case FamilyKind::mems: {
      // Uniform on the 4-simplex: gaps between sorted uniforms.
      std::array<double, 4> cut{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      std::sort(cut.begin(), cut.end());
      MemsParams m{cut[0], cut[1] - cut[0], cut[2] - cut[1], cut[3] - cut[2], 1.0 - cut[3]};
      return m;
    }
    case FamilyKind::bell_diagonal: {
      for (std::size_t draw = 0; draw < kRejectionBudget; ++draw) {
        const double t11 = rng.uniform(spec.t_min, spec.t_max);
        const double t22 = rng.uniform(spec.t_min, spec.t_max);
        const double t33 = rng.uniform(spec.t_min, spec.t_max);
        if (bell_diagonal_violation(t11, t22, t33, 0.0).empty()) return BellDiagonalParams{t11, t22, t33};
      }
      throw SamplingExhaustedError("sample_family: no feasible Bell-diagonal point in t-range [" +
                                   std::to_string(spec.t_min) + ", " + std::to_string(spec.t_max) + "] after " +
                                   std::to_string(kRejectionBudget) + " draws");
    }
  }
  throw ContractError("unknown family kind");
}

inline void validate_family_spec(const FamilySpec& spec) {
  if (spec.kind == FamilyKind::werner || spec.kind == FamilyKind::horodecki) {
    if (!(spec.p_min >= 0.0 && spec.p_max <= 1.0 && spec.p_min <= spec.p_max))
      throw ParameterError("p-range must satisfy 0 <= p_min <= p_max <= 1");
  }
  if (spec.kind == FamilyKind::bell_diagonal) {
    if (!(spec.t_min >= -1.0 && spec.t_max <= 1.0 && spec.t_min <= spec.t_max))
      throw ParameterError("t-range must satisfy -1 <= t_min <= t_max <= 1");
  }
}

// n records with ids first_id, first_id+1, ...; labels left unset. Record k
// uses stream (seed, k), so output does not depend on worker count.
inline std::vector<StateRecord> sample_family(const FamilySpec& spec, std::size_t n, std::uint64_t seed,
                                              std::int64_t first_id = 0) {
  if (n == 0) throw ParameterError("sample_family: n must be at least 1");
  validate_family_spec(spec);
  std::vector<StateRecord> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto rng = Rng::stream(seed, k);
    auto params = draw_family_params(spec, rng);
    out[k] = StateRecord{first_id + static_cast<std::int64_t>(k), params, make_state(params), {}, {}, {}};
  }
  return out;
}

// Bell-diagonal states with exactly one non-zero correlation: axis uniform over
// {1, 2, 3}, value uniform over [lo, hi].
inline std::vector<StateRecord> sample_zero_discord_bd(double lo, double hi, std::size_t n, std::uint64_t seed,
                                                       std::int64_t first_id = 0) {
  if (!(lo >= -1.0 && hi <= 1.0 && lo <= hi)) throw ParameterError("sample_zero_discord_bd: range must lie in [-1, 1]");
  std::vector<StateRecord> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto rng = Rng::stream(seed, k);
    const auto axis = rng.below(3);
    double value = rng.uniform(lo, hi);
    if (value == 0.0) value = hi != 0.0 ? hi : lo;  // keep exactly one axis non-zero
    std::array<double, 3> t{0.0, 0.0, 0.0};
    t[axis] = value;
    BellDiagonalParams params{t[0], t[1], t[2]};
    out[k] = StateRecord{first_id + static_cast<std::int64_t>(k), params, make_state(params), {}, {}, {}};
  }
  return out;
}

}  // namespace crossq
