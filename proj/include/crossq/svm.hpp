#pragma once

// Binary kernel SVM on a precomputed Gram matrix.
//
// The dual  max W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij,
//           0 <= a_i <= C,  sum a_i y_i = 0
// is solved by sequential minimal optimization. Each step picks the pair that
// maximally violates the optimality conditions (second-order rule for the
// partner) and maximizes W exactly along the feasible segment, so W never
// decreases. The loop stops once max_{up} -y G - min_{low} -y G < tol, which
// puts every sample within tol of its KKT condition on y f(x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossq/error.hpp"
#include "crossq/kernel_matrix.hpp"

namespace crossq {

inline constexpr double kSupportThreshold = 1e-8;

struct SmoOptions {
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 50;  // iteration budget is max_passes * max(n, 100) pair updates
  std::uint64_t seed = 0;
};

struct SvmModel {
  std::vector<double> alphas;
  double b = 0.0;
  std::vector<std::size_t> support_idx;
  std::vector<int> train_labels;
  double C = 1.0;
  double tol = 1e-3;
  double platt_A = -1.0;
  double platt_B = 0.0;
  bool single_class = false;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::string kernel_digest;

  std::size_t n_train() const { return train_labels.size(); }

  bool operator==(const SvmModel&) const = default;
};

namespace detail {

inline void check_labels(std::span<const int> y) {
  for (int v : y)
    if (v != 1 && v != -1) throw ContractError("labels must be +1 or -1");
}

}  // namespace detail

// Dual objective W(alpha).
inline double dual_objective(const KernelMatrix& k, std::span<const int> y, std::span<const double> alpha) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lin += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < alpha.size(); ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * k(i, j);
  }
  return lin - 0.5 * quad;
}

// `objective_trace`, when given, receives W after every pair update.
inline SvmModel train_smo(const KernelMatrix& k, std::span<const int> y, const SmoOptions& opt = {},
                          std::vector<double>* objective_trace = nullptr) {
  const std::size_t n = y.size();
  if (!k.values.square() || k.rows() != n) throw ContractError("train_smo: Gram matrix must be n x n with n = |y|");
  if (n < 2) throw ContractError("train_smo: need at least two samples");
  if (!(opt.C > 0.0)) throw ContractError("train_smo: C must be positive");
  if (!(opt.tol > 0.0)) throw ContractError("train_smo: tol must be positive");
  detail::check_labels(y);
  k.validate();
  if (!k.symmetric) throw ContractError("train_smo: Gram matrix must be symmetric");

  SvmModel model;
  model.train_labels.assign(y.begin(), y.end());
  model.C = opt.C;
  model.tol = opt.tol;
  model.seed = opt.seed;
  model.alphas.assign(n, 0.0);

  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!has_pos || !has_neg) {
    const int only = has_pos ? 1 : -1;
    warn("train_smo: all training labels are " + std::to_string(only) + "; returning a constant model");
    model.single_class = true;
    model.b = only;
    return model;
  }

  const double C = opt.C;
  constexpr double kTau = 1e-12;
  std::vector<double>& alpha = model.alphas;
  std::vector<double> grad(n, -1.0);  // G = Q alpha - e
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k(i, j); };
  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < C); };

  const std::size_t budget = static_cast<std::size_t>(std::max(1, opt.max_passes)) * std::max<std::size_t>(n, 100);
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < budget; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t)
      if (in_up(t) && -y[t] * grad[t] > g_max) {
        g_max = -y[t] * grad[t];
        i = t;
      }
    double g_min = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      g_min = std::min(g_min, v);
      const double diff = g_max - v;
      if (i < n && diff > 0) {
        double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (a <= 0) a = kTau;
        const double score = -(diff * diff) / a;
        if (score < best) {
          best = score;
          j = t;
        }
      }
    }
    if (i == n || j == n || g_max - g_min < opt.tol) {
      converged = true;
      break;
    }

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    double a = k(i, i) + k(j, j) - 2.0 * k(i, j);
    if (a <= 0) a = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / a;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      const double delta = (grad[i] - grad[j]) / a;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }

    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
    if (objective_trace) objective_trace->push_back(dual_objective(k, y, alpha));
  }
  model.iterations = iter;
  if (!converged) warn("train_smo: iteration budget exhausted before reaching tol");

  // Offset: average over free vectors, else midpoint of the feasible interval.
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0 && alpha[t] < C) {
      sum_free += -y[t] * grad[t];
      ++n_free;
    }
  // in_up-only samples bound b from below, in_low-only from above.
  if (n_free > 0) {
    model.b = sum_free / static_cast<double>(n_free);
  } else {
    double hi = std::numeric_limits<double>::infinity();
    double lo = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t)) lo = std::max(lo, v);
      if (in_low(t)) hi = std::min(hi, v);
    }
    model.b = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo : hi);
  }

  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > kSupportThreshold) model.support_idx.push_back(t);
  return model;
}

inline double decision(const SvmModel& m, std::span<const double> kernel_row) {
  if (kernel_row.size() != m.n_train())
    throw ContractError("decision: kernel row has " + std::to_string(kernel_row.size()) + " columns, model has " +
                        std::to_string(m.n_train()) + " training samples");
  double f = m.b;
  for (std::size_t j = 0; j < kernel_row.size(); ++j) f += m.alphas[j] * m.train_labels[j] * kernel_row[j];
  return f;
}

inline std::vector<double> decision_values(const SvmModel& m, const KernelMatrix& k_cross) {
  if (k_cross.cols() != m.n_train()) throw ContractError("decision: kernel column count does not match training size");
  std::vector<double> f(k_cross.rows());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = decision(m, k_cross.values.row(i));
  return f;
}

// sign(f) with sign(0) -> -1.
inline int sign_label(double f) { return f > 0.0 ? 1 : -1; }

inline std::vector<int> predict(const SvmModel& m, const KernelMatrix& k_cross) {
  const auto f = decision_values(m, k_cross);
  std::vector<int> out(f.size());
  std::transform(f.begin(), f.end(), out.begin(), sign_label);
  return out;
}

// P(+1 | f) = 1 / (1 + exp(A f + B)), evaluated without overflow.
inline double platt_probability(double f, double a, double b) {
  const double z = a * f + b;
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

struct PlattParams {
  double A = -1.0;
  double B = 0.0;
  bool converged = false;
};

// Newton fit of the sigmoid on decision values with smoothed targets
// t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2); backtracking line search.
inline PlattParams platt_fit_values(std::span<const double> f, std::span<const int> y) {
  if (f.size() != y.size() || f.empty()) throw ContractError("platt_fit: decision values and labels must align");
  detail::check_labels(y);
  const double n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double n_neg = static_cast<double>(y.size()) - n_pos;
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] > 0 ? hi : lo;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  auto objective = [&](double a, double b) {
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double z = f[i] * a + b;
      v += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };

  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = objective(a, b);
  bool converged = false;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double z = f[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) {
      converged = true;
      break;
    }
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) {
      // No further decrease is possible in floating point; the current point is the optimum.
      converged = true;
      break;
    }
  }
  if (!converged) {
    warn("platt_fit: Newton iterations did not converge; using A = -1, B = 0");
    return {};
  }
  if (a > 0.0) {
    warn("platt_fit: fitted slope is positive (probability would fall with f); using A = -1, B = 0");
    return {};
  }
  return {a, b, true};
}

// Fits on the training decision values and stores the result in the model.
inline PlattParams platt_fit(SvmModel& m, const KernelMatrix& k_train, std::span<const int> y) {
  if (y.size() != m.n_train()) throw ContractError("platt_fit: label count does not match model");
  PlattParams p;
  if (m.single_class) {
    p = {};
  } else {
    const auto f = decision_values(m, k_train);
    p = platt_fit_values(f, y);
  }
  m.platt_A = p.A;
  m.platt_B = p.B;
  return p;
}

inline std::vector<double> predict_proba(const SvmModel& m, const KernelMatrix& k_cross) {
  auto f = decision_values(m, k_cross);
  for (auto& v : f) v = platt_probability(v, m.platt_A, m.platt_B);
  return f;
}

// ---------------------------------------------------------------------------
// Model file

inline nlohmann::json to_json(const SvmModel& m) {
  return nlohmann::json{{"alphas", m.alphas},
                        {"b", m.b},
                        {"support_idx", m.support_idx},
                        {"train_labels", m.train_labels},
                        {"C", m.C},
                        {"tol", m.tol},
                        {"platt_A", m.platt_A},
                        {"platt_B", m.platt_B},
                        {"single_class", m.single_class},
                        {"iterations", m.iterations},
                        {"metadata", {{"kernel_digest", m.kernel_digest}, {"seed", m.seed}}}};
}

inline SvmModel svm_model_from_json(const nlohmann::json& j) {
  SvmModel m;
  try {
    j.at("alphas").get_to(m.alphas);
    j.at("b").get_to(m.b);
    j.at("support_idx").get_to(m.support_idx);
    j.at("train_labels").get_to(m.train_labels);
    j.at("C").get_to(m.C);
    m.tol = j.value("tol", 1e-3);
    j.at("platt_A").get_to(m.platt_A);
    j.at("platt_B").get_to(m.platt_B);
    m.single_class = j.value("single_class", false);
    m.iterations = j.value("iterations", std::size_t{0});
    if (j.contains("metadata")) {
      m.kernel_digest = j["metadata"].value("kernel_digest", std::string{});
      m.seed = j["metadata"].value("seed", std::uint64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed SVM model: ") + e.what());
  }
  if (m.alphas.size() != m.train_labels.size()) throw ContractError("malformed SVM model: alphas/labels size mismatch");
  return m;
}

inline void save_model(const SvmModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(m).dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline SvmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return svm_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace crossq
