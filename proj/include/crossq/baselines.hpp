#pragma once

// Classical baselines: linear and RBF Gram matrices for the SMO solver, and a
// small sigmoid feedforward network trained with binary cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "crossq/error.hpp"
#include "crossq/kernel_matrix.hpp"
#include "crossq/rng.hpp"

namespace crossq {

using FeatureRows = std::vector<std::vector<double>>;

namespace detail {

inline std::size_t common_length(std::span<const std::vector<double>> x, const FeatureRows* y) {
  if (x.empty()) throw ContractError("kernel: empty input");
  const std::size_t d = x.front().size();
  for (const auto& v : x)
    if (v.size() != d) throw ContractError("kernel: inconsistent feature lengths");
  if (y)
    for (const auto& v : *y)
      if (v.size() != d) throw ContractError("kernel: inconsistent feature lengths");
  return d;
}

template <typename F>
KernelMatrix pairwise(std::span<const std::vector<double>> x, const FeatureRows* y, F&& f) {
  common_length(x, y);
  const std::span<const std::vector<double>> rows = y ? std::span<const std::vector<double>>(*y) : x;
  KernelMatrix k{RMatrix(rows.size(), x.size()), y == nullptr};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = y ? 0 : i; j < x.size(); ++j) {
      const double v = f(rows[i], x[j]);
      k.values(i, j) = v;
      if (!y) k.values(j, i) = v;
    }
  return k;
}

}  // namespace detail

// Rows of the result follow `y` when given (cross kernel), else `x`.
inline KernelMatrix linear_kernel(std::span<const std::vector<double>> x, const FeatureRows* y = nullptr) {
  return detail::pairwise(x, y, [](const auto& a, const auto& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  });
}

inline KernelMatrix rbf_kernel(std::span<const std::vector<double>> x, const FeatureRows* y, double gamma) {
  if (!(gamma > 0.0)) throw ContractError("rbf_kernel: gamma must be positive");
  return detail::pairwise(x, y, [gamma](const auto& a, const auto& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-gamma * s);
  });
}

// 1 / (d * var(all feature values)); 1 when the features are constant.
inline double default_gamma(std::span<const std::vector<double>> x) {
  const std::size_t d = detail::common_length(x, nullptr);
  double mean = 0.0;
  std::size_t count = 0;
  for (const auto& v : x)
    for (double f : v) {
      mean += f;
      ++count;
    }
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (const auto& v : x)
    for (double f : v) var += (f - mean) * (f - mean);
  var /= static_cast<double>(count);
  return var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
}

// ---------------------------------------------------------------------------
// Feedforward network: inputs -> n_hidden sigmoid units -> 1 sigmoid output.
// n_hidden = 0 drops the hidden layer (logistic regression).

struct MlpConfig {
  std::size_t n_hidden = 50;
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct MlpModel {
  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  std::vector<double> w1;  // n_hidden x n_in, row-major
  std::vector<double> b1;  // n_hidden
  std::vector<double> w2;  // n_hidden, or n_in without a hidden layer
  double b2 = 0.0;
  std::vector<double> loss_trace;  // mean training cross-entropy after each epoch

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  // Flat view in the order w1, b1, w2, b2.
  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    p.insert(p.end(), w1.begin(), w1.end());
    p.insert(p.end(), b1.begin(), b1.end());
    p.insert(p.end(), w2.begin(), w2.end());
    p.push_back(b2);
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ContractError("MlpModel: parameter vector has wrong length");
    auto it = p.begin();
    std::copy_n(it, w1.size(), w1.begin());
    it += static_cast<std::ptrdiff_t>(w1.size());
    std::copy_n(it, b1.size(), b1.begin());
    it += static_cast<std::ptrdiff_t>(b1.size());
    std::copy_n(it, w2.size(), w2.begin());
    it += static_cast<std::ptrdiff_t>(w2.size());
    b2 = *it;
  }
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline MlpModel mlp_init(std::size_t n_in, std::size_t n_hidden, std::uint64_t seed) {
  if (n_in == 0) throw ContractError("mlp: input width must be positive");
  MlpModel m;
  m.n_in = n_in;
  m.n_hidden = n_hidden;
  Rng rng(seed);
  auto fill = [&](std::vector<double>& w, std::size_t count, std::size_t fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    w.resize(count);
    for (auto& v : w) v = rng.uniform(-r, r);
  };
  if (n_hidden > 0) {
    fill(m.w1, n_hidden * n_in, n_in);
    fill(m.b1, n_hidden, n_in);
    fill(m.w2, n_hidden, n_hidden);
    std::vector<double> b2;
    fill(b2, 1, n_hidden);
    m.b2 = b2[0];
  } else {
    fill(m.w2, n_in, n_in);
    std::vector<double> b2;
    fill(b2, 1, n_in);
    m.b2 = b2[0];
  }
  return m;
}

namespace detail {

// Output logit; `hidden` receives the hidden activations when non-null.
inline double mlp_logit(const MlpModel& m, std::span<const double> x, std::vector<double>* hidden) {
  if (x.size() != m.n_in) throw ContractError("mlp: input has wrong length");
  if (m.n_hidden == 0) {
    return std::inner_product(x.begin(), x.end(), m.w2.begin(), m.b2);
  }
  std::vector<double> local;
  auto& h = hidden ? *hidden : local;
  h.resize(m.n_hidden);
  double z = m.b2;
  for (std::size_t u = 0; u < m.n_hidden; ++u) {
    const double* w = m.w1.data() + u * m.n_in;
    double a = m.b1[u];
    for (std::size_t i = 0; i < m.n_in; ++i) a += w[i] * x[i];
    h[u] = sigmoid(a);
    z += m.w2[u] * h[u];
  }
  return z;
}

}  // namespace detail

struct LossGradient {
  double loss = 0.0;            // mean binary cross-entropy
  std::vector<double> gradient;  // same layout as MlpModel::parameters()
};

// Mean loss and its gradient over the rows listed in `idx` (all rows when empty).
inline LossGradient mlp_loss_gradient(const MlpModel& m, std::span<const std::vector<double>> x,
                                      std::span<const int> y01, std::span<const std::size_t> idx = {}) {
  std::vector<std::size_t> all;
  if (idx.empty()) {
    all.resize(x.size());
    std::iota(all.begin(), all.end(), 0);
    idx = all;
  }
  LossGradient out;
  out.gradient.assign(m.parameter_count(), 0.0);
  double* g_w1 = out.gradient.data();
  double* g_b1 = g_w1 + m.w1.size();
  double* g_w2 = g_b1 + m.b1.size();
  double& g_b2 = out.gradient.back();
  std::vector<double> h;
  const double scale = 1.0 / static_cast<double>(idx.size());
  for (std::size_t r : idx) {
    const auto& xr = x[r];
    const double z = detail::mlp_logit(m, xr, &h);
    const double t = y01[r];
    out.loss += softplus(z) - t * z;
    const double dz = (sigmoid(z) - t) * scale;
    g_b2 += dz;
    if (m.n_hidden == 0) {
      for (std::size_t i = 0; i < m.n_in; ++i) g_w2[i] += dz * xr[i];
      continue;
    }
    for (std::size_t u = 0; u < m.n_hidden; ++u) {
      g_w2[u] += dz * h[u];
      const double da = dz * m.w2[u] * h[u] * (1.0 - h[u]);
      g_b1[u] += da;
      double* gw = g_w1 + u * m.n_in;
      for (std::size_t i = 0; i < m.n_in; ++i) gw[i] += da * xr[i];
    }
  }
  out.loss *= scale;
  return out;
}

// Shuffled mini-batch gradient descent on binary cross-entropy.
inline MlpModel mlp_train(std::span<const std::vector<double>> x, std::span<const int> y01, const MlpConfig& cfg) {
  if (x.empty() || x.size() != y01.size()) throw ContractError("mlp_train: need |X| = |y| >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ContractError("mlp_train: learning rate must be positive");
  if (cfg.batch_size == 0) throw ContractError("mlp_train: batch size must be positive");
  for (int v : y01)
    if (v != 0 && v != 1) throw ContractError("mlp_train: labels must be 0 or 1");

  MlpModel m = mlp_init(x.front().size(), cfg.n_hidden, cfg.seed);
  Rng shuffler(mix64(cfg.seed) + 1);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> params = m.parameters();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const auto lg = mlp_loss_gradient(m, x, y01, std::span<const std::size_t>(order.data() + start, stop - start));
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= cfg.learning_rate * lg.gradient[p];
      m.set_parameters(params);
    }
    const double loss = mlp_loss_gradient(m, x, y01).loss;
    if (!std::isfinite(loss))
      throw NumericalError("mlp_train: loss became non-finite at epoch " + std::to_string(epoch) +
                           "; learning rate " + std::to_string(cfg.learning_rate) + " is too high");
    m.loss_trace.push_back(loss);
  }
  return m;
}

struct MlpPrediction {
  std::vector<double> probability;
  std::vector<int> label;  // +1 iff probability > 0.5
};

inline MlpPrediction mlp_predict(const MlpModel& m, std::span<const std::vector<double>> x) {
  MlpPrediction out;
  out.probability.reserve(x.size());
  out.label.reserve(x.size());
  for (const auto& row : x) {
    const double p = sigmoid(detail::mlp_logit(m, row, nullptr));
    out.probability.push_back(p);
    out.label.push_back(p > 0.5 ? 1 : -1);
  }
  return out;
}

}  // namespace crossq
