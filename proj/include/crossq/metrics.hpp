#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossq/error.hpp"

namespace crossq {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct StatePrediction {
  std::int64_t id = 0;
  std::string family;     // e.g. "werner/psi-plus"
  double coordinate = 0;  // p, lambda or t11 + t22 + t33
  int true_label = -1;
  int predicted = -1;
  double probability = 0.5;
  bool operator==(const StatePrediction&) const = default;
};

// Positive class is +1 (entangled, or non-zero discord).
struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  bool precision_undefined = false;  // no positive predictions
  bool recall_undefined = false;     // no positive labels
  Confusion confusion;
  std::vector<StatePrediction> per_state;
  bool operator==(const MetricsReport&) const = default;
};

inline MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ContractError("compute_metrics: label sequences differ in length");
  if (truth.empty()) throw ContractError("compute_metrics: need at least one label");
  MetricsReport r;
  auto& c = r.confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == 1;
    const bool p = predicted[i] == 1;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (!t && !p) ++c.tn;
    else ++c.fn;
  }
  const auto n = static_cast<double>(c.total());
  r.accuracy = static_cast<double>(c.tp + c.tn) / n;
  r.precision_undefined = c.tp + c.fp == 0;
  r.recall_undefined = c.tp + c.fn == 0;
  r.precision = r.precision_undefined ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = r.recall_undefined ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per_state = nlohmann::json::array();
  for (const auto& s : r.per_state)
    per_state.push_back({{"id", s.id},
                         {"family", s.family},
                         {"coordinate", s.coordinate},
                         {"true_label", s.true_label},
                         {"predicted", s.predicted},
                         {"probability", s.probability}});
  return {{"metrics",
           {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"precision_undefined", r.precision_undefined},
            {"recall_undefined", r.recall_undefined}}},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
          {"per_state", per_state}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  const auto& m = j.at("metrics");
  m.at("accuracy").get_to(r.accuracy);
  m.at("precision").get_to(r.precision);
  m.at("recall").get_to(r.recall);
  m.at("f1").get_to(r.f1);
  m.at("precision_undefined").get_to(r.precision_undefined);
  m.at("recall_undefined").get_to(r.recall_undefined);
  const auto& c = j.at("confusion");
  c.at("tp").get_to(r.confusion.tp);
  c.at("fp").get_to(r.confusion.fp);
  c.at("tn").get_to(r.confusion.tn);
  c.at("fn").get_to(r.confusion.fn);
  for (const auto& s : j.at("per_state"))
    r.per_state.push_back({s.at("id").get<std::int64_t>(), s.at("family").get<std::string>(),
                           s.at("coordinate").get<double>(), s.at("true_label").get<int>(),
                           s.at("predicted").get<int>(), s.at("probability").get<double>()});
  return r;
}

}  // namespace crossq
