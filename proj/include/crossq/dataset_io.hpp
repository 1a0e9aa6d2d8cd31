#pragma once

// JSON-lines dataset files. One record per line:
//   {"id": 3, "family": {"tag": "werner", "bell": "psi-minus", "p": 0.41},
//    "dm": [32 reals, row-major interleaved re/im],
//    "label_ent": 1 | -1 | null, "label_discord": 1 | -1 | null}
// Optional keys: "rotation" {"theta1", "theta2"} and "measure".

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossq/error.hpp"
#include "crossq/state_factory.hpp"

namespace crossq {

inline nlohmann::json family_to_json(const FamilyParams& f) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WernerParams>)
          return {{"tag", "werner"}, {"bell", to_string(v.kind)}, {"p", v.p}};
        else if constexpr (std::is_same_v<T, HorodeckiParams>)
          return {{"tag", "horodecki"}, {"bell", to_string(v.kind)}, {"p", v.p}};
        else if constexpr (std::is_same_v<T, MemsParams>)
          return {{"tag", "mems"}, {"q", v.q}, {"r", v.r}, {"s", v.s}, {"t", v.t}, {"lambda", v.lambda}};
        else
          return {{"tag", "bell-diagonal"}, {"t11", v.t11}, {"t22", v.t22}, {"t33", v.t33}};
      },
      f);
}

inline FamilyParams family_from_json(const nlohmann::json& j) {
  const auto kind = parse_family_kind(j.at("tag").get<std::string>());
  switch (kind) {
    case FamilyKind::werner:
      return WernerParams{parse_bell_kind(j.at("bell").get<std::string>()), j.at("p").get<double>()};
    case FamilyKind::horodecki:
      return HorodeckiParams{parse_bell_kind(j.at("bell").get<std::string>()), j.at("p").get<double>()};
    case FamilyKind::mems:
      return MemsParams{j.at("q").get<double>(), j.at("r").get<double>(), j.at("s").get<double>(),
                        j.at("t").get<double>(), j.at("lambda").get<double>()};
    case FamilyKind::bell_diagonal:
      return BellDiagonalParams{j.at("t11").get<double>(), j.at("t22").get<double>(), j.at("t33").get<double>()};
  }
  throw ContractError("unknown family");
}

// Scalar describing where a record sits in its family: p for Werner and
// Horodecki, lambda for MEMS, t11 + t22 + t33 for Bell-diagonal states.
inline double family_coordinate(const FamilyParams& f) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WernerParams> || std::is_same_v<T, HorodeckiParams>) return v.p;
        else if constexpr (std::is_same_v<T, MemsParams>) return v.lambda;
        else return v.t11 + v.t22 + v.t33;
      },
      f);
}

inline nlohmann::json record_to_json(const StateRecord& r, std::optional<double> measure = std::nullopt) {
  nlohmann::json j;
  j["id"] = r.id;
  j["family"] = family_to_json(r.family);
  j["dm"] = r.dm.interleaved();
  j["label_ent"] = r.label_ent ? nlohmann::json(*r.label_ent) : nlohmann::json(nullptr);
  j["label_discord"] = r.label_discord ? nlohmann::json(*r.label_discord) : nlohmann::json(nullptr);
  if (r.rotation) j["rotation"] = {{"theta1", r.rotation->theta1}, {"theta2", r.rotation->theta2}};
  if (measure) j["measure"] = *measure;
  return j;
}

inline StateRecord record_from_json(const nlohmann::json& j) {
  StateRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.family = family_from_json(j.at("family"));
  r.dm = DensityMatrix::from_interleaved(j.at("dm").get<std::vector<double>>());
  auto label = [&](const char* key) -> std::optional<int> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    const int v = j[key].get<int>();
    if (v != 1 && v != -1) throw ContractError(std::string(key) + " must be -1, +1 or null");
    return v;
  };
  r.label_ent = label("label_ent");
  r.label_discord = label("label_discord");
  if (j.contains("rotation"))
    r.rotation = LocalUnitary{j["rotation"].at("theta1").get<double>(), j["rotation"].at("theta2").get<double>()};
  return r;
}

inline void write_jsonl(const std::vector<StateRecord>& records, const std::string& path,
                        const std::vector<double>* measures = nullptr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::optional<double> m;
    if (measures) m = measures->at(i);
    out << record_to_json(records[i], m).dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<StateRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<StateRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<std::vector<double>> feature_rows(const std::vector<StateRecord>& records,
                                                     FeatureScheme scheme = FeatureScheme::dm16) {
  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(features(r.dm, scheme));
  return out;
}

}  // namespace crossq
