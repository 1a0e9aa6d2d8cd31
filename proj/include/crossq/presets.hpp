#pragma once

// Named experiment suites. Every seed below is fixed, so a preset report is a
// pure function of the library version.

#include <algorithm>
#include <array>
#include <chrono>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossq/harness.hpp"

namespace crossq {

inline constexpr std::array<std::string_view, 9> kPresetNames = {
    "in_domain",    "xdomain_werner", "xdomain_horodecki", "xdomain_mems", "robustness",
    "discord_bd",   "discord_werner", "baseline_csvm",     "baseline_nn"};

namespace presets {

inline constexpr std::array<BellKind, 4> kBells = {BellKind::psi_minus, BellKind::psi_plus, BellKind::phi_minus,
                                                   BellKind::phi_plus};

// Werner cross-domain cells in table order: for each training kind, the other
// three kinds as test sets.
struct WernerCell {
  std::size_t train_idx, test_idx;
  BellKind train, test;
};

inline std::vector<WernerCell> werner_cells() {
  std::vector<WernerCell> cells;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) cells.push_back({i, j, kBells[i], kBells[j]});
  return cells;
}

inline ModelSpec qsvm_model() {
  ModelSpec m;
  m.type = ModelType::qsvm;
  m.feature_map = {16, std::numbers::pi, 1};
  return m;
}

// Bell-diagonal features are small (|t_ii| / 4), so the discord task uses a
// wider angle scale and a second layer.
inline ModelSpec discord_qsvm_model() {
  ModelSpec m = qsvm_model();
  m.feature_map.alpha = 5.0;
  m.feature_map.reps = 2;
  return m;
}

inline ModelSpec qsvm_model_for(Task task) { return task == Task::discord ? discord_qsvm_model() : qsvm_model(); }

inline HyperGrid svm_grid() {
  HyperGrid g;
  g.C = {1.0, 0.1, 10.0};
  g.folds = 5;
  g.seed = 17;
  return g;
}

inline Component werner(BellKind k, std::size_t n) { return {FamilySpec{FamilyKind::werner, k, 0.0, 1.0}, n}; }

inline Component horodecki(std::size_t n) { return {FamilySpec{FamilyKind::horodecki, BellKind::psi_plus, 0.0, 1.0}, n}; }

inline Component mems(std::size_t n) { return {FamilySpec{FamilyKind::mems}, n}; }

inline Component bell_diagonal(double lo, double hi, std::size_t n) {
  FamilySpec f{FamilyKind::bell_diagonal};
  f.t_min = lo;
  f.t_max = hi;
  return {f, n};
}

inline std::uint64_t train_seed(std::size_t i) { return 1000 + i; }
inline std::uint64_t test_seed(std::size_t i, std::size_t j) { return 2000 + 10 * i + j; }
inline std::uint64_t rotate_seed(std::size_t i, std::size_t j) { return 3000 + 10 * i + j; }

inline std::string cell_name(std::string_view prefix, BellKind a, std::string_view b) {
  return std::string(prefix) + ":" + std::string(to_string(a)) + "->" + std::string(b);
}

inline ExperimentConfig werner_cell(const WernerCell& c, bool rotated) {
  ExperimentConfig cfg;
  cfg.name = cell_name(rotated ? "robustness" : "xdomain_werner", c.train, to_string(c.test));
  cfg.protocol = rotated ? Protocol::robustness : Protocol::cross_domain;
  cfg.task = Task::entanglement;
  cfg.model = qsvm_model();
  cfg.grid = svm_grid();
  cfg.train.components = {werner(c.train, 100)};
  cfg.train.seed = train_seed(c.train_idx);
  SideSpec test;
  test.components = {werner(c.test, 50)};
  test.seed = test_seed(c.train_idx, c.test_idx);
  if (rotated) test.rotate_seed = rotate_seed(c.train_idx, c.test_idx);
  cfg.test = test;
  return cfg;
}

inline ExperimentConfig in_domain(ModelSpec model = qsvm_model()) {
  ExperimentConfig cfg;
  cfg.name = "in_domain";
  cfg.protocol = Protocol::in_domain;
  cfg.task = Task::entanglement;
  cfg.model = model;
  cfg.grid = svm_grid();
  cfg.train.components = {werner(BellKind::psi_minus, 59), horodecki(59), mems(58)};
  cfg.train.seed = 500;
  cfg.test_fraction = 0.25;
  cfg.split_seed = 501;
  return cfg;
}

inline ExperimentConfig werner_psi_minus_to(const std::string& name, Component test, std::uint64_t test_seed_value) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.protocol = Protocol::cross_domain;
  cfg.task = Task::entanglement;
  cfg.model = qsvm_model();
  cfg.grid = svm_grid();
  cfg.train.components = {werner(BellKind::psi_minus, 100)};
  cfg.train.seed = train_seed(0);
  SideSpec t;
  t.components = {test};
  t.seed = test_seed_value;
  cfg.test = t;
  return cfg;
}

inline SideSpec discord_train_side() {
  SideSpec s;
  s.components = {bell_diagonal(-1.0, 0.0, 100)};
  s.seed = 4000;
  s.zero_discord_fraction = 0.5;
  return s;
}

inline ExperimentConfig discord_bd() {
  ExperimentConfig cfg;
  cfg.name = "discord_bd";
  cfg.protocol = Protocol::discord;
  cfg.task = Task::discord;
  cfg.model = discord_qsvm_model();
  cfg.grid = svm_grid();
  cfg.train = discord_train_side();
  SideSpec t;
  t.components = {bell_diagonal(0.0, 1.0, 50)};
  t.seed = 4001;
  t.zero_discord_fraction = 0.5;
  cfg.test = t;
  return cfg;
}

// Werner test states whose correlation matrix lies outside the training
// octant t_ii <= 0, i.e. all kinds except phi-minus.
inline ExperimentConfig discord_werner() {
  ExperimentConfig cfg = discord_bd();
  cfg.name = "discord_werner";
  SideSpec t;
  t.components = {werner(BellKind::psi_minus, 17), werner(BellKind::psi_plus, 17), werner(BellKind::phi_plus, 16)};
  t.seed = 4002;
  t.zero_discord_fraction = 0.1;
  cfg.test = t;
  return cfg;
}

inline ModelSpec csvm_model() {
  ModelSpec m;
  m.type = ModelType::csvm;
  m.kernel = "rbf";
  return m;
}

inline HyperGrid csvm_grid() {
  HyperGrid g = svm_grid();
  g.kernel = {"rbf", "linear"};
  return g;
}

// Data-identical CSVM twins of QSVM configs.
inline std::vector<ExperimentConfig> csvm_twins() {
  std::vector<ExperimentConfig> out;
  auto twin = [](ExperimentConfig cfg) {
    cfg.name = "baseline_csvm:" + cfg.name;
    cfg.model = csvm_model();
    cfg.grid = csvm_grid();
    return cfg;
  };
  out.push_back(twin(in_domain()));
  for (const auto& c : werner_cells())
    if (c.train == BellKind::psi_minus) out.push_back(twin(werner_cell(c, false)));
  out.push_back(twin(werner_psi_minus_to("xdomain_horodecki", horodecki(50), 2100)));
  out.push_back(twin(discord_bd()));
  return out;
}

inline std::vector<ExperimentConfig> nn_cells() {
  std::vector<ExperimentConfig> out;
  for (std::size_t n_train : {std::size_t{5000}, std::size_t{50000}})
    for (std::size_t hidden : {std::size_t{0}, std::size_t{50}, std::size_t{100}}) {
      ExperimentConfig cfg = werner_cell({0, 1, BellKind::psi_minus, BellKind::psi_plus}, false);
      cfg.name = "baseline_nn:hidden=" + std::to_string(hidden) + ",n=" + std::to_string(n_train);
      cfg.model.type = ModelType::mlp;
      cfg.model.mlp = {hidden, 200, 0.01, 32, 23};
      cfg.grid = {};
      cfg.train.components[0].n = n_train;
      out.push_back(cfg);
    }
  return out;
}

}  // namespace presets

inline std::vector<ExperimentConfig> preset_configs(std::string_view name) {
  using namespace presets;
  std::vector<ExperimentConfig> out;
  if (name == "in_domain") {
    out.push_back(in_domain());
  } else if (name == "xdomain_werner" || name == "robustness") {
    for (const auto& c : werner_cells()) out.push_back(werner_cell(c, name == "robustness"));
  } else if (name == "xdomain_horodecki") {
    out.push_back(werner_psi_minus_to("xdomain_horodecki", horodecki(50), 2100));
  } else if (name == "xdomain_mems") {
    out.push_back(werner_psi_minus_to("xdomain_mems", mems(50), 2200));
  } else if (name == "discord_bd") {
    out.push_back(discord_bd());
  } else if (name == "discord_werner") {
    out.push_back(discord_werner());
  } else if (name == "baseline_csvm") {
    out = csvm_twins();
  } else if (name == "baseline_nn") {
    out = nn_cells();
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return out;
}

// Baseline cells are compared against the QSVM run on identical data. A gap
// below 10 accuracy points is recorded as UNMET.
inline nlohmann::json comparison_entry(const ExperimentConfig& baseline, const ExperimentResult& base_result,
                                       const ExperimentResult& qsvm_result) {
  const double gap = qsvm_result.metrics.accuracy - base_result.metrics.accuracy;
  return {{"cell", baseline.name},
          {"baseline", to_string(baseline.model.type)},
          {"qsvm_accuracy", qsvm_result.metrics.accuracy},
          {"baseline_accuracy", base_result.metrics.accuracy},
          {"gap", gap},
          {"required_gap", 0.10},
          {"status", gap >= 0.10 - 1e-12 ? "MET" : "UNMET"},
          {"train_seed", baseline.train.seed},
          {"test_seed", baseline.test ? baseline.test->seed : baseline.split_seed}};
}

inline constexpr std::size_t kMaxQsvmTwinTrain = 100;

struct PresetRun {
  std::string name;
  std::vector<ExperimentResult> cells;
  nlohmann::json comparison = nlohmann::json::array();
  double wall_time_s = 0.0;
};

inline PresetRun run_preset(std::string_view name) {
  const auto t0 = std::chrono::steady_clock::now();
  PresetRun run;
  run.name = name;
  const bool baseline = name == "baseline_csvm" || name == "baseline_nn";
  std::map<std::string, ExperimentResult> twins;
  for (const auto& cfg : preset_configs(name)) {
    run.cells.push_back(run_experiment(cfg));
    if (baseline) {
      ExperimentConfig q = cfg;
      q.model = presets::qsvm_model_for(cfg.task);
      q.grid = presets::svm_grid();
      q.name = "qsvm_twin";
      // A quantum Gram over tens of thousands of states is out of reach; the
      // QSVM twin keeps the first 100 training states (same streams) and the
      // identical test set.
      for (auto& c : q.train.components) c.n = std::min<std::size_t>(c.n, kMaxQsvmTwinTrain);
      const auto key = config_to_json(q).dump();
      if (!twins.contains(key)) twins.emplace(key, run_experiment(q));
      run.comparison.push_back(comparison_entry(cfg, run.cells.back(), twins.at(key)));
    }
  }
  run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

inline nlohmann::json preset_report_json(const PresetRun& run) {
  nlohmann::json j{{"preset", run.name}, {"cells", nlohmann::json::array()}};
  for (const auto& c : run.cells) j["cells"].push_back(report_json(c));
  if (!run.comparison.empty()) j["comparison"] = run.comparison;
  j["wall_time_s"] = run.wall_time_s;
  j["library_version"] = kLibraryVersion;
  return j;
}

}  // namespace crossq
