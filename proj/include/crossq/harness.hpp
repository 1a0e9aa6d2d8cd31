#pragma once

// Experiment orchestration: build train/test sets from family specs, label
// them analytically, fit a model (hyperparameters chosen by k-fold CV on the
// training side only), and produce a metrics report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossq/baselines.hpp"
#include "crossq/dataset_io.hpp"
#include "crossq/measures.hpp"
#include "crossq/metrics.hpp"
#include "crossq/qkernel.hpp"
#include "crossq/svm.hpp"

#ifndef CROSSQ_VERSION
#define CROSSQ_VERSION "0.1.0"
#endif

namespace crossq {

inline constexpr const char* kLibraryVersion = CROSSQ_VERSION;

enum class Protocol { in_domain, cross_domain, robustness, discord };
enum class ModelType { qsvm, csvm, mlp };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::in_domain: return "in_domain";
    case Protocol::cross_domain: return "cross_domain";
    case Protocol::robustness: return "robustness";
    case Protocol::discord: return "discord";
  }
  return "?";
}

inline std::string_view to_string(ModelType m) {
  switch (m) {
    case ModelType::qsvm: return "qsvm";
    case ModelType::csvm: return "csvm";
    case ModelType::mlp: return "mlp";
  }
  return "?";
}

struct Component {
  FamilySpec family;
  std::size_t n = 0;
  bool operator==(const Component&) const = default;
};

// One side (train or test) of an experiment.
struct SideSpec {
  std::vector<Component> components;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> rotate_seed;
  // Discord task: share of each component replaced by constructive zero-discord
  // states (single-axis Bell-diagonal states, or p = 0 for Werner/Horodecki).
  double zero_discord_fraction = 0.0;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.n;
    return n;
  }
  bool operator==(const SideSpec&) const = default;
};

struct ModelSpec {
  ModelType type = ModelType::qsvm;
  FeatureScheme scheme = FeatureScheme::dm16;
  FeatureMapConfig feature_map{16, std::numbers::pi, 1};
  std::string kernel = "rbf";    // csvm: "rbf" or "linear"
  std::optional<double> gamma;   // csvm rbf; default 1/(d var(X))
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 50;
  MlpConfig mlp;
};

// Empty lists mean "use the model value".
struct HyperGrid {
  std::vector<double> C;
  std::vector<double> alpha;
  std::vector<int> reps;
  std::vector<double> gamma;
  std::vector<std::string> kernel;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string name;
  Protocol protocol = Protocol::cross_domain;
  Task task = Task::entanglement;
  ModelSpec model;
  SideSpec train;
  std::optional<SideSpec> test;
  double test_fraction = 0.25;  // in-domain split
  std::uint64_t split_seed = 0;
  HyperGrid grid;
};

struct ExperimentResult {
  ExperimentConfig config;
  nlohmann::json selected = nlohmann::json::object();
  MetricsReport metrics;
  std::vector<std::string> flags;
  nlohmann::json checks = nlohmann::json::object();
  std::vector<std::string> notes;
  std::size_t n_train = 0;
  double wall_time_s = 0.0;
};

// ---------------------------------------------------------------------------
// Config (de)serialization

inline nlohmann::json family_spec_params_json(const FamilySpec& f) {
  switch (f.kind) {
    case FamilyKind::werner:
    case FamilyKind::horodecki:
      return {{"bell", to_string(f.bell)}, {"p_min", f.p_min}, {"p_max", f.p_max}};
    case FamilyKind::bell_diagonal: return {{"t_min", f.t_min}, {"t_max", f.t_max}};
    case FamilyKind::mems: return nlohmann::json::object();
  }
  return nlohmann::json::object();
}

inline FamilySpec family_spec_from_json(const std::string& family, const nlohmann::json& params) {
  FamilySpec f;
  f.kind = parse_family_kind(family);
  if (f.kind == FamilyKind::horodecki) f.bell = BellKind::psi_plus;
  if (params.contains("bell")) f.bell = parse_bell_kind(params["bell"].get<std::string>());
  f.p_min = params.value("p_min", 0.0);
  f.p_max = params.value("p_max", 1.0);
  f.t_min = params.value("t_min", -1.0);
  f.t_max = params.value("t_max", 1.0);
  return f;
}

inline nlohmann::json side_to_json(const SideSpec& s) {
  nlohmann::json j;
  if (s.components.size() == 1) {
    j["family"] = to_string(s.components[0].family.kind);
    j["params"] = family_spec_params_json(s.components[0].family);
    j["n"] = s.components[0].n;
  } else {
    j["components"] = nlohmann::json::array();
    for (const auto& c : s.components)
      j["components"].push_back(
          {{"family", to_string(c.family.kind)}, {"params", family_spec_params_json(c.family)}, {"n", c.n}});
  }
  j["seed"] = s.seed;
  if (s.rotate_seed) j["rotate_seed"] = *s.rotate_seed;
  if (s.zero_discord_fraction > 0) j["zero_discord_fraction"] = s.zero_discord_fraction;
  return j;
}

inline SideSpec side_from_json(const nlohmann::json& j) {
  SideSpec s;
  auto component = [](const nlohmann::json& c) {
    return Component{family_spec_from_json(c.at("family").get<std::string>(), c.value("params", nlohmann::json::object())),
                     c.at("n").get<std::size_t>()};
  };
  if (j.contains("components")) {
    for (const auto& c : j["components"]) s.components.push_back(component(c));
  } else {
    s.components.push_back(component(j));
  }
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("rotate_seed") && !j["rotate_seed"].is_null()) s.rotate_seed = j["rotate_seed"].get<std::uint64_t>();
  s.zero_discord_fraction = j.value("zero_discord_fraction", 0.0);
  return s;
}

inline nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json p;
  switch (m.type) {
    case ModelType::qsvm:
      p = {{"alpha", m.feature_map.alpha}, {"reps", m.feature_map.reps}, {"scheme", to_string(m.scheme)},
           {"C", m.C}, {"tol", m.tol}, {"max_passes", m.max_passes}};
      break;
    case ModelType::csvm:
      p = {{"kernel", m.kernel}, {"gamma", m.gamma ? nlohmann::json(*m.gamma) : nlohmann::json(nullptr)},
           {"scheme", to_string(m.scheme)}, {"C", m.C}, {"tol", m.tol}, {"max_passes", m.max_passes}};
      break;
    case ModelType::mlp:
      p = {{"hidden", m.mlp.n_hidden}, {"epochs", m.mlp.epochs}, {"lr", m.mlp.learning_rate},
           {"batch", m.mlp.batch_size}, {"seed", m.mlp.seed}, {"scheme", to_string(m.scheme)}};
      break;
  }
  return {{"type", to_string(m.type)}, {"params", p}};
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  const auto type = j.at("type").get<std::string>();
  const auto p = j.value("params", nlohmann::json::object());
  if (type == "qsvm") m.type = ModelType::qsvm;
  else if (type == "csvm") m.type = ModelType::csvm;
  else if (type == "mlp") m.type = ModelType::mlp;
  else throw ConfigError("unknown model type '" + type + "'");
  m.scheme = parse_feature_scheme(p.value("scheme", std::string("dm16")));
  m.feature_map.d = feature_length(m.scheme);
  m.feature_map.alpha = p.value("alpha", std::numbers::pi);
  m.feature_map.reps = p.value("reps", 1);
  m.kernel = p.value("kernel", std::string("rbf"));
  if (p.contains("gamma") && !p["gamma"].is_null()) m.gamma = p["gamma"].get<double>();
  m.C = p.value("C", 1.0);
  m.tol = p.value("tol", 1e-3);
  m.max_passes = p.value("max_passes", 50);
  m.mlp.n_hidden = p.value("hidden", std::size_t{50});
  m.mlp.epochs = p.value("epochs", std::size_t{200});
  m.mlp.learning_rate = p.value("lr", 0.01);
  m.mlp.batch_size = p.value("batch", std::size_t{32});
  m.mlp.seed = p.value("seed", std::uint64_t{0});
  return m;
}

inline nlohmann::json grid_to_json(const HyperGrid& g) {
  return {{"C", g.C},         {"alpha", g.alpha},   {"reps", g.reps}, {"gamma", g.gamma},
          {"kernel", g.kernel}, {"folds", g.folds}, {"seed", g.seed}};
}

inline HyperGrid grid_from_json(const nlohmann::json& j) {
  HyperGrid g;
  g.C = j.value("C", std::vector<double>{});
  g.alpha = j.value("alpha", std::vector<double>{});
  g.reps = j.value("reps", std::vector<int>{});
  g.gamma = j.value("gamma", std::vector<double>{});
  g.kernel = j.value("kernel", std::vector<std::string>{});
  g.folds = j.value("folds", std::size_t{5});
  g.seed = j.value("seed", std::uint64_t{0});
  return g;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"name", c.name},
                   {"protocol", to_string(c.protocol)},
                   {"task", to_string(c.task)},
                   {"model", model_to_json(c.model)},
                   {"train", side_to_json(c.train)},
                   {"grid", grid_to_json(c.grid)}};
  if (c.test) j["test"] = side_to_json(*c.test);
  if (c.protocol == Protocol::in_domain) j["split"] = {{"test_fraction", c.test_fraction}, {"seed", c.split_seed}};
  return j;
}

inline void validate_config(const ExperimentConfig& c);

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.name = j.value("name", std::string("experiment"));
    const auto proto = j.value("protocol", std::string("cross_domain"));
    if (proto == "in_domain") c.protocol = Protocol::in_domain;
    else if (proto == "cross_domain") c.protocol = Protocol::cross_domain;
    else if (proto == "robustness") c.protocol = Protocol::robustness;
    else if (proto == "discord") c.protocol = Protocol::discord;
    else throw ConfigError("unknown protocol '" + proto + "'");
    c.task = parse_task(j.value("task", std::string("entanglement")));
    c.model = model_from_json(j.at("model"));
    c.train = side_from_json(j.at("train"));
    if (j.contains("test")) c.test = side_from_json(j["test"]);
    if (j.contains("split")) {
      c.test_fraction = j["split"].value("test_fraction", 0.25);
      c.split_seed = j["split"].value("seed", std::uint64_t{0});
    }
    if (j.contains("grid")) c.grid = grid_from_json(j["grid"]);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

namespace detail {

inline bool same_domain(const FamilySpec& a, const FamilySpec& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case FamilyKind::werner:
    case FamilyKind::horodecki: return a.bell == b.bell;
    case FamilyKind::mems: return true;
    case FamilyKind::bell_diagonal:
      // Ranges that only touch at an endpoint count as disjoint.
      return a.t_max > b.t_min && b.t_max > a.t_min;
  }
  return true;
}

}  // namespace detail

// Structural checks, including empty train/test domain intersection for the
// cross-domain protocols.
inline void validate_config(const ExperimentConfig& c) {
  if (c.train.components.empty() || c.train.total() == 0) throw ConfigError(c.name + ": training side is empty");
  for (const auto& comp : c.train.components) validate_family_spec(comp.family);
  if (c.model.feature_map.d != feature_length(c.model.scheme))
    throw ConfigError(c.name + ": feature map width does not match feature scheme");
  if (!(c.train.zero_discord_fraction >= 0.0 && c.train.zero_discord_fraction <= 1.0))
    throw ConfigError(c.name + ": zero_discord_fraction must lie in [0, 1]");
  if (c.protocol == Protocol::in_domain) {
    if (c.test) throw ConfigError(c.name + ": in-domain experiments split the training side; drop 'test'");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError(c.name + ": test_fraction must be in (0, 1)");
    return;
  }
  if (!c.test || c.test->components.empty() || c.test->total() == 0)
    throw ConfigError(c.name + ": protocol needs a non-empty test side");
  for (const auto& comp : c.test->components) validate_family_spec(comp.family);
  if (c.protocol == Protocol::robustness && !c.test->rotate_seed)
    throw ConfigError(c.name + ": robustness protocol needs test.rotate_seed");
  if (c.protocol == Protocol::discord && c.task != Task::discord)
    throw ConfigError(c.name + ": discord protocol requires task = discord");
  for (const auto& a : c.train.components)
    for (const auto& b : c.test->components)
      if (detail::same_domain(a.family, b.family))
        throw ConfigError(c.name + ": train and test domains overlap (" + std::string(to_string(a.family.kind)) + ")");
}

// ---------------------------------------------------------------------------
// Data

inline std::string family_label(const FamilyParams& f) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WernerParams>) return "werner/" + std::string(to_string(v.kind));
        else if constexpr (std::is_same_v<T, HorodeckiParams>) return "horodecki/" + std::string(to_string(v.kind));
        else if constexpr (std::is_same_v<T, MemsParams>) return "mems";
        else return "bell-diagonal";
      },
      f);
}

// Generates and labels one side. Component k draws from stream seeds derived
// from (side seed, k), so adding a component never changes the others.
inline std::vector<StateRecord> build_side(const SideSpec& side, Task task) {
  std::vector<StateRecord> out;
  std::int64_t next_id = 0;
  for (std::size_t ci = 0; ci < side.components.size(); ++ci) {
    const auto& comp = side.components[ci];
    const std::uint64_t base = mix64(side.seed) ^ mix64(0x51ed27 + 2 * ci);
    const auto n_zero = task == Task::discord
                            ? static_cast<std::size_t>(std::llround(static_cast<double>(comp.n) * side.zero_discord_fraction))
                            : std::size_t{0};
    const std::size_t n_main = comp.n - n_zero;
    if (n_main > 0) {
      auto recs = sample_family(comp.family, n_main, base, next_id);
      next_id += static_cast<std::int64_t>(recs.size());
      out.insert(out.end(), recs.begin(), recs.end());
    }
    if (n_zero > 0) {
      const std::uint64_t zseed = mix64(side.seed) ^ mix64(0x51ed27 + 2 * ci + 1);
      std::vector<StateRecord> recs;
      switch (comp.family.kind) {
        case FamilyKind::bell_diagonal:
          recs = sample_zero_discord_bd(comp.family.t_min, comp.family.t_max, n_zero, zseed, next_id);
          break;
        case FamilyKind::werner:
        case FamilyKind::horodecki:
          for (std::size_t k = 0; k < n_zero; ++k) {
            FamilyParams params = comp.family.kind == FamilyKind::werner
                                      ? FamilyParams{WernerParams{comp.family.bell, 0.0}}
                                      : FamilyParams{HorodeckiParams{comp.family.bell, 0.0}};
            recs.push_back({next_id + static_cast<std::int64_t>(k), params, make_state(params), {}, {}, {}});
          }
          break;
        case FamilyKind::mems:
          throw ConfigError("zero-discord injection is not defined for MEMS");
      }
      next_id += static_cast<std::int64_t>(recs.size());
      out.insert(out.end(), recs.begin(), recs.end());
    }
  }
  label_records(out, task);
  return out;
}

inline double task_measure(const DensityMatrix& rho, Task task) {
  return task == Task::entanglement ? concurrence(rho) : geometric_discord(rho);
}

// Applies a fresh local unitary (stream (seed, k)) to record k. Labels stay as
// computed before rotation; returns the largest change in the task measure.
inline double rotate_records(std::vector<StateRecord>& records, std::uint64_t seed, Task task) {
  double drift = 0.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto rng = Rng::stream(seed, k);
    const auto u = random_local_unitary(rng);
    const double before = task_measure(records[k].dm, task);
    records[k].dm = apply_local_unitary(records[k].dm, u);
    records[k].rotation = u;
    drift = std::max(drift, std::abs(task_measure(records[k].dm, task) - before));
  }
  return drift;
}

inline std::vector<int> labels_of(const std::vector<StateRecord>& records, Task task) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(task_label(r, task));
  return y;
}

// Stratified split; the test share of each class is its proportional quota,
// rounded by largest remainder so the test size is round(n * fraction).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> y,
                                                                                    double test_fraction,
                                                                                    std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(y.size()) * test_fraction));
  const double qp = static_cast<double>(pos.size()) * test_fraction;
  const double qn = static_cast<double>(neg.size()) * test_fraction;
  auto tp = static_cast<std::size_t>(std::floor(qp));
  auto tn = static_cast<std::size_t>(std::floor(qn));
  // Leftover slots go to the larger fractional part first; ties favour +1.
  const bool pos_first = qp - std::floor(qp) >= qn - std::floor(qn);
  for (int pass = 0; pass < 2 && tp + tn < n_test; ++pass) {
    const bool take_pos = (pass == 0) == pos_first;
    if (take_pos && tp < pos.size()) ++tp;
    else if (!take_pos && tn < neg.size()) ++tn;
  }
  Rng rng(seed);
  rng.shuffle(pos.begin(), pos.end());
  rng.shuffle(neg.begin(), neg.end());
  std::vector<std::size_t> train, test;
  test.insert(test.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(tp));
  test.insert(test.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(tn));
  train.insert(train.end(), pos.begin() + static_cast<std::ptrdiff_t>(tp), pos.end());
  train.insert(train.end(), neg.begin() + static_cast<std::ptrdiff_t>(tn), neg.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

// ---------------------------------------------------------------------------
// Model fitting

namespace detail {

inline KernelMatrix submatrix(const KernelMatrix& k, std::span<const std::size_t> rows, std::span<const std::size_t> cols,
                              bool symmetric) {
  KernelMatrix out{RMatrix(rows.size(), cols.size()), symmetric};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out.values(i, j) = k(rows[i], cols[j]);
  return out;
}

// Stratified folds: each class shuffled, then dealt round-robin.
inline std::vector<std::size_t> fold_assignment(std::span<const int> y, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  Rng rng(seed);
  rng.shuffle(pos.begin(), pos.end());
  rng.shuffle(neg.begin(), neg.end());
  std::vector<std::size_t> fold(y.size());
  std::size_t k = 0;
  for (auto i : pos) fold[i] = k++ % folds;
  for (auto i : neg) fold[i] = k++ % folds;
  return fold;
}

inline double cv_accuracy(const KernelMatrix& k, std::span<const int> y, const SmoOptions& opt, std::size_t folds,
                          std::uint64_t seed) {
  const auto fold = fold_assignment(y, folds, seed);
  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
    if (va.empty() || tr.size() < 2) continue;
    std::vector<int> ytr;
    for (auto i : tr) ytr.push_back(y[i]);
    const auto model = train_smo(submatrix(k, tr, tr, true), ytr, opt);
    const auto pred = predict(model, submatrix(k, va, tr, false));
    for (std::size_t i = 0; i < va.size(); ++i) correct += pred[i] == y[va[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

struct FitOutcome {
  std::vector<int> predicted;
  std::vector<double> probability;
  nlohmann::json selected = nlohmann::json::object();
};

template <typename T>
std::vector<T> or_default(const std::vector<T>& grid, T value) {
  return grid.empty() ? std::vector<T>{value} : grid;
}

// SVM path shared by the quantum and classical kernels. `make_gram(i)`
// returns the training Gram for kernel candidate i; `make_cross(i)` the
// test x train cross kernel. Ties in CV accuracy go to the earlier candidate.
template <typename GramFn, typename CrossFn>
FitOutcome fit_svm(std::size_t n_kernels, GramFn&& make_gram, CrossFn&& make_cross, const std::vector<double>& c_grid,
                   std::span<const int> ytr, const ExperimentConfig& cfg, nlohmann::json& selected) {
  SmoOptions base;
  base.tol = cfg.model.tol;
  base.max_passes = cfg.model.max_passes;
  base.seed = cfg.grid.seed;
  const bool search = n_kernels > 1 || c_grid.size() > 1;

  std::size_t best_kernel = 0;
  double best_c = c_grid.front();
  double best_acc = -1.0;
  std::optional<KernelMatrix> best_gram;
  for (std::size_t ki = 0; ki < n_kernels; ++ki) {
    KernelMatrix gram = make_gram(ki);
    for (double c : c_grid) {
      if (!search) {
        best_gram = gram;
        break;
      }
      SmoOptions opt = base;
      opt.C = c;
      const double acc = cv_accuracy(gram, ytr, opt, cfg.grid.folds, cfg.grid.seed);
      if (acc > best_acc) {
        best_acc = acc;
        best_kernel = ki;
        best_c = c;
        best_gram = gram;
      }
    }
  }
  if (search) selected["cv_accuracy"] = best_acc;
  selected["C"] = best_c;

  SmoOptions opt = base;
  opt.C = best_c;
  auto model = train_smo(*best_gram, ytr, opt);
  platt_fit(model, *best_gram, ytr);
  selected["platt_A"] = model.platt_A;
  selected["platt_B"] = model.platt_B;
  selected["support_vectors"] = model.support_idx.size();
  const KernelMatrix cross = make_cross(best_kernel);
  FitOutcome out;
  out.predicted = predict(model, cross);
  out.probability = predict_proba(model, cross);
  selected["kernel_candidate"] = best_kernel;
  return out;
}

inline FitOutcome fit_and_predict(const ExperimentConfig& cfg, const FeatureRows& xtr, std::span<const int> ytr,
                                  const FeatureRows& xte) {
  FitOutcome out;
  nlohmann::json selected = nlohmann::json::object();
  const auto& m = cfg.model;
  const auto c_grid = or_default(cfg.grid.C, m.C);

  if (m.type == ModelType::qsvm) {
    std::vector<FeatureMapConfig> maps;
    for (double a : or_default(cfg.grid.alpha, m.feature_map.alpha))
      for (int r : or_default(cfg.grid.reps, m.feature_map.reps)) maps.push_back({m.feature_map.d, a, r});
    out = fit_svm(
        maps.size(), [&](std::size_t i) { return gram_matrix(xtr, maps[i]); },
        [&](std::size_t i) { return cross_gram_matrix(xtr, xte, maps[i]); }, c_grid, ytr, cfg, selected);
    const auto& fm = maps[selected["kernel_candidate"].get<std::size_t>()];
    selected["alpha"] = fm.alpha;
    selected["reps"] = fm.reps;
    selected["scheme"] = to_string(m.scheme);
  } else if (m.type == ModelType::csvm) {
    struct Cand {
      std::string kernel;
      double gamma;
    };
    std::vector<Cand> cands;
    const double g0 = m.gamma ? *m.gamma : default_gamma(xtr);
    for (const auto& kname : or_default(cfg.grid.kernel, m.kernel)) {
      if (kname == "linear") cands.push_back({kname, 0.0});
      else if (kname == "rbf")
        for (double g : or_default(cfg.grid.gamma, g0)) cands.push_back({kname, g});
      else throw ConfigError("unknown CSVM kernel '" + kname + "'");
    }
    auto gram = [&](std::size_t i) {
      return cands[i].kernel == "linear" ? linear_kernel(xtr) : rbf_kernel(xtr, nullptr, cands[i].gamma);
    };
    auto cross = [&](std::size_t i) {
      return cands[i].kernel == "linear" ? linear_kernel(xtr, &xte) : rbf_kernel(xtr, &xte, cands[i].gamma);
    };
    out = fit_svm(cands.size(), gram, cross, c_grid, ytr, cfg, selected);
    const auto& c = cands[selected["kernel_candidate"].get<std::size_t>()];
    selected["kernel"] = c.kernel;
    if (c.kernel == "rbf") selected["gamma"] = c.gamma;
    selected["scheme"] = to_string(m.scheme);
  } else {
    std::vector<int> y01;
    for (int v : ytr) y01.push_back(v == 1 ? 1 : 0);
    const auto model = mlp_train(xtr, y01, m.mlp);
    const auto pred = mlp_predict(model, xte);
    out.predicted = pred.label;
    out.probability = pred.probability;
    selected["hidden"] = m.mlp.n_hidden;
    selected["epochs"] = m.mlp.epochs;
    selected["lr"] = m.mlp.learning_rate;
    selected["final_training_loss"] = model.loss_trace.empty() ? 0.0 : model.loss_trace.back();
  }
  selected.erase("kernel_candidate");
  out.selected = selected;
  return out;
}

inline void attach_predictions(MetricsReport& report, const std::vector<StateRecord>& test, std::span<const int> truth,
                               const FitOutcome& fit) {
  for (std::size_t i = 0; i < test.size(); ++i)
    report.per_state.push_back({test[i].id, family_label(test[i].family), family_coordinate(test[i].family), truth[i],
                                fit.predicted[i], fit.probability[i]});
}

inline void flag_degenerate(ExperimentResult& r) {
  const auto& c = r.metrics.confusion;
  if (c.tp + c.fp == 0) r.flags.push_back("degenerate_prediction: every test state predicted -1");
  if (c.tn + c.fn == 0) r.flags.push_back("degenerate_prediction: every test state predicted +1");
  if (r.metrics.precision_undefined) r.flags.push_back("precision_undefined");
  if (r.metrics.recall_undefined) r.flags.push_back("recall_undefined");
}

inline ExperimentResult train_and_evaluate(const ExperimentConfig& cfg, const std::vector<StateRecord>& train,
                                           const std::vector<StateRecord>& test) {
  ExperimentResult r;
  r.config = cfg;
  const auto ytr = labels_of(train, cfg.task);
  const auto yte = labels_of(test, cfg.task);
  const auto xtr = feature_rows(train, cfg.model.scheme);
  const auto xte = feature_rows(test, cfg.model.scheme);
  const auto fit = fit_and_predict(cfg, xtr, ytr, xte);
  r.selected = fit.selected;
  r.metrics = compute_metrics(yte, fit.predicted);
  attach_predictions(r.metrics, test, yte, fit);
  r.n_train = train.size();
  flag_degenerate(r);
  return r;
}

template <typename F>
ExperimentResult timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult r = f();
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Protocols

inline ExperimentResult run_in_domain(const ExperimentConfig& cfg) {
  if (cfg.protocol != Protocol::in_domain) throw ConfigError(cfg.name + ": not an in-domain config");
  validate_config(cfg);
  return detail::timed([&] {
    const auto all = build_side(cfg.train, cfg.task);
    const auto y = labels_of(all, cfg.task);
    constexpr int kMaxRedraws = 100;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      auto [tr, te] = stratified_split(y, cfg.test_fraction, mix64(cfg.split_seed) + static_cast<std::uint64_t>(attempt));
      const bool pos = std::any_of(tr.begin(), tr.end(), [&](auto i) { return y[i] == 1; });
      const bool neg = std::any_of(tr.begin(), tr.end(), [&](auto i) { return y[i] == -1; });
      if (!pos || !neg) continue;
      std::vector<StateRecord> train, test;
      for (auto i : tr) train.push_back(all[i]);
      for (auto i : te) test.push_back(all[i]);
      auto r = detail::train_and_evaluate(cfg, train, test);
      r.checks["split"] = {{"train", tr.size()}, {"test", te.size()}, {"redraws", attempt}};
      return r;
    }
    throw ConfigError(cfg.name + ": could not draw a split with both classes in the training set");
  });
}

inline ExperimentResult run_cross_domain(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.protocol == Protocol::in_domain) throw ConfigError(cfg.name + ": in-domain config passed to run_cross_domain");
  return detail::timed([&] {
    const auto train = build_side(cfg.train, cfg.task);
    auto test = build_side(*cfg.test, cfg.task);
    std::optional<double> drift;
    if (cfg.test->rotate_seed) drift = rotate_records(test, *cfg.test->rotate_seed, cfg.task);
    auto r = detail::train_and_evaluate(cfg, train, test);
    if (drift) {
      const std::string key = cfg.task == Task::entanglement ? "concurrence_invariance" : "discord_invariance";
      r.checks[key] = {{"max_abs_change", *drift}, {"tolerance", 1e-9}, {"passed", *drift <= 1e-9}};
      if (*drift > 1e-9) r.flags.push_back(key + "_violated");
    }
    const bool injected =
        cfg.task == Task::discord && cfg.test->zero_discord_fraction > 0.0 &&
        std::any_of(cfg.test->components.begin(), cfg.test->components.end(),
                    [](const Component& c) { return c.family.kind != FamilyKind::bell_diagonal; });
    if (injected)
      r.notes.push_back("zero-discord test members are injected p = 0 states (fraction " +
                        format_real(cfg.test->zero_discord_fraction) + "); this is an artifact convention");
    return r;
  });
}

inline ExperimentResult run_robustness(const ExperimentConfig& cfg) {
  if (cfg.protocol != Protocol::robustness) throw ConfigError(cfg.name + ": not a robustness config");
  return run_cross_domain(cfg);
}

inline ExperimentResult run_discord(const ExperimentConfig& cfg) {
  if (cfg.protocol != Protocol::discord || cfg.task != Task::discord) throw ConfigError(cfg.name + ": not a discord config");
  return run_cross_domain(cfg);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.protocol) {
    case Protocol::in_domain: return run_in_domain(cfg);
    case Protocol::cross_domain: return run_cross_domain(cfg);
    case Protocol::robustness: return run_robustness(cfg);
    case Protocol::discord: return run_discord(cfg);
  }
  throw ConfigError("unknown protocol");
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json report_json(const ExperimentResult& r) {
  nlohmann::json j = to_json(r.metrics);
  j["config"] = config_to_json(r.config);
  j["selected_hyperparameters"] = r.selected;
  j["n_train"] = r.n_train;
  j["n_test"] = r.metrics.per_state.size();
  j["flags"] = r.flags;
  j["checks"] = r.checks;
  j["notes"] = r.notes;
  j["wall_time_s"] = r.wall_time_s;
  j["library_version"] = kLibraryVersion;
  return j;
}

// Drops every "wall_time_s" key; what remains is a pure function of the config.
inline nlohmann::json without_timing(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("wall_time_s");
    for (auto& [k, v] : j.items()) v = without_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_timing(v);
  }
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void emit_report(const ExperimentResult& r, const std::string& path) { write_json(report_json(r), path); }

// CSV: id, param_p_or_t, true_label, pred_label, probability. One row per test state.
inline void emit_plot_data(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "id,param_p_or_t,true_label,pred_label,probability\n";
  for (const auto& s : r.per_state)
    out << s.id << ',' << format_real(s.coordinate) << ',' << s.true_label << ',' << s.predicted << ','
        << format_real(s.probability) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void emit_plot_data(const ExperimentResult& r, const std::string& path) { emit_plot_data(r.metrics, path); }

// Parses a plot-data CSV back into (true, predicted) label columns.
inline std::pair<std::vector<int>, std::vector<int>> read_plot_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  std::getline(in, line);
  std::vector<int> t, p;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw IoError(path + ": expected 5 columns");
    t.push_back(std::stoi(cells[2]));
    p.push_back(std::stoi(cells[3]));
  }
  return {t, p};
}

}  // namespace crossq
