#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "crossq/harness.hpp"
#include "crossq/presets.hpp"

using namespace crossq;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("crossq_test_" + name)).string();
}

ExperimentConfig small_cross(ModelType type) {
  ExperimentConfig cfg;
  cfg.name = "small";
  cfg.protocol = Protocol::cross_domain;
  cfg.task = Task::entanglement;
  cfg.model.type = type;
  cfg.model.mlp = {4, 30, 0.1, 8, 5};
  cfg.train.components = {presets::werner(BellKind::psi_minus, 24)};
  cfg.train.seed = 7;
  SideSpec t;
  t.components = {presets::werner(BellKind::psi_plus, 12)};
  t.seed = 8;
  cfg.test = t;
  cfg.grid.C = {1.0, 10.0};
  cfg.grid.folds = 3;
  cfg.grid.seed = 2;
  return cfg;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const std::vector<int> truth{1, 1, -1, -1};
  const std::vector<int> pred{1, -1, -1, -1};
  const auto r = compute_metrics(truth, pred);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
  EXPECT_EQ(r.confusion, (Confusion{1, 0, 2, 1}));
}

TEST(Metrics, BalancedMistakes) {
  const std::vector<int> truth{1, 1, -1, -1};
  const std::vector<int> pred{1, -1, 1, -1};
  const auto r = compute_metrics(truth, pred);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
  EXPECT_DOUBLE_EQ(compute_metrics(truth, truth).f1, 1.0);
}

TEST(Metrics, UndefinedRatiosAreFlagged) {
  const std::vector<int> truth{-1, -1, 1};
  const std::vector<int> none{-1, -1, -1};
  const auto r = compute_metrics(truth, none);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_FALSE(r.recall_undefined);
  EXPECT_EQ(r.precision, 0.0);
  const std::vector<int> neg{-1, -1};
  EXPECT_TRUE(compute_metrics(neg, neg).recall_undefined);
  EXPECT_THROW(compute_metrics(neg, none), ContractError);
}

TEST(Metrics, JsonRoundTrip) {
  const std::vector<int> truth{1, -1, 1};
  const std::vector<int> pred{1, 1, -1};
  auto r = compute_metrics(truth, pred);
  r.per_state = {{0, "werner/psi-plus", 0.25, 1, 1, 0.8125}, {1, "mems", 0.1, -1, 1, 0.6}, {2, "bell-diagonal", -0.3, 1, -1, 0.1}};
  EXPECT_EQ(metrics_from_json(nlohmann::json::parse(to_json(r).dump())), r);
}

TEST(Config, JsonRoundTripForEveryPreset) {
  for (auto name : kPresetNames)
    for (const auto& cfg : preset_configs(name)) {
      const auto j = config_to_json(cfg);
      EXPECT_EQ(config_to_json(config_from_json(nlohmann::json::parse(j.dump()))), j) << cfg.name;
    }
  EXPECT_THROW(preset_configs("nope"), ConfigError);
}

TEST(Config, OverlappingDomainsRejected) {
  auto cfg = small_cross(ModelType::csvm);
  cfg.test->components = {presets::werner(BellKind::psi_minus, 10)};
  EXPECT_THROW(validate_config(cfg), ConfigError);

  auto bd = presets::discord_bd();
  EXPECT_NO_THROW(validate_config(bd));  // [-1,0] and [0,1] only touch
  bd.test->components = {presets::bell_diagonal(-0.2, 1.0, 10)};
  EXPECT_THROW(validate_config(bd), ConfigError);

  auto mems = presets::werner_psi_minus_to("m", presets::mems(5), 1);
  mems.train.components.push_back(presets::mems(5));
  EXPECT_THROW(validate_config(mems), ConfigError);
}

TEST(Config, StructuralErrors) {
  auto cfg = small_cross(ModelType::qsvm);
  cfg.model.feature_map.d = 15;
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = small_cross(ModelType::qsvm);
  cfg.protocol = Protocol::robustness;
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = small_cross(ModelType::qsvm);
  cfg.protocol = Protocol::discord;
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = small_cross(ModelType::qsvm);
  cfg.test.reset();
  EXPECT_THROW(validate_config(cfg), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"model", {{"type", "forest"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"model", {{"type", "qsvm"}}}}), ConfigError);
  EXPECT_THROW(load_config(temp_path("missing.json")), IoError);
}

TEST(Split, StratifiedQuotasAndDeterminism) {
  std::vector<int> y;
  for (int i = 0; i < 37; ++i) y.push_back(i % 3 == 0 ? 1 : -1);  // 13 positive, 24 negative
  const auto [tr, te] = stratified_split(y, 0.25, 4);
  EXPECT_EQ(te.size(), 9u);  // round(37 / 4)
  EXPECT_EQ(tr.size() + te.size(), y.size());
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(te.begin(), te.end());
  EXPECT_EQ(all.size(), y.size());
  std::size_t pos = 0;
  for (auto i : te) pos += y[i] == 1;
  // Quotas 3.25 and 6.0 give 3 positives and 6 negatives.
  EXPECT_EQ(pos, 3u);
  EXPECT_EQ(stratified_split(y, 0.25, 4), stratified_split(y, 0.25, 4));
  EXPECT_NE(stratified_split(y, 0.25, 4).second, stratified_split(y, 0.25, 5).second);
}

TEST(Data, BuildSideIsStreamStable) {
  SideSpec side;
  side.components = {presets::werner(BellKind::psi_minus, 10), presets::mems(6)};
  side.seed = 3;
  const auto a = build_side(side, Task::entanglement);
  ASSERT_EQ(a.size(), 16u);
  side.components.push_back(presets::horodecki(4));
  const auto b = build_side(side, Task::entanglement);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].id, static_cast<std::int64_t>(i));
}

TEST(Data, ZeroDiscordInjection) {
  SideSpec side;
  side.components = {presets::bell_diagonal(-1, 0, 40), presets::werner(BellKind::psi_plus, 10)};
  side.zero_discord_fraction = 0.25;
  side.seed = 9;
  const auto recs = build_side(side, Task::discord);
  std::size_t zero = 0;
  for (const auto& r : recs)
    if (*r.label_discord == -1) ++zero;
  EXPECT_EQ(zero, 10u + 3u);  // llround(40/4) + llround(2.5)
  side.components = {presets::mems(4)};
  EXPECT_THROW(build_side(side, Task::discord), ConfigError);
}

TEST(Data, RotationKeepsLabelsAndMeasures) {
  SideSpec side;
  side.components = {presets::werner(BellKind::phi_minus, 30)};
  side.seed = 1;
  auto recs = build_side(side, Task::entanglement);
  const auto before = labels_of(recs, Task::entanglement);
  const double drift = rotate_records(recs, 77, Task::entanglement);
  EXPECT_LT(drift, 1e-9);
  EXPECT_EQ(labels_of(recs, Task::entanglement), before);
  for (const auto& r : recs) EXPECT_TRUE(r.rotation.has_value());
}

TEST(Io, JsonlRoundTrip) {
  SideSpec side;
  side.components = {presets::werner(BellKind::phi_plus, 5), presets::mems(3), presets::bell_diagonal(-1, 0, 4)};
  side.seed = 21;
  auto recs = build_side(side, Task::discord);
  rotate_records(recs, 5, Task::discord);
  const auto path = temp_path("records.jsonl");
  write_jsonl(recs, path);
  EXPECT_EQ(read_jsonl(path), recs);
  std::remove(path.c_str());
}

TEST(Io, PlotDataRecount) {
  const auto r = run_experiment(small_cross(ModelType::csvm));
  const auto path = temp_path("plot.csv");
  emit_plot_data(r, path);
  const auto [truth, pred] = read_plot_labels(path);
  ASSERT_EQ(truth.size(), r.config.test->total());
  const auto again = compute_metrics(truth, pred);
  EXPECT_EQ(again.confusion, r.metrics.confusion);
  EXPECT_DOUBLE_EQ(again.accuracy, r.metrics.accuracy);
  std::remove(path.c_str());
}

TEST(Experiment, ReportsAreDeterministic) {
  for (auto type : {ModelType::qsvm, ModelType::csvm, ModelType::mlp}) {
    auto cfg = small_cross(type);
    const auto a = without_timing(report_json(run_experiment(cfg)));
    const auto b = without_timing(report_json(run_experiment(cfg)));
    EXPECT_EQ(a.dump(), b.dump()) << to_string(type);
    EXPECT_FALSE(a.contains("wall_time_s"));
    EXPECT_EQ(a["n_test"], 12);
    EXPECT_EQ(a["config"], config_to_json(cfg));
  }
}

TEST(Experiment, InDomainSplitAndSelection) {
  ExperimentConfig cfg;
  cfg.name = "tiny_in_domain";
  cfg.protocol = Protocol::in_domain;
  cfg.model.type = ModelType::csvm;
  cfg.train.components = {presets::werner(BellKind::psi_minus, 30), presets::mems(10)};
  cfg.train.seed = 4;
  cfg.split_seed = 6;
  cfg.grid.C = {0.1, 1.0};
  cfg.grid.kernel = {"rbf", "linear"};
  cfg.grid.folds = 3;
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.checks["split"]["test"], 10);
  EXPECT_EQ(r.n_train, 30u);
  EXPECT_TRUE(r.selected.contains("C"));
  EXPECT_TRUE(r.selected.contains("cv_accuracy"));
}

TEST(Experiment, DegeneratePredictionsAreFlagged) {
  ExperimentResult r;
  const std::vector<int> truth{1, -1};
  const std::vector<int> pred{-1, -1};
  r.metrics = compute_metrics(truth, pred);
  detail::flag_degenerate(r);
  ASSERT_EQ(r.flags.size(), 2u);
  EXPECT_EQ(r.flags[0], "degenerate_prediction: every test state predicted -1");
  EXPECT_EQ(r.flags[1], "precision_undefined");
}

TEST(Experiment, RobustnessRecordsInvarianceCheck) {
  auto cfg = small_cross(ModelType::csvm);
  cfg.protocol = Protocol::robustness;
  cfg.test->rotate_seed = 99;
  const auto r = run_experiment(cfg);
  EXPECT_TRUE(r.checks["concurrence_invariance"]["passed"].get<bool>());
}
