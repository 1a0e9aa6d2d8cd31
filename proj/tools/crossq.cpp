// crossq command-line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crossq/baselines.hpp"
#include "crossq/dataset_io.hpp"
#include "crossq/harness.hpp"
#include "crossq/measures.hpp"
#include "crossq/presets.hpp"
#include "crossq/qkernel.hpp"
#include "crossq/svm.hpp"

namespace {

using namespace crossq;

// FNV-1a over the kernel file bytes; ties a model to the Gram it was fit on.
std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<int> require_labels(const std::vector<StateRecord>& records, Task task, const std::string& path) {
  std::vector<int> y;
  for (const auto& r : records) {
    const auto& l = task == Task::entanglement ? r.label_ent : r.label_discord;
    if (!l) throw ContractError(path + ": record " + std::to_string(r.id) + " has no " + std::string(to_string(task)) +
                                " label; run `crossq label` first");
    y.push_back(*l);
  }
  return y;
}

struct GenArgs {
  std::string family, bell, out;
  std::optional<double> p_min, p_max, t_min, t_max;
  bool zero_discord = false;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

void run_gen(const GenArgs& a) {
  FamilySpec spec;
  spec.kind = parse_family_kind(a.family);
  if (spec.kind == FamilyKind::horodecki) spec.bell = BellKind::psi_plus;
  if (!a.bell.empty()) spec.bell = parse_bell_kind(a.bell);
  if (a.p_min) spec.p_min = *a.p_min;
  if (a.p_max) spec.p_max = *a.p_max;
  if (a.t_min) spec.t_min = *a.t_min;
  if (a.t_max) spec.t_max = *a.t_max;
  std::vector<StateRecord> records;
  if (a.zero_discord) {
    if (spec.kind != FamilyKind::bell_diagonal) throw ParameterError("--zero-discord requires --family bell-diagonal");
    records = sample_zero_discord_bd(spec.t_min, spec.t_max, a.n, a.seed);
  } else {
    records = sample_family(spec, a.n, a.seed);
  }
  write_jsonl(records, a.out);
}

void run_rotate(std::uint64_t seed, const std::string& in, const std::string& out) {
  auto records = read_jsonl(in);
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto rng = Rng::stream(seed, k);
    const auto u = random_local_unitary(rng);
    records[k].dm = apply_local_unitary(records[k].dm, u);
    records[k].rotation = u;
  }
  write_jsonl(records, out);
}

void run_label(const std::string& task_name, const std::string& in, const std::string& out) {
  auto records = read_jsonl(in);
  const auto measures = label_records(records, parse_task(task_name));
  write_jsonl(records, out, &measures);
}

struct KernelArgs {
  std::string type = "quantum", scheme = "dm16", train, test, out;
  double alpha = std::numbers::pi / 2;
  int reps = 2;
  std::optional<double> gamma;
};

void run_kernel(const KernelArgs& a) {
  const auto scheme = parse_feature_scheme(a.scheme);
  const auto xtr = feature_rows(read_jsonl(a.train), scheme);
  std::optional<FeatureRows> xte;
  if (!a.test.empty()) xte = feature_rows(read_jsonl(a.test), scheme);
  const FeatureRows* y = xte ? &*xte : nullptr;
  KernelMatrix k;
  if (a.type == "quantum") {
    k = gram_matrix(xtr, y, FeatureMapConfig{feature_length(scheme), a.alpha, a.reps});
  } else if (a.type == "linear") {
    k = linear_kernel(xtr, y);
  } else if (a.type == "rbf") {
    k = rbf_kernel(xtr, y, a.gamma ? *a.gamma : default_gamma(xtr));
  } else {
    throw ParameterError("unknown kernel type '" + a.type + "'");
  }
  write_kernel_csv(k, a.out);
}

void run_train(const std::string& kernel, const std::string& data, const std::string& task, double c, double tol,
               const std::string& out) {
  const auto k = read_kernel_csv(kernel);
  const auto records = read_jsonl(data);
  const auto y = require_labels(records, parse_task(task), data);
  if (k.rows() != y.size() || k.cols() != y.size())
    throw ContractError("kernel is " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + " but " + data +
                        " has " + std::to_string(y.size()) + " records");
  SmoOptions opt;
  opt.C = c;
  opt.tol = tol;
  auto model = train_smo(k, y, opt);
  platt_fit(model, k, y);
  model.kernel_digest = file_digest(kernel);
  save_model(model, out);
}

void run_predict(const std::string& model_path, const std::string& kernel, const std::string& data,
                 const std::string& task_name, const std::string& out) {
  const auto model = load_model(model_path);
  const auto k = read_kernel_csv(kernel);
  const auto records = read_jsonl(data);
  if (k.rows() != records.size())
    throw ContractError("cross kernel has " + std::to_string(k.rows()) + " rows but " + data + " has " +
                        std::to_string(records.size()) + " records");
  const auto pred = predict(model, k);
  const auto prob = predict_proba(model, k);
  const auto dec = decision_values(model, k);
  nlohmann::json j;
  j["predictions"] = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i)
    j["predictions"].push_back(
        {{"id", records[i].id}, {"decision", dec[i]}, {"label", pred[i]}, {"probability", prob[i]}});
  const Task task = parse_task(task_name);
  const bool labelled = std::all_of(records.begin(), records.end(), [&](const StateRecord& r) {
    return (task == Task::entanglement ? r.label_ent : r.label_discord).has_value();
  });
  if (labelled) {
    auto m = compute_metrics(require_labels(records, task, data), pred);
    for (std::size_t i = 0; i < records.size(); ++i)
      m.per_state.push_back({records[i].id, family_label(records[i].family), family_coordinate(records[i].family),
                             task_label(records[i], task), pred[i], prob[i]});
    const auto mj = to_json(m);
    j["metrics"] = mj["metrics"];
    j["confusion"] = mj["confusion"];
  }
  write_json(j, out);
}

struct MlpArgs {
  std::size_t hidden = 50, epochs = 200, batch = 32;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::string train, test, task = "entanglement", scheme = "dm16", out;
};

void run_mlp(const MlpArgs& a) {
  const Task task = parse_task(a.task);
  const auto scheme = parse_feature_scheme(a.scheme);
  const auto train = read_jsonl(a.train);
  const auto test = read_jsonl(a.test);
  const auto ytr = require_labels(train, task, a.train);
  const auto yte = require_labels(test, task, a.test);
  std::vector<int> y01;
  for (int v : ytr) y01.push_back(v == 1 ? 1 : 0);
  const auto t0 = std::chrono::steady_clock::now();
  const MlpConfig cfg{a.hidden, a.epochs, a.lr, a.batch, a.seed};
  const auto model = mlp_train(feature_rows(train, scheme), y01, cfg);
  const auto pred = mlp_predict(model, feature_rows(test, scheme));
  auto m = compute_metrics(yte, pred.label);
  for (std::size_t i = 0; i < test.size(); ++i)
    m.per_state.push_back({test[i].id, family_label(test[i].family), family_coordinate(test[i].family), yte[i],
                           pred.label[i], pred.probability[i]});
  nlohmann::json j = to_json(m);
  j["model"] = {{"hidden", a.hidden}, {"epochs", a.epochs}, {"lr", a.lr}, {"batch", a.batch}, {"seed", a.seed}};
  j["loss_trace"] = model.loss_trace;
  std::vector<std::string> flags;
  if (m.confusion.tp + m.confusion.fp == 0) flags.push_back("degenerate_prediction: every test state predicted -1");
  if (m.confusion.tn + m.confusion.fn == 0) flags.push_back("degenerate_prediction: every test state predicted +1");
  j["flags"] = flags;
  j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  j["library_version"] = kLibraryVersion;
  write_json(j, a.out);
}

std::string suffixed(const std::string& path, std::size_t index) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? path.substr(0, dot) : path;
  const std::string ext = has_ext ? path.substr(dot) : ".csv";
  return stem + "_" + std::to_string(index) + ext;
}

void run_experiment_cmd(const std::string& config, const std::string& preset, const std::string& out,
                        const std::string& plot) {
  if (config.empty() == preset.empty()) throw ConfigError("give exactly one of --config or --preset");
  nlohmann::json report;
  std::vector<const MetricsReport*> plots;
  PresetRun run;
  ExperimentResult single;
  if (!config.empty()) {
    single = run_experiment(load_config(config));
    report = report_json(single);
    plots.push_back(&single.metrics);
  } else {
    run = run_preset(preset);
    report = preset_report_json(run);
    for (const auto& c : run.cells) plots.push_back(&c.metrics);
  }
  if (out.empty() || out == "-") std::cout << report.dump(2) << '\n';
  else write_json(report, out);
  if (!plot.empty()) {
    if (plots.size() == 1) emit_plot_data(*plots[0], plot);
    else
      for (std::size_t i = 0; i < plots.size(); ++i) emit_plot_data(*plots[i], suffixed(plot, i));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossq: quantum-kernel classification of two-qubit states"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(crossq::kLibraryVersion));

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "sample a state family to JSON lines");
  g->add_option("--family", gen.family, "werner | horodecki | mems | bell-diagonal")->required();
  g->add_option("--bell", gen.bell, "psi-minus | psi-plus | phi-minus | phi-plus");
  g->add_option("--p-min", gen.p_min);
  g->add_option("--p-max", gen.p_max);
  g->add_option("--t-min", gen.t_min);
  g->add_option("--t-max", gen.t_max);
  g->add_flag("--zero-discord", gen.zero_discord, "constructive zero-discord Bell-diagonal states");
  g->add_option("--n", gen.n)->required();
  g->add_option("--seed", gen.seed)->required();
  g->add_option("-o,--output", gen.out)->required();

  std::uint64_t rot_seed = 0;
  std::string rot_in, rot_out;
  auto* r = app.add_subcommand("rotate", "apply random local unitaries");
  r->add_option("--seed", rot_seed)->required();
  r->add_option("-i,--input", rot_in)->required();
  r->add_option("-o,--output", rot_out)->required();

  std::string lab_task, lab_in, lab_out;
  auto* l = app.add_subcommand("label", "fill analytic labels");
  l->add_option("--task", lab_task, "entanglement | discord")->required();
  l->add_option("-i,--input", lab_in)->required();
  l->add_option("-o,--output", lab_out)->required();

  KernelArgs ka;
  auto* k = app.add_subcommand("kernel", "compute a Gram or cross-Gram matrix");
  k->add_option("--type", ka.type, "quantum | linear | rbf");
  k->add_option("--alpha", ka.alpha);
  k->add_option("--reps", ka.reps);
  k->add_option("--gamma", ka.gamma);
  k->add_option("--scheme", ka.scheme, "dm16 | bloch15");
  k->add_option("-i,--input", ka.train, "training records")->required();
  k->add_option("-j,--test", ka.test, "test records (cross kernel)");
  k->add_option("-o,--output", ka.out)->required();

  std::string tr_kernel, tr_data, tr_task = "entanglement", tr_out;
  double tr_c = 1.0, tr_tol = 1e-3;
  auto* t = app.add_subcommand("train", "fit an SVM on a precomputed kernel");
  t->add_option("--kernel", tr_kernel)->required();
  t->add_option("--data", tr_data)->required();
  t->add_option("--task", tr_task);
  t->add_option("--C", tr_c);
  t->add_option("--tol", tr_tol);
  t->add_option("-o,--output", tr_out)->required();

  std::string pr_model, pr_kernel, pr_data, pr_task = "entanglement", pr_out;
  auto* p = app.add_subcommand("predict", "apply a trained SVM to a cross kernel");
  p->add_option("--model", pr_model)->required();
  p->add_option("--kernel", pr_kernel)->required();
  p->add_option("--data", pr_data)->required();
  p->add_option("--task", pr_task);
  p->add_option("-o,--output", pr_out)->required();

  MlpArgs ma;
  auto* m = app.add_subcommand("mlp", "train and evaluate the feedforward baseline");
  m->add_option("--hidden", ma.hidden);
  m->add_option("--epochs", ma.epochs);
  m->add_option("--lr", ma.lr);
  m->add_option("--batch", ma.batch);
  m->add_option("--seed", ma.seed);
  m->add_option("--train", ma.train)->required();
  m->add_option("--test", ma.test)->required();
  m->add_option("--task", ma.task);
  m->add_option("--scheme", ma.scheme);
  m->add_option("-o,--output", ma.out)->required();

  std::string ex_config, ex_preset, ex_out, ex_plot;
  auto* e = app.add_subcommand("experiment", "run a config file or a named preset");
  e->add_option("--config", ex_config);
  e->add_option("--preset", ex_preset)->check(CLI::IsMember(std::vector<std::string>(
      crossq::kPresetNames.begin(), crossq::kPresetNames.end())));
  e->add_option("-o,--output", ex_out, "report path (stdout when omitted)");
  e->add_option("--plot-data", ex_plot, "per-state CSV; presets write one file per cell (_0, _1, ...)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) run_gen(gen);
    else if (*r) run_rotate(rot_seed, rot_in, rot_out);
    else if (*l) run_label(lab_task, lab_in, lab_out);
    else if (*k) run_kernel(ka);
    else if (*t) run_train(tr_kernel, tr_data, tr_task, tr_c, tr_tol, tr_out);
    else if (*p) run_predict(pr_model, pr_kernel, pr_data, pr_task, pr_out);
    else if (*m) run_mlp(ma);
    else if (*e) run_experiment_cmd(ex_config, ex_preset, ex_out, ex_plot);
  } catch (const crossq::Error& ex) {
    std::cerr << "crossq: " << ex.what() << '\n';
    return 2;
  }
  return 0;
}
