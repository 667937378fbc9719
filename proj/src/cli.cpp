// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "perfseer/dataset.hpp"
#include "perfseer/error.hpp"
#include "perfseer/featurize.hpp"
#include "perfseer/graph_ir.hpp"
#include "perfseer/onnx_import.hpp"
#include "perfseer/synthbench.hpp"
#include "perfseer/trainer.hpp"

namespace perfseer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  // extract / predict
  std::string input;
  bool from_onnx = false;
  std::optional<std::int64_t> batch;
  std::string phase = "infer";
  std::string out;
  // gen-dataset
  std::string spec;
  std::size_t count = 0;
  // train
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
  // predict / evaluate
  std::string ckpt;
  std::string metric;
  std::string split = "test";
  std::string predictions;
  bool json_output = false;
  int verbosity = 0;
};

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

Phase require_phase(const std::string& name) {
  const auto p = parse_phase(name);
  if (!p) throw Error(ErrorCode::kUsage, "--phase must be infer or train, got '" + name + "'");
  return *p;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::kIo, std::string(what) + " not found: " + path);
}

CompGraph load_input_graph(const Options& o) {
  require_file(o.input, "graph");
  if (o.from_onnx) return import_onnx(o.input, o.batch);
  CompGraph g = load_graph(o.input);
  if (o.batch && *o.batch != g.batch_size) {
    throw Error(ErrorCode::kUsage, "--batch applies to ONNX input only");
  }
  return g;
}

// A perfgraph document or a computational graph (JSON or ONNX).
PerfGraph load_input_perfgraph(const Options& o) {
  if (!o.from_onnx) {
    require_file(o.input, "graph");
    const json doc = read_json(o.input);
    if (doc.is_object() && doc.value("format", std::string()) == "perfgraph") return perfgraph_from_json(doc);
  }
  return build_perfgraph(load_input_graph(o), require_phase(o.phase));
}

int cmd_extract(const Options& o, std::ostream& out) {
  const PerfGraph pg = build_perfgraph(load_input_graph(o), require_phase(o.phase));
  const std::string text = perfgraph_to_json(pg).dump(1) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
  return 0;
}

int cmd_gen_dataset(const Options& o, std::ostream& out) {
  DatasetSpec spec;
  if (!o.spec.empty()) {
    require_file(o.spec, "dataset spec");
    spec = dataset_spec_from_json(read_json(o.spec));
  }
  if (o.seed) spec.arch.seed = *o.seed;
  if (o.count == 0) throw Error(ErrorCode::kUsage, "--n must be positive");
  write_dataset(spec, o.count, o.out);
  if (o.verbosity >= 0) out << "wrote " << o.count << " graphs to " << o.out << "\n";
  return 0;
}

void emit_report(const MetricsReport& report, const Options& o, std::ostream& out) {
  if (o.json_output) {
    out << to_json(report).dump(2) << "\n";
  } else if (o.verbosity >= 0) {
    out << format_table(report);
  }
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig config;
  if (!o.config.empty()) {
    require_file(o.config, "train config");
    config = train_config_from_json(read_json(o.config));
  }
  if (o.seed) config.seed = *o.seed;
  if (!fs::is_regular_file(fs::path(o.data) / "labels.csv")) {
    throw Error(ErrorCode::kIo, "dataset directory has no labels.csv: " + o.data);
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);

  const auto samples = load_dataset(o.data, config.phases);
  TrainHooks hooks;
  if (o.verbosity > 0) {
    hooks.on_epoch = [&out](const EpochRecord& r) {
      out << "epoch " << r.epoch << " lr " << r.lr << " train " << r.train_loss << " val " << r.val_loss
          << "\n";
    };
  }
  TrainResult result = [&] {
    try {
      return train(config, samples, hooks);
    } catch (const TrainingDiverged& e) {
      Predictor p = e.last_good().predictor;
      p.data_dir = o.data;
      save_checkpoint(p, dir / "last_good.bin");
      throw;
    }
  }();
  result.predictor.data_dir = o.data;
  save_checkpoint(result.predictor, dir / "best.bin");
  write_file(dir / "norm_stats.json", feature_norm_to_json(result.predictor.norm).dump(2) + "\n");
  const json summary = {{"best_epoch", result.best_epoch},
                        {"best_val_loss", result.best_val_loss},
                        {"history", history_to_json(result.history)}};
  write_file(dir / "history.json", summary.dump(2) + "\n");

  const auto rows = predict_rows(result.predictor, samples, result.split.test);
  const MetricsReport report = report_from_rows(rows);
  write_file(dir / "predictions_test.csv", predictions_to_csv(rows));
  write_file(dir / "report_test.json", to_json(report).dump(2) + "\n");
  write_file(dir / "report_test.txt", format_table(report));
  emit_report(report, o, out);
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  require_file(o.ckpt, "checkpoint");
  const Predictor p = load_checkpoint(o.ckpt);
  const PerfGraph pg = load_input_perfgraph(o);
  const auto y = p.predict(pg);
  json result = json::object();
  for (std::size_t k = 0; k < y.size(); ++k) {
    result[metric_name(pg.u.phase, p.scaler.quantities[k])] = y[k];
  }
  if (!o.metric.empty()) {
    if (!result.contains(o.metric)) {
      throw Error(ErrorCode::kUsage, "checkpoint does not predict '" + o.metric + "' for this phase");
    }
    result = json{{o.metric, result.at(o.metric)}};
  }
  out << result.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  require_file(o.ckpt, "checkpoint");
  const auto split = parse_split_name(o.split);
  if (!split) throw Error(ErrorCode::kUsage, "--split must be train, val or test");
  const Predictor p = load_checkpoint(o.ckpt);
  const std::string data = o.data.empty() ? p.data_dir : o.data;
  if (!fs::is_regular_file(fs::path(data) / "labels.csv")) {
    throw Error(ErrorCode::kIo, "dataset directory has no labels.csv: " + data);
  }
  const auto samples = load_dataset(data, p.config.phases);
  const Split parts = split_samples(samples, p.config.split_ratio, p.config.seed, p.config.phases);
  const auto rows = predict_rows(p, samples, part(parts, *split));
  const MetricsReport report = report_from_rows(rows);
  if (!o.predictions.empty()) write_file(o.predictions, predictions_to_csv(rows));
  if (!o.out.empty()) write_file(o.out, to_json(report).dump(2) + "\n");
  emit_report(report, o, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"perfseer: graph-network performance prediction for CNN graphs", "perfseer"};
  app.require_subcommand(0, 1);
  Options o;
  bool version = false;
  app.add_flag("--version", version, "Print toolkit and format versions");

  // CLI11 writes a bound flag variable even for subcommands that did not
  // run, so flags never share storage across subcommands.
  std::array<std::pair<int, int>, 5> noise{};
  bool extract_onnx = false, predict_onnx = false, train_json = false, evaluate_json = false;
  std::size_t next_slot = 0;
  const auto add_common = [&](CLI::App* sub) {
    auto& slot = noise[next_slot++];
    sub->add_flag("-v,--verbose", slot.first, "More output");
    sub->add_flag("-q,--quiet", slot.second, "Less output");
  };

  auto* extract = app.add_subcommand("extract", "Featurize one graph into a perfgraph JSON file");
  extract->add_option("graph", o.input, "Graph JSON (or ONNX with --from-onnx)")->required();
  extract->add_flag("--from-onnx", extract_onnx, "Input is an ONNX model");
  extract->add_option("--batch", o.batch, "Batch size for ONNX input");
  extract->add_option("--phase", o.phase, "infer or train");
  extract->add_option("--out", o.out, "Output path (default: stdout)");
  add_common(extract);

  auto* gen = app.add_subcommand("gen-dataset", "Generate a labeled synthetic dataset");
  gen->add_option("--spec", o.spec, "Dataset spec JSON (default settings when omitted)");
  gen->add_option("--n", o.count, "Number of graphs")->required();
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Overrides the generator seed");
  add_common(gen);

  auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
  tr->add_option("--config", o.config, "Train config JSON (defaults when omitted)");
  tr->add_option("--data", o.data, "Dataset directory")->required();
  tr->add_option("--out", o.out, "Run directory")->required();
  tr->add_option("--seed", o.seed, "Overrides the config seed");
  tr->add_flag("--json", train_json, "Print the test report as JSON");
  add_common(tr);

  auto* pr = app.add_subcommand("predict", "Predict metrics for one graph");
  pr->add_option("graph", o.input, "Graph JSON, perfgraph JSON, or ONNX with --from-onnx")->required();
  pr->add_option("--ckpt", o.ckpt, "Checkpoint .bin file")->required();
  pr->add_option("--metric", o.metric, "Only this metric, e.g. infer_time");
  pr->add_flag("--from-onnx", predict_onnx, "Input is an ONNX model");
  pr->add_option("--batch", o.batch, "Batch size for ONNX input");
  pr->add_option("--phase", o.phase, "infer or train (graph input only)");
  add_common(pr);

  auto* ev = app.add_subcommand("evaluate", "Report metrics of a checkpoint on a split");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint .bin file")->required();
  ev->add_option("--split", o.split, "train, val or test");
  ev->add_option("--data", o.data, "Dataset directory (default: the training data)");
  ev->add_option("--out", o.out, "Write the JSON report here");
  ev->add_option("--predictions", o.predictions, "Write per-sample predictions CSV here");
  ev->add_flag("--json", evaluate_json, "Print the report as JSON");
  add_common(ev);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[" << to_string(ErrorCode::kUsage) << "]: " << e.what() << "\n";
    return exit_status(ErrorCode::kUsage);
  }
  for (const auto& [verbose, quiet] : noise) o.verbosity += verbose - quiet;
  o.from_onnx = extract_onnx || predict_onnx;
  o.json_output = train_json || evaluate_json;

  try {
    if (version) {
      out << "perfseer " << kToolkitVersion << " (graph json 1, perfgraph 1, checkpoint 1)\n";
      return 0;
    }
    if (extract->parsed()) return cmd_extract(o, out);
    if (gen->parsed()) return cmd_gen_dataset(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (pr->parsed()) return cmd_predict(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    err << "error[" << to_string(ErrorCode::kUsage) << "]: a subcommand is required\n" << app.help();
    return exit_status(ErrorCode::kUsage);
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_status(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error[" << to_string(ErrorCode::kIo) << "]: " << e.what() << "\n";
    return exit_status(ErrorCode::kIo);
  }
}

}  // namespace perfseer
