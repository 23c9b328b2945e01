// gatas: precompute transition caches, train, evaluate and inspect models.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gatas/archive.hpp"
#include "gatas/config.hpp"
#include "gatas/data.hpp"
#include "gatas/error.hpp"
#include "gatas/sampler.hpp"
#include "gatas/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gatas;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::string> task;
  std::optional<std::string> ablation;
  std::optional<std::string> dataset;
  std::optional<std::string> cache;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> sample_size;
  std::optional<std::uint32_t> max_epochs;
  std::optional<std::uint32_t> patience;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON configuration file");
  cmd->add_option("--task", o.task, "multi-class, multi-label or link-prediction");
  cmd->add_option("--ablation", o.ablation, "full, base, no-trans, no-embed or no-paths");
  cmd->add_option("--dataset", o.dataset, "dataset in the interchange format");
  cmd->add_option("--cache", o.cache, "transition tensor cache file");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--sample-size", o.sample_size, "neighbourhood sample size S");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch limit");
  cmd->add_option("--patience", o.patience, "early stopping patience in epochs");
  cmd->add_option("--threads", o.threads, "precompute worker threads (0 = all cores)");
}

Config resolve(const Options& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config " + o.config_path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(o.config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  }
  if (o.task) doc["task"] = *o.task;
  if (o.ablation) doc["ablation"] = *o.ablation;
  if (o.dataset) doc["dataset"] = *o.dataset;
  if (o.cache) doc["cache"] = *o.cache;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.sample_size) doc["sample_size"] = *o.sample_size;
  if (o.max_epochs) doc["max_epochs"] = *o.max_epochs;
  if (o.patience) doc["patience"] = *o.patience;
  if (o.threads) doc["threads"] = *o.threads;
  return config_from_json(doc.dump());
}

fs::path output_dir(const Options& o, const Config& config) {
  if (o.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(o.out);
  std::ofstream(fs::path(o.out) / "config.json") << config_to_json(config) << '\n';
  return o.out;
}

DatasetBundle load_bundle(const Config& config) {
  if (config.dataset.empty()) throw ConfigError("no dataset given (config key 'dataset' or --dataset)");
  DatasetBundle bundle = load_dataset(config.dataset, config.task);
  if (config.task == Task::kLinkPrediction && !bundle.has_edge_splits()) {
    bundle = link_split(bundle, config.val_fraction, config.test_fraction, config.seed);
  }
  return bundle;
}

std::optional<TransitionTensors> cached_tensors(const Config& config, const DatasetBundle& bundle) {
  if (config.cache.empty() || !fs::exists(config.cache)) return std::nullopt;
  return load_tensors(config.cache, model_graph(bundle, config.task).checksum());
}

json evaluation_json(const Evaluation& ev, Split split, const TrainingData& data) {
  json j{{"metric", ev.metric}, {"value", ev.value}, {"loss", ev.loss}, {"split", to_string(split)},
         {"count", ev.count}};
  if (data.task == Task::kLinkPrediction) j["f1"] = ev.f1;
  json sizes = json::object();
  for (Split s : kSplits) {
    sizes[to_string(s)] = data.task == Task::kLinkPrediction ? data.split_edges(s).size()
                                                             : data.split_nodes(s).size();
  }
  j["split_sizes"] = sizes;
  return j;
}

int cmd_precompute(const Options& o) {
  const Config config = resolve(o);
  const fs::path cache = config.cache.empty() ? output_dir(o, config) / "tensors.bin" : fs::path(config.cache);
  const DatasetBundle bundle = load_bundle(config);
  const TransitionTensors tensors =
      precompute(model_graph(bundle, config.task), effective_max_steps(config), config.threads);
  save_tensors(tensors, cache);
  std::cout << "step\tentries\tsources\tmean_support\n";
  for (std::uint32_t t = 0; t < tensors.steps.size(); ++t) {
    const auto& step = tensors.steps[t];
    std::size_t sources = 0;
    for (NodeId i = 1; i <= step.num_nodes(); ++i) sources += !step.slice(i).empty();
    std::cout << t << '\t' << step.num_entries() << '\t' << sources << '\t'
              << (sources ? static_cast<double>(step.num_entries()) / static_cast<double>(sources) : 0.0)
              << '\n';
  }
  std::cout << "wrote " << cache.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const Config config = resolve(o);
  const fs::path out = output_dir(o, config);
  const DatasetBundle bundle = load_bundle(config);
  const TrainingData data = prepare(bundle, config, cached_tensors(config, bundle));
  if (!config.cache.empty() && !fs::exists(config.cache)) save_tensors(data.tensors, config.cache);

  GatasModel<float> model(model_config(config, data), data.graph, config.seed);
  const FitResult result = fit(model, data, config, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val " << r.val_metric << '\n';
  });
  save_parameters(model.params(), out / "model.ckpt", config_to_json(config));
  {
    std::ofstream history(out / "history.csv");
    write_history(history, result.history);
  }
  json report{{"best_epoch", result.best_epoch},
              {"val", evaluation_json(evaluate(model, data, Split::kVal, config), Split::kVal, data)}};
  const bool has_test = data.task == Task::kLinkPrediction ? !data.split_edges(Split::kTest).empty()
                                                           : !data.split_nodes(Split::kTest).empty();
  if (has_test) {
    report["test"] = evaluation_json(evaluate(model, data, Split::kTest, config), Split::kTest, data);
  }
  std::ofstream(out / "metrics.json") << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const Options& o, const std::string& checkpoint, const std::string& split_name) {
  const Config config = resolve(o);
  const Split split = [&] {
    try {
      return parse_split(split_name);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }();
  const DatasetBundle bundle = load_bundle(config);
  const TrainingData data = prepare(bundle, config, cached_tensors(config, bundle));
  GatasModel<float> model(model_config(config, data), data.graph, config.seed);
  load_parameters(model.params(), checkpoint);
  const json report = evaluation_json(evaluate(model, data, split, config), split, data);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / ("metrics_" + split_name + ".json")) << report.dump(2) << '\n';
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_inspect(const Options& o, NodeId node, const std::string& checkpoint) {
  const Config config = resolve(o);
  const DatasetBundle bundle = load_bundle(config);
  const Graph graph = model_graph(bundle, config.task);
  if (node < 1 || node > graph.num_nodes()) throw DataError("unknown node " + std::to_string(node));
  const std::uint32_t steps = effective_max_steps(config);
  std::optional<TransitionTensors> cached = cached_tensors(config, bundle);
  const NodeId sources[] = {node};
  const TransitionTensors tensors = cached ? std::move(*cached) : precompute_sources(graph, steps, sources, 1);
  if (tensors.max_steps() != steps) throw ConfigError("cache step count differs from the configuration");

  std::vector<double> q = init_step_logits(steps).weights();
  if (!checkpoint.empty()) {
    const TrainingData data = prepare(bundle, config, tensors);
    GatasModel<float> model(model_config(config, data), data.graph, config.seed);
    load_parameters(model.params(), checkpoint);
    q = model.step_weights();
  }
  const PathCodebook codebook = tensors.codebook();
  std::cout << "q";
  for (double w : q) std::cout << '\t' << w;
  std::cout << "\n\nneighbour\tpath\tstep\ttransition\tprobability\n";
  for (const SupportEntry& e : support(tensors, node)) {
    std::vector<double> s(steps + 1, 0.0);
    s[e.step] = e.transition;
    std::cout << e.neighbour << '\t' << format_path(codebook.decode_path(e.path)) << '\t' << e.step << '\t'
              << e.transition << '\t' << combined_probability(s, q) << '\n';
  }
  Rng rng(derive_seed(config.seed, node));
  const ModelConfig mc = ModelConfig::resolve(config, graph, 1);
  const NeighbourhoodSample sample =
      sample_neighbourhood(tensors, q, node, config.sample_size, rng, mc.sampling_mode());
  std::cout << "\nslot\tneighbour\tpath\tprobability\n";
  for (std::uint32_t k = 0; k < sample.valid_count; ++k) {
    std::cout << k << '\t' << sample.neighbours[k] << '\t'
              << format_path(codebook.decode_path(sample.paths[k])) << '\t'
              << combined_probability(sample.step_vector(k), q) << '\n';
  }
  return 0;
}

int cmd_synthesize(const SynthesisSpec& spec, const std::string& out) {
  save_dataset(synthesize(spec), out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph attention with edge-type path sampling"};
  app.require_subcommand(1);
  Options opts;
  std::string checkpoint;
  std::string split = "test";
  NodeId node = 0;
  SynthesisSpec spec;
  std::string synth_out;

  auto* pre = app.add_subcommand("precompute", "build and cache transition tensors");
  add_common(pre, opts);
  pre->add_option("-o,--out", opts.out, "output directory (tensors.bin when --cache is absent)");

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, history and metrics");
  add_common(train, opts);
  train->add_option("-o,--out", opts.out, "output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
  add_common(eval, opts);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "train, val or test");
  eval->add_option("-o,--out", opts.out, "directory for the metrics file");

  auto* inspect = app.add_subcommand("inspect", "print a node's support, q and a seeded sample");
  add_common(inspect, opts);
  inspect->add_option("--node", node, "node id (1-based)")->required();
  inspect->add_option("--checkpoint", checkpoint, "take q from a trained checkpoint");

  auto* synth = app.add_subcommand("synthesize", "write a synthetic labeled multiplex graph");
  synth->add_option("--nodes", spec.nodes);
  synth->add_option("--edge-types", spec.edge_types);
  synth->add_option("--degree", spec.degree);
  synth->add_option("--classes", spec.classes);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--noise", spec.feature_noise);
  synth->add_option("--homophily", spec.homophily);
  synth->add_option("-o,--out", synth_out, "dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*pre) return cmd_precompute(opts);
    if (*train) return cmd_train(opts);
    if (*eval) return cmd_evaluate(opts, checkpoint, split);
    if (*inspect) return cmd_inspect(opts, node, checkpoint);
    if (*synth) return cmd_synthesize(spec, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "dimension mismatch: " << e.what() << '\n';
    return 5;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
