#include "gatas/config.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "gatas/error.hpp"

namespace gatas {

using nlohmann::json;

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kMultiClass: return "multi-class";
    case Task::kMultiLabel: return "multi-label";
    case Task::kLinkPrediction: return "link-prediction";
  }
  return "?";
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::kFull: return "full";
    case Ablation::kBase: return "base";
    case Ablation::kNoTrans: return "no-trans";
    case Ablation::kNoEmbed: return "no-embed";
    case Ablation::kNoPaths: return "no-paths";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  for (Task t : {Task::kMultiClass, Task::kMultiLabel, Task::kLinkPrediction}) {
    if (to_string(t) == text) return t;
  }
  throw ConfigError("unknown task '" + std::string(text) +
                    "' (expected multi-class, multi-label or link-prediction)");
}

Ablation parse_ablation(std::string_view text) {
  for (Ablation a : {Ablation::kFull, Ablation::kBase, Ablation::kNoTrans, Ablation::kNoEmbed,
                     Ablation::kNoPaths}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown ablation '" + std::string(text) +
                    "' (expected full, base, no-trans, no-embed or no-paths)");
}

Config defaults_for(Task task) {
  Config c;
  c.task = task;
  switch (task) {
    case Task::kMultiClass:
      break;  // struct defaults are the transductive node classification settings
    case Task::kMultiLabel:
      c.node_embedding_size = 0;
      c.edge_embedding_size = 6;  // positional encodings need an even size
      c.heads = 10;
      c.input_noise_rate = 0.0;
      c.dropout = 0.0;
      c.l2 = 0.0;
      c.patience = 10;
      c.batch_size = 100;
      break;
    case Task::kLinkPrediction:
      c.max_steps = 2;
      c.node_embedding_size = 50;
      c.edge_embedding_size = 50;
      c.heads = 10;
      c.input_noise_rate = 0.0;
      c.dropout = 0.0;
      c.l2 = 0.0;
      c.patience = 5;
      c.batch_size = 200;
      break;
  }
  return c;
}

void Config::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (max_steps < 1) fail("max_steps must be >= 1");
  if (sample_size < 1) fail("sample_size must be >= 1");
  if (layer_size < 1) fail("layer_size must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (edge_embedding_size % 2 != 0) fail("edge_embedding_size must be even");
  if (edge_embedding_size == 0 && ablation != Ablation::kNoPaths && ablation != Ablation::kBase) {
    fail("edge_embedding_size must be > 0 unless paths are ablated");
  }
  if (input_noise_rate < 0.0 || input_noise_rate >= 1.0) fail("input_noise_rate must lie in [0, 1)");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (l2 < 0.0) fail("l2 must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (patience > max_epochs) fail("patience must not exceed max_epochs");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0) {
    fail("val_fraction + test_fraction must lie in [0, 1)");
  }
  if (task == Task::kLinkPrediction && head_hidden_size < 1) fail("head_hidden_size must be >= 1");
}

namespace {

template <typename V>
void read(const json& doc, const char* key, V& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

Config config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  Task task = Task::kMultiClass;
  if (doc.contains("task")) {
    if (!doc["task"].is_string()) throw ConfigError("config key 'task' must be a string");
    task = parse_task(doc["task"].get<std::string>());
  }
  Config c = defaults_for(task);
  if (doc.contains("ablation")) {
    if (!doc["ablation"].is_string()) throw ConfigError("config key 'ablation' must be a string");
    c.ablation = parse_ablation(doc["ablation"].get<std::string>());
  }

  static const char* const kKnown[] = {
      "task", "ablation", "max_steps", "sample_size", "layer_size", "node_embedding_size",
      "edge_embedding_size", "heads", "head_hidden_size", "input_noise_rate", "dropout", "l2",
      "l2_exclude_biases_embeddings", "learning_rate", "max_epochs", "patience", "batch_size",
      "seed", "freeze_samples", "val_fraction", "test_fraction", "threads", "dataset", "cache"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  read(doc, "max_steps", c.max_steps);
  read(doc, "sample_size", c.sample_size);
  read(doc, "layer_size", c.layer_size);
  read(doc, "node_embedding_size", c.node_embedding_size);
  read(doc, "edge_embedding_size", c.edge_embedding_size);
  read(doc, "heads", c.heads);
  read(doc, "head_hidden_size", c.head_hidden_size);
  read(doc, "input_noise_rate", c.input_noise_rate);
  read(doc, "dropout", c.dropout);
  read(doc, "l2", c.l2);
  read(doc, "l2_exclude_biases_embeddings", c.l2_exclude_biases_embeddings);
  read(doc, "learning_rate", c.learning_rate);
  read(doc, "max_epochs", c.max_epochs);
  read(doc, "patience", c.patience);
  read(doc, "batch_size", c.batch_size);
  read(doc, "seed", c.seed);
  read(doc, "freeze_samples", c.freeze_samples);
  read(doc, "val_fraction", c.val_fraction);
  read(doc, "test_fraction", c.test_fraction);
  read(doc, "threads", c.threads);
  read(doc, "dataset", c.dataset);
  read(doc, "cache", c.cache);
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::string config_to_json(const Config& c) {
  json doc = {
      {"task", std::string(to_string(c.task))},
      {"ablation", std::string(to_string(c.ablation))},
      {"max_steps", c.max_steps},
      {"sample_size", c.sample_size},
      {"layer_size", c.layer_size},
      {"node_embedding_size", c.node_embedding_size},
      {"edge_embedding_size", c.edge_embedding_size},
      {"heads", c.heads},
      {"head_hidden_size", c.head_hidden_size},
      {"input_noise_rate", c.input_noise_rate},
      {"dropout", c.dropout},
      {"l2", c.l2},
      {"l2_exclude_biases_embeddings", c.l2_exclude_biases_embeddings},
      {"learning_rate", c.learning_rate},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"freeze_samples", c.freeze_samples},
      {"val_fraction", c.val_fraction},
      {"test_fraction", c.test_fraction},
      {"threads", c.threads},
      {"dataset", c.dataset},
      {"cache", c.cache},
  };
  return doc.dump(2);
}

}  // namespace gatas
