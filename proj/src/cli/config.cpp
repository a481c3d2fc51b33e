#include <array>
#include <fstream>

#include "cxr/cli.hpp"
#include "cxr/error.hpp"

namespace cxr::cli {
namespace {

constexpr std::array kKeys = {
    ConfigKey{"data.dir", "", "dataset directory holding labels.csv and the images"},
    ConfigKey{"data.labels", "", "label CSV; defaults to <data.dir>/labels.csv"},
    ConfigKey{"data.schema", "", "finding schema file; empty uses the built-in schema"},
    ConfigKey{"data.strict", "true", "abort on the first bad CSV row"},
    ConfigKey{"data.image_size", "0", "resize images to this square extent; 0 keeps them"},
    ConfigKey{"synth.spec", "", "synthetic dataset spec file"},
    ConfigKey{"split.ratio", "0.7", "fraction of patients on the training side"},
    ConfigKey{"split.seed", "1", "patient shuffle seed"},
    ConfigKey{"split.leaky", "false", "image-level split ignoring patients (ablation only)"},
    ConfigKey{"model.spec", "", "layer spec file; empty uses the default network"},
    ConfigKey{"model.seed", "1", "parameter initialization seed"},
    ConfigKey{"train.learning_rate", "0.01", "SGD step size"},
    ConfigKey{"train.weight_decay", "1e-05", "L2 coefficient added to the gradient"},
    ConfigKey{"train.momentum", "0", "SGD momentum, 0 disables"},
    ConfigKey{"train.epochs", "20", "passes over the training split"},
    ConfigKey{"train.batch_size", "32", "studies per SGD step"},
    ConfigKey{"train.seed", "1", "minibatch shuffle seed"},
    ConfigKey{"train.policy", "map_to_half", "uncertain marks: map_to_half or ignore"},
    ConfigKey{"train.max_class_weight", "100", "weight used when one side has no mass"},
    ConfigKey{"head.kind", "tree", "diagnosis head: tree or dense"},
    ConfigKey{"head.hidden", "512", "dense head hidden width"},
    ConfigKey{"head.learning_rate", "0.01", "dense head SGD step size"},
    ConfigKey{"head.weight_decay", "1e-05", "dense head L2 coefficient"},
    ConfigKey{"head.epochs", "200", "dense head epochs"},
    ConfigKey{"head.batch_size", "32", "dense head batch size"},
    ConfigKey{"head.seed", "1", "dense head init and shuffle seed"},
    ConfigKey{"tree.max_depth", "4", "maximum tree depth"},
    ConfigKey{"tree.min_samples_leaf", "5", "minimum training rows per child"},
    ConfigKey{"tree.min_decrease", "0.0001", "minimum Gini decrease for a split"},
    ConfigKey{"tree.leaf_tie", "negative", "class predicted by a leaf with equal counts"},
    ConfigKey{"eval.threshold", "0.5", "fixed operating point (score > threshold)"},
    ConfigKey{"explain.upsample", "bilinear", "heatmap upsampling: bilinear or nearest"},
    ConfigKey{"explain.layer", "", "feature layer tag; empty uses the last conv block"},
    ConfigKey{"explain.alpha", "0.5", "heatmap opacity in overlays"},
};

const ConfigKey* find_key(std::string_view key) {
  for (const auto& k : kKeys)
    if (k.key == key) return &k;
  return nullptr;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  return kData;
}

std::span<const ConfigKey> config_keys() { return kKeys; }

RunConfig RunConfig::resolve(const std::filesystem::path* file,
                             const std::vector<std::string>& overrides) {
  RunConfig config;
  for (const auto& k : kKeys) config.kv_.set(k.key, std::string(k.default_value));
  if (file) {
    std::ifstream in(*file);
    if (!in) throw DataError("cannot read config file " + file->string());
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    const auto parsed = KeyValueFile::parse(text, file->string());
    for (const auto& section : parsed.sections())
      for (const auto& key : parsed.keys_in(section)) {
        if (!find_key(key))
          throw DataError(file->string() + " line " + std::to_string(parsed.line_of(key)) +
                          ": unknown key '" + key + "'");
        config.kv_.set(key, *parsed.get(key));
        config.source_[key] = file->string() + " line " + std::to_string(parsed.line_of(key));
      }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("--set expects section.key=value, got '" + o + "'");
    const std::string key = o.substr(0, eq);
    if (!find_key(key)) throw UsageError("unknown config key '" + key + "'");
    config.kv_.set(key, o.substr(eq + 1));
    config.source_[key] = "--set " + key;
  }
  // Type-check everything up front so no subcommand starts on a bad value.
  config.findings_train();
  config.head_train();
  config.tree_params();
  config.get_double("split.ratio");
  config.get_u64("split.seed");
  config.get_u64("model.seed");
  config.get_size("data.image_size");
  config.get_bool("data.strict");
  config.get_bool("split.leaky");
  config.get_double("eval.threshold");
  config.get_double("explain.alpha");
  const std::string kind = config.get("head.kind");
  if (kind != "tree" && kind != "dense")
    throw UsageError("head.kind must be tree or dense, got '" + kind + "'");
  const std::string up = config.get("explain.upsample");
  if (up != "bilinear" && up != "nearest")
    throw UsageError("explain.upsample must be bilinear or nearest, got '" + up + "'");
  return config;
}

std::string RunConfig::located(std::string_view key, const std::string& message) const {
  // Values live in an origin-less table, so its messages start with ": ".
  const std::string body = message.rfind(": ", 0) == 0 ? message.substr(2) : message;
  const auto it = source_.find(std::string(key));
  return it == source_.end() ? body : it->second + ": " + body;
}

std::string RunConfig::get(std::string_view key) const {
  if (!find_key(key)) throw UsageError("unknown config key '" + std::string(key) + "'");
  return kv_.get_or(key, "");
}

double RunConfig::get_double(std::string_view key) const {
  try {
    return kv_.get_double(key, 0.0);
  } catch (const DataError& e) {
    throw UsageError(located(key, e.what()));
  }
}

std::size_t RunConfig::get_size(std::string_view key) const {
  try {
    return static_cast<std::size_t>(kv_.get_uint(key, 0));
  } catch (const DataError& e) {
    throw UsageError(located(key, e.what()));
  }
}

std::uint64_t RunConfig::get_u64(std::string_view key) const { return get_size(key); }

bool RunConfig::get_bool(std::string_view key) const {
  try {
    return kv_.get_bool(key, false);
  } catch (const DataError& e) {
    throw UsageError(located(key, e.what()));
  }
}

void RunConfig::set(std::string_view key, std::string value) {
  if (!find_key(key)) throw UsageError("unknown config key '" + std::string(key) + "'");
  kv_.set(key, std::move(value));
  source_.erase(std::string(key));
}

TrainConfig RunConfig::findings_train() const {
  TrainConfig c;
  c.learning_rate = get_double("train.learning_rate");
  c.weight_decay = get_double("train.weight_decay");
  c.momentum = get_double("train.momentum");
  c.epochs = get_size("train.epochs");
  c.batch_size = get_size("train.batch_size");
  c.seed = get_u64("train.seed");
  try {
    c.policy = parse_policy(get("train.policy"));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  c.max_class_weight = get_double("train.max_class_weight");
  c.validate();
  return c;
}

TrainConfig RunConfig::head_train() const {
  TrainConfig c;
  c.learning_rate = get_double("head.learning_rate");
  c.weight_decay = get_double("head.weight_decay");
  c.epochs = get_size("head.epochs");
  c.batch_size = get_size("head.batch_size");
  c.seed = get_u64("head.seed");
  c.validate();
  if (get_size("head.hidden") == 0) throw UsageError("head.hidden must be positive");
  return c;
}

TreeParams RunConfig::tree_params() const {
  TreeParams p;
  p.max_depth = get_size("tree.max_depth");
  p.min_samples_leaf = get_size("tree.min_samples_leaf");
  p.min_decrease = get_double("tree.min_decrease");
  const std::string tie = get("tree.leaf_tie");
  if (tie == "negative")
    p.leaf_tie = LeafTie::Negative;
  else if (tie == "positive")
    p.leaf_tie = LeafTie::Positive;
  else
    throw UsageError("tree.leaf_tie must be negative or positive, got '" + tie + "'");
  return p;
}

std::string RunConfig::to_text() const { return kv_.to_text(); }

void RunConfig::write_snapshot(const std::filesystem::path& dir) const {
  std::ofstream out(dir / "run_config.txt");
  if (!out) throw DataError("cannot write " + (dir / "run_config.txt").string());
  out << to_text();
}

}  // namespace cxr::cli
