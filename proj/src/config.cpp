// SPDX-License-Identifier: Apache-2.0
#include "streamroute/config.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <string_view>

#include <yaml-cpp/yaml.h>

#include "streamroute/error.hpp"
#include "streamroute/io.hpp"

extern char** environ;

namespace streamroute {

namespace {

constexpr std::string_view kEnvPrefix = "STREAMROUTE_";

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// One YAML mapping being decoded. Every key read is remembered so that
// finish() can reject the rest.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(label() + " must be a mapping");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (!has_map()) return;
    YAML::Node v = node_[key];
    if (!v || v.IsNull()) return;
    if (!v.IsScalar()) throw ConfigError(join(path_, key) + " must be a scalar");
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(join(path_, key) + ": cannot parse \"" + v.Scalar() + "\"");
    }
  }

  template <typename E>
  void read_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    std::string text;
    read(key, text);
    if (text.empty()) return;
    for (const auto& [name, value] : names) {
      if (text == name) {
        out = value;
        return;
      }
    }
    throw ConfigError(join(path_, key) + ": unknown value \"" + text + "\"");
  }

  Section child(const std::string& key) {
    known_.insert(key);
    return Section(has_map() ? node_[key] : YAML::Node(), join(path_, key));
  }

  void finish() const {
    if (!has_map()) return;
    for (const auto& kv : node_) {
      std::string key = kv.first.as<std::string>();
      if (!known_.count(key)) throw ConfigError("unknown config key " + join(path_, key));
    }
  }

 private:
  bool has_map() const { return node_ && node_.IsMap(); }
  std::string label() const { return path_.empty() ? "config document" : path_; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> known_;
};

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const std::string& value,
              const std::string& full) {
  if (node && !node.IsNull() && !node.IsMap()) throw ConfigError("override " + full + " crosses a scalar");
  if (i + 1 == parts.size()) {
    node[parts[i]] = value;
    return;
  }
  YAML::Node child = node[parts[i]];
  set_path(child, parts, i + 1, value, full);
  node[parts[i]] = child;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) {
    throw ConfigError("bad override key \"" + path + "\"");
  }
  return parts;
}

void read_memory(Section s, CompressionPolicy& m) {
  s.read("tau_near", m.tau_near);
  s.read("tau_hist", m.tau_hist);
  s.read("window", m.window);
  enum class Op { Similarity, Pool, Prune };
  Op op = std::holds_alternative<AveragePool>(m.op)      ? Op::Pool
          : std::holds_alternative<DiversityPrune>(m.op) ? Op::Prune
                                                         : Op::Similarity;
  s.read_enum("operator", op,
              {{"similarity_drop", Op::Similarity}, {"average_pool", Op::Pool}, {"diversity_prune", Op::Prune}});
  AveragePool pool;
  DiversityPrune prune;
  s.read("pool_kernel", pool.kernel);
  s.read("keep_fraction", prune.keep_fraction);
  switch (op) {
    case Op::Similarity:
      m.op = SimilarityDrop{};
      break;
    case Op::Pool:
      m.op = pool;
      break;
    case Op::Prune:
      m.op = prune;
      break;
  }
  s.finish();
}

void read_trainer(Section s, RunConfig& c) {
  TrainerConfig& t = c.trainer;
  s.read("group_size", t.group_size);
  s.read("batch_size", t.batch_size);
  s.read("learning_rate", t.learning_rate);
  s.read("clip_epsilon", t.clip_epsilon);
  s.read("kl_coeff", t.kl_coeff);
  s.read("adv_epsilon", t.adv_epsilon);
  s.read("steps", t.steps);
  s.read_enum("mode", t.mode, {{"vanilla", TrainerMode::Vanilla}, {"target_balanced", TrainerMode::TargetBalanced}});
  s.read("warm_start", c.warm_start);
  s.finish();
}

void read_environment(Section s, EnvironmentConfig& e) {
  Section stream = s.child("stream");
  stream.read("length", e.stream.length);
  stream.read("tokens_per_frame", e.stream.tokens_per_frame);
  stream.read("dim", e.stream.dim);
  stream.read("temporal_correlation", e.stream.temporal_correlation);
  stream.finish();

  Section oracle = s.child("oracle");
  oracle.read("fast_a", e.oracle.fast_a);
  oracle.read("fast_b", e.oracle.fast_b);
  oracle.read("fast_c", e.oracle.fast_c);
  oracle.read("slow_a", e.oracle.slow_a);
  oracle.read("slow_b", e.oracle.slow_b);
  oracle.read("fast_cost", e.oracle.fast_cost);
  oracle.read("slow_cost", e.oracle.slow_cost);
  oracle.finish();

  Section queries = s.child("queries");
  queries.read("count", e.queries.count);
  queries.read_enum("difficulty", e.queries.distribution,
                    {{"uniform", DifficultyDistribution::Uniform}, {"mixture", DifficultyDistribution::Mixture}});
  queries.read("mixture_low", e.queries.mixture_low);
  queries.read("mixture_high", e.queries.mixture_high);
  queries.read("mixture_weight", e.queries.mixture_weight);
  queries.read("mixture_spread", e.queries.mixture_spread);
  queries.read("max_clue_delay", e.queries.max_clue_delay);
  queries.finish();

  Section readiness = s.child("readiness");
  readiness.read("epochs", e.readiness.epochs);
  readiness.read("learning_rate", e.readiness.learning_rate);
  readiness.finish();
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  memory.validate();
  band.validate();
  trainer.validate();
  environment.stream.validate();
  environment.oracle.validate();
  environment.queries.validate();
  if (environment.readiness.epochs < 1) throw ConfigError("environment.readiness.epochs must be positive");
  if (!(environment.readiness.learning_rate > 0.0)) {
    throw ConfigError("environment.readiness.learning_rate must be positive");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ConfigOverrides overrides_from_environment() {
  ConfigOverrides out;
  for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
    std::string_view entry(*env);
    if (entry.substr(0, kEnvPrefix.size()) != kEnvPrefix) continue;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string name(entry.substr(kEnvPrefix.size(), eq - kEnvPrefix.size()));
    std::string path;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name.compare(i, 2, "__") == 0) {
        path += '.';
        ++i;
      } else {
        path += static_cast<char>(std::tolower(static_cast<unsigned char>(name[i])));
      }
    }
    out[path] = std::string(entry.substr(eq + 1));
  }
  return out;
}

RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& [path, value] : overrides) set_path(root, split_path(path), 0, value, path);

  RunConfig c;
  Section top(root, "");
  top.read("seed", c.seed);
  top.read("output_dir", c.output_dir);
  read_memory(top.child("memory"), c.memory);
  Section band = top.child("band");
  band.read("eta", c.band.eta);
  band.read("gamma", c.band.gamma);
  band.finish();
  read_trainer(top.child("trainer"), c);
  read_environment(top.child("environment"), c.environment);
  top.finish();

  c.trainer.seed = c.seed;
  c.environment.stream.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, overrides);
}

std::string dump_config(const RunConfig& c) {
  auto num = [](double v) { return format_double(v); };
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << std::to_string(c.seed);
  out << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir;

  out << YAML::Key << "memory" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tau_near" << YAML::Value << num(c.memory.tau_near);
  out << YAML::Key << "tau_hist" << YAML::Value << num(c.memory.tau_hist);
  out << YAML::Key << "window" << YAML::Value << c.memory.window;
  if (const auto* pool = std::get_if<AveragePool>(&c.memory.op)) {
    out << YAML::Key << "operator" << YAML::Value << "average_pool";
    out << YAML::Key << "pool_kernel" << YAML::Value << pool->kernel;
  } else if (const auto* prune = std::get_if<DiversityPrune>(&c.memory.op)) {
    out << YAML::Key << "operator" << YAML::Value << "diversity_prune";
    out << YAML::Key << "keep_fraction" << YAML::Value << num(prune->keep_fraction);
  } else {
    out << YAML::Key << "operator" << YAML::Value << "similarity_drop";
  }
  out << YAML::EndMap;

  out << YAML::Key << "band" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "eta" << YAML::Value << num(c.band.eta);
  out << YAML::Key << "gamma" << YAML::Value << num(c.band.gamma);
  out << YAML::EndMap;

  const TrainerConfig& t = c.trainer;
  out << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "group_size" << YAML::Value << t.group_size;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << num(t.learning_rate);
  out << YAML::Key << "clip_epsilon" << YAML::Value << num(t.clip_epsilon);
  out << YAML::Key << "kl_coeff" << YAML::Value << num(t.kl_coeff);
  out << YAML::Key << "adv_epsilon" << YAML::Value << num(t.adv_epsilon);
  out << YAML::Key << "steps" << YAML::Value << t.steps;
  out << YAML::Key << "mode" << YAML::Value << (t.mode == TrainerMode::Vanilla ? "vanilla" : "target_balanced");
  out << YAML::Key << "warm_start" << YAML::Value << c.warm_start;
  out << YAML::EndMap;

  const EnvironmentConfig& e = c.environment;
  out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "stream" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "length" << YAML::Value << e.stream.length;
  out << YAML::Key << "tokens_per_frame" << YAML::Value << e.stream.tokens_per_frame;
  out << YAML::Key << "dim" << YAML::Value << e.stream.dim;
  out << YAML::Key << "temporal_correlation" << YAML::Value << num(e.stream.temporal_correlation);
  out << YAML::EndMap;
  out << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "fast_a" << YAML::Value << num(e.oracle.fast_a);
  out << YAML::Key << "fast_b" << YAML::Value << num(e.oracle.fast_b);
  out << YAML::Key << "fast_c" << YAML::Value << num(e.oracle.fast_c);
  out << YAML::Key << "slow_a" << YAML::Value << num(e.oracle.slow_a);
  out << YAML::Key << "slow_b" << YAML::Value << num(e.oracle.slow_b);
  out << YAML::Key << "fast_cost" << YAML::Value << num(e.oracle.fast_cost);
  out << YAML::Key << "slow_cost" << YAML::Value << num(e.oracle.slow_cost);
  out << YAML::EndMap;
  out << YAML::Key << "queries" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << e.queries.count;
  out << YAML::Key << "difficulty" << YAML::Value
      << (e.queries.distribution == DifficultyDistribution::Mixture ? "mixture" : "uniform");
  out << YAML::Key << "mixture_low" << YAML::Value << num(e.queries.mixture_low);
  out << YAML::Key << "mixture_high" << YAML::Value << num(e.queries.mixture_high);
  out << YAML::Key << "mixture_weight" << YAML::Value << num(e.queries.mixture_weight);
  out << YAML::Key << "mixture_spread" << YAML::Value << num(e.queries.mixture_spread);
  out << YAML::Key << "max_clue_delay" << YAML::Value << e.queries.max_clue_delay;
  out << YAML::EndMap;
  out << YAML::Key << "readiness" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epochs" << YAML::Value << e.readiness.epochs;
  out << YAML::Key << "learning_rate" << YAML::Value << num(e.readiness.learning_rate);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  write_text_file(path, dump_config(config));
}

}  // namespace streamroute
