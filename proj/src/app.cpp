// SPDX-License-Identifier: Apache-2.0
#include "streamroute/app.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "streamroute/error.hpp"
#include "streamroute/parallel.hpp"

namespace streamroute {

using Json = nlohmann::ordered_json;

std::atomic<bool> g_stop_requested{false};

std::uint64_t role_seed(std::uint64_t seed, SeedRole role) {
  return derive_seed(seed, {static_cast<std::uint64_t>(role)});
}

Episode make_episode(const EnvironmentConfig& env, std::uint64_t stream_seed, std::uint64_t query_seed) {
  SyntheticStreamConfig stream = env.stream;
  stream.seed = stream_seed;
  Episode ep;
  ep.frames = generate_stream(stream);
  ep.queries = generate_queries(env.queries, stream.length, query_seed);
  return ep;
}

namespace {

class InterruptibleEnvironment : public RoutingEnvironment {
 public:
  explicit InterruptibleEnvironment(RoutingEnvironment& inner) : inner_(inner) {}
  std::optional<std::vector<QuerySample>> next_batch(std::size_t step, std::size_t batch_size) override {
    if (g_stop_requested.load()) return std::nullopt;
    return inner_.next_batch(step, batch_size);
  }
  bool correct(const QuerySample& query, bool escalate, Rng& rng) const override {
    return inner_.correct(query, escalate, rng);
  }

 private:
  RoutingEnvironment& inner_;
};

// K = 4 five-point scores per query from fast-path draws (5 when correct, 0
// otherwise), labeled at T = 2.5.
std::vector<LabeledQuery> sft_dataset(const RunConfig& config, const std::vector<double>& fidelity) {
  constexpr std::size_t kQueries = 512;
  const SftLabelerConfig labeler;
  const std::uint64_t seed = role_seed(config.seed, SeedRole::WarmStart);
  std::vector<LabeledQuery> out;
  out.reserve(kQueries);
  for (std::size_t i = 0; i < kQueries; ++i) {
    Rng rng(seed, {i});
    double d = sample_difficulty(config.environment.queries, rng);
    double fid = fidelity[std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(fidelity.size())),
                                   fidelity.size() - 1)];
    std::vector<double> scores(labeler.k);
    for (double& s : scores) s = fast_oracle_correct(d, fid, config.environment.oracle, rng.uniform()) ? 5.0 : 0.0;
    out.push_back({routing_features(d), sft_route_label(scores, labeler)});
  }
  return out;
}

void write_stream_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream ss;
  body(ss);
  write_text_file(path, ss.str());
}

}  // namespace

TrainedStack train_stack(const RunConfig& config, std::size_t jobs) {
  config.validate();
  TrainedStack stack;

  Episode readiness_episode = make_episode(config.environment, role_seed(config.seed, SeedRole::ReadinessStream),
                                           role_seed(config.seed, SeedRole::ReadinessQueries));
  stack.readiness = train_readiness_for_episode(readiness_episode.frames, readiness_episode.queries, config.memory,
                                                config.environment.readiness.epochs,
                                                config.environment.readiness.learning_rate, config.seed);

  SyntheticStreamConfig router_stream = config.environment.stream;
  router_stream.seed = role_seed(config.seed, SeedRole::RouterStream);
  SyntheticRoutingEnvironment env(router_stream, config.memory, config.environment.oracle,
                                  config.environment.queries, role_seed(config.seed, SeedRole::RouterEnvironment));

  std::vector<double> theta0(kRoutingFeatureDim, 0.0);
  if (config.warm_start) {
    auto data = sft_dataset(config, env.fidelity());
    theta0 = warm_start_theta(data, config.environment.readiness.epochs, config.environment.readiness.learning_rate);
  }
  stack.policy = RoutingPolicy(theta0);

  TrainerConfig trainer = config.trainer;
  trainer.seed = config.seed;
  trainer.jobs = jobs;
  InterruptibleEnvironment guarded(env);
  stack.log = train_router(guarded, stack.policy, config.band, trainer);
  if (stack.log.truncated && g_stop_requested.load()) stack.log.stop_reason = "interrupted";
  return stack;
}

TrainedParameters parameters_of(const TrainedStack& stack) {
  return {stack.policy.theta(), stack.policy.reference(), stack.readiness.head};
}

EvalReport evaluate(const RunConfig& config, const TrainedParameters& params, std::size_t jobs) {
  config.validate();
  if (params.theta.size() != kRoutingFeatureDim) throw DataError("routing parameters have the wrong dimension");
  Episode ep = make_episode(config.environment, role_seed(config.seed, SeedRole::EvalStream),
                            role_seed(config.seed, SeedRole::EvalQueries));
  RoutingPolicy policy(params.theta);
  PipelineOptions opt;
  opt.seed = role_seed(config.seed, SeedRole::Pipeline);
  opt.jobs = jobs;
  auto run = [&](RouteOverride route) {
    opt.route = route;
    return run_pipeline(ep.frames, ep.queries, config.memory, params.readiness, policy, config.environment.oracle,
                        opt)
        .metrics;
  };
  return {run(RouteOverride::AlwaysFast), run(RouteOverride::AlwaysSlow), run(RouteOverride::Policy)};
}

std::string eval_json(const EvalReport& report) {
  Json j;
  j["all_fast"] = Json::parse(metrics_json(report.all_fast));
  j["all_slow"] = Json::parse(metrics_json(report.all_slow));
  j["adaptive"] = Json::parse(metrics_json(report.adaptive));
  return j.dump(2) + "\n";
}

namespace {

const std::vector<std::string>& sweep_axis_names() {
  static const std::vector<std::string> names = {"tau_near", "tau_hist", "window", "eta", "gamma"};
  return names;
}

void apply_axis(RunConfig& config, const std::string& name, double value) {
  if (name == "tau_near") {
    config.memory.tau_near = value;
  } else if (name == "tau_hist") {
    config.memory.tau_hist = value;
  } else if (name == "window") {
    if (!(value >= 1.0) || value != static_cast<double>(static_cast<std::size_t>(value))) {
      throw ConfigError("sweep window values must be positive integers");
    }
    config.memory.window = static_cast<std::size_t>(value);
  } else if (name == "eta") {
    config.band.eta = value;
  } else if (name == "gamma") {
    config.band.gamma = value;
  } else {
    throw ConfigError("unknown sweep axis " + name);
  }
}

}  // namespace

SweepAxis parse_sweep_axis(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep axis must look like name=v1,v2: " + text);
  SweepAxis axis;
  axis.name = text.substr(0, eq);
  const auto& names = sweep_axis_names();
  if (std::find(names.begin(), names.end(), axis.name) == names.end()) {
    throw ConfigError("unknown sweep axis " + axis.name);
  }
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      axis.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("sweep axis " + axis.name + ": bad value \"" + item + "\"");
    }
  }
  if (axis.values.empty()) throw ConfigError("sweep axis " + axis.name + " has no values");
  return axis;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::vector<SweepAxis>& axes, std::size_t jobs) {
  if (axes.empty()) throw ConfigError("sweep needs at least one axis");
  std::size_t cells = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("sweep axis " + a.name + " has no values");
    cells *= a.values.size();
  }

  std::vector<RunConfig> configs(cells, base);
  std::vector<SweepRow> rows(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t rest = cell;
    rows[cell].values.resize(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      double v = axes[k].values[rest % axes[k].values.size()];
      rest /= axes[k].values.size();
      rows[cell].values[k] = v;
      apply_axis(configs[cell], axes[k].name, v);
    }
    configs[cell].validate();
  }

  parallel_for(cells, jobs, [&](std::size_t cell) {
    TrainedStack stack = train_stack(configs[cell], 1);
    EvalReport report = evaluate(configs[cell], parameters_of(stack), 1);
    rows[cell].train_rho = stack.log.tail_mean_rho(kFinalWindow);
    rows[cell].train_reward = stack.log.tail_mean_reward(kFinalWindow);
    rows[cell].metrics = report.adaptive;
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  for (const auto& a : axes) out << a.name << ',';
  out << "train_rho,train_reward,accuracy,escalation_ratio,routine_ratio,mean_cost,drop_ratio\n";
  for (const auto& r : rows) {
    for (double v : r.values) out << format_double(v) << ',';
    out << format_double(r.train_rho) << ',' << format_double(r.train_reward) << ','
        << format_double(r.metrics.accuracy) << ',' << format_double(r.metrics.escalation_ratio) << ','
        << format_double(r.metrics.routine_ratio) << ',' << format_double(r.metrics.mean_cost) << ','
        << format_double(r.metrics.drop_ratio) << '\n';
  }
  return out.str();
}

int cmd_train(const RunConfig& config, const std::filesystem::path& out, std::size_t jobs) {
  TrainedStack stack = train_stack(config, jobs);
  std::filesystem::create_directories(out);
  write_stream_file(out / "run_log.csv", [&](std::ostream& s) { write_run_log_csv(s, stack.log); });
  write_stream_file(out / "run_log.jsonl", [&](std::ostream& s) { write_run_log_jsonl(s, stack.log); });
  write_text_file(out / "parameters.json", parameters_json(parameters_of(stack)));
  save_config(config, out / "config.yaml");

  Json summary;
  summary["steps"] = stack.log.steps.size();
  summary["truncated"] = stack.log.truncated;
  summary["stop_reason"] = stack.log.stop_reason;
  summary["final_rho"] = stack.log.tail_mean_rho(kFinalWindow);
  summary["final_rho_ema"] = stack.log.tail_mean_rho_ema(kFinalWindow);
  summary["final_reward"] = stack.log.tail_mean_reward(kFinalWindow);
  summary["final_naive_reward"] = stack.log.tail_mean_naive_reward(kFinalWindow);
  summary["readiness_warning"] = stack.readiness.warning;
  write_text_file(out / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_eval(const RunConfig& config, const std::filesystem::path& params, const std::filesystem::path& out,
             std::size_t jobs) {
  EvalReport report = evaluate(config, read_parameters(params), jobs);
  write_text_file(out / "eval.json", eval_json(report));
  return 0;
}

int cmd_sweep(const RunConfig& config, const std::vector<SweepAxis>& axes, const std::filesystem::path& out,
              std::size_t jobs) {
  auto rows = run_sweep(config, axes, jobs);
  write_text_file(out / "sweep.csv", sweep_csv(axes, rows));
  return 0;
}

int cmd_reward_surface(const RunConfig& config, const std::vector<double>& rho_grid,
                       const std::filesystem::path& out) {
  auto rows = reward_surface_sweep(config.band, rho_grid);
  write_stream_file(out / "reward_surface.csv", [&](std::ostream& s) { write_surface_csv(s, rows); });
  return 0;
}

int cmd_replay(const RunConfig& config, const std::filesystem::path& stream, const std::filesystem::path& queries,
               const std::optional<std::filesystem::path>& params, const std::filesystem::path& out,
               std::size_t jobs) {
  std::vector<Frame> frames;
  std::vector<Query> qs;
  {
    std::ifstream in(stream, std::ios::binary);
    if (!in) throw DataError("cannot open " + stream.string());
    frames = read_stream_jsonl(in);
  }
  {
    std::ifstream in(queries, std::ios::binary);
    if (!in) throw DataError("cannot open " + queries.string());
    qs = read_queries_jsonl(in);
  }
  TrainedParameters p = params ? read_parameters(*params) : parameters_of(train_stack(config, jobs));
  PipelineOptions opt;
  opt.seed = role_seed(config.seed, SeedRole::Pipeline);
  opt.jobs = jobs;
  PipelineResult result =
      run_pipeline(frames, qs, config.memory, p.readiness, RoutingPolicy(p.theta), config.environment.oracle, opt);
  write_stream_file(out / "trace.jsonl", [&](std::ostream& s) { write_trace_jsonl(s, result.trace); });
  write_text_file(out / "metrics.json", metrics_json(result.metrics));
  return 0;
}

int cmd_dataset(const RunConfig& config, const std::filesystem::path& out) {
  config.validate();
  Episode ep = make_episode(config.environment, role_seed(config.seed, SeedRole::EvalStream),
                            role_seed(config.seed, SeedRole::EvalQueries));
  std::vector<double> fid = fidelity_trajectory(ep.frames, config.memory);
  std::vector<ReadinessExample> examples;
  for (const Query& q : ep.queries) {
    auto part = generate_boundary_dataset(q.clue_step, ep.frames.size(), [&](std::size_t step) {
      return readiness_features(q, step, fid[step - 1]);
    });
    examples.insert(examples.end(), part.begin(), part.end());
  }
  write_stream_file(out / "stream.jsonl", [&](std::ostream& s) { write_stream_jsonl(s, ep.frames); });
  write_stream_file(out / "queries.jsonl", [&](std::ostream& s) { write_queries_jsonl(s, ep.queries); });
  write_stream_file(out / "readiness.jsonl", [&](std::ostream& s) { write_readiness_jsonl(s, examples); });
  return 0;
}

int cmd_impact(const RunConfig& config, double correlation, std::size_t trials, const std::filesystem::path& out) {
  config.validate();
  SyntheticStreamConfig stream = config.environment.stream;
  stream.temporal_correlation = correlation;
  stream.seed = config.seed;
  ZoneImpact impact = mean_zone_deletion_impact(stream, config.memory.window, trials, config.seed);
  MemoryState state = replay_memory(generate_stream(stream), config.memory);

  Json j;
  j["temporal_correlation"] = correlation;
  j["trials"] = trials;
  j["historical_deletion_jsd"] = impact.historical;
  j["nearby_deletion_jsd"] = impact.nearby;
  j["drop_ratio"] = state.drop_ratio();
  j["nearby_dropped"] = state.nearby_input_count() - state.nearby_tokens().size();
  write_text_file(out / "impact.json", j.dump(2) + "\n");
  return 0;
}

}  // namespace streamroute
