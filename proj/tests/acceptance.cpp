// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. With no arguments every criterion runs and prints one
// PASS/FAIL line; `acceptance N` runs criterion N only. Exit status is 0 iff
// every selected criterion passed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "streamroute/app.hpp"
#include "streamroute/error.hpp"
#include "streamroute/math.hpp"

#ifndef STREAMROUTE_GOLDEN_DIR
#error "STREAMROUTE_GOLDEN_DIR must point at tests/data/golden"
#endif

namespace sr = streamroute;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1. Naive table and band-modulated rewards against literal values.
Verdict reward_math() {
  struct Naive {
    bool e, c;
    int r;
  };
  const Naive naive[] = {{false, true, 2}, {false, false, -1}, {true, true, 1}, {true, false, 0}};
  int bad = 0;
  for (const auto& n : naive) bad += sr::naive_reward(n.e, n.c) != n.r;

  // rho, delta_esc, delta_ans, r(0,1), r(0,0), r(1,1), r(1,0) at eta=0.3, gamma=0.2.
  const double table[][7] = {
      {0.0, 0.0, 0.1, 1.8, -1.1, 1.0, 0.0},   {0.05, 0.0, 0.05, 1.9, -1.05, 1.0, 0.0},
      {0.1, 0.0, 0.0, 2.0, -1.0, 1.0, 0.0},   {0.3, 0.0, 0.0, 2.0, -1.0, 1.0, 0.0},
      {0.5, 0.0, 0.0, 2.0, -1.0, 1.0, 0.0},   {0.6, 0.1, 0.0, 2.0, -1.0, 0.9, -0.1},
      {1.0, 0.5, 0.0, 2.0, -1.0, 0.5, -0.5},
  };
  const sr::BandConfig band{0.3, 0.2};
  double worst = 0.0;
  for (const auto& row : table) {
    sr::BandPenalties p = sr::band_penalties(row[0], band);
    worst = std::max({worst, std::abs(p.delta_esc - row[1]), std::abs(p.delta_ans - row[2])});
    const bool branches[4][2] = {{false, true}, {false, false}, {true, true}, {true, false}};
    for (int b = 0; b < 4; ++b) {
      worst = std::max(worst, std::abs(sr::modulated_reward(branches[b][0], branches[b][1], p).r - row[3 + b]));
    }
  }
  return {bad == 0 && worst <= 1e-12, "naive mismatches=" + std::to_string(bad) + " max_abs_err=" + fmt(worst)};
}

// 2. Exclusivity and in-band neutrality over random (rho, eta, gamma).
Verdict band_properties() {
  sr::Rng rng(2024);
  std::size_t both = 0, neutral_fail = 0, in_band = 0;
  for (int i = 0; i < 10000; ++i) {
    sr::BandConfig band{rng.uniform(), rng.uniform()};
    double rho = i % 2 == 0 ? rng.uniform() : std::clamp(band.eta + (2.0 * rng.uniform() - 1.0) * band.gamma, 0.0, 1.0);
    sr::BandPenalties p = sr::band_penalties(rho, band);
    both += p.delta_esc * p.delta_ans != 0.0;
    if (rho >= band.eta - band.gamma && rho <= band.eta + band.gamma) {
      ++in_band;
      for (bool e : {false, true}) {
        for (bool c : {false, true}) {
          sr::RewardBreakdown r = sr::modulated_reward(e, c, p);
          neutral_fail += std::abs(r.r - sr::naive_reward(e, c)) > 1e-12;
        }
      }
    }
  }
  return {both == 0 && neutral_fail == 0,
          "both_active=" + std::to_string(both) + " in_band=" + std::to_string(in_band) +
              " neutrality_failures=" + std::to_string(neutral_fail)};
}

// 3. Zero-sum and constant-group advantages.
Verdict advantage_normalization() {
  sr::Rng rng(77);
  double worst_sum = 0.0;
  std::size_t const_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    std::size_t g = 2 + static_cast<std::size_t>(rng.uniform() * 31.0);
    std::vector<double> rewards(g);
    if (i % 10 == 0) {
      std::fill(rewards.begin(), rewards.end(), 4.0 * rng.uniform() - 2.0);
      for (double a : sr::group_advantages(rewards, 1e-6)) const_fail += a != 0.0;
    } else {
      for (double& r : rewards) r = i % 2 == 0 ? 6.0 * rng.uniform() - 3.0 : std::floor(4.0 * rng.uniform()) - 1.0;
      auto a = sr::group_advantages(rewards, 1e-6);
      double s = 0.0;
      for (double v : a) s += v;
      worst_sum = std::max(worst_sum, std::abs(s));
    }
  }
  return {worst_sum <= 1e-12 && const_fail == 0,
          "max_abs_sum=" + fmt(worst_sum) + " nonzero_in_constant_groups=" + std::to_string(const_fail)};
}

// 4. Analytic surrogate gradient against central differences.
Verdict gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    sr::Rng rng(seed * 7919);
    std::vector<double> theta_ref{rng.normal(), rng.normal()};
    std::vector<double> theta_beh{theta_ref[0] + 0.3 * rng.normal(), theta_ref[1] + 0.3 * rng.normal()};
    std::vector<double> theta{theta_beh[0] + 0.2 * rng.normal(), theta_beh[1] + 0.2 * rng.normal()};
    sr::RoutingPolicy policy(theta_ref);
    policy.set_theta(theta_beh);
    policy.snapshot_behavior();
    policy.set_theta(theta);

    sr::RolloutGroup group;
    group.query_id = "g" + std::to_string(seed);
    group.features = {1.0, 2.0 * rng.uniform() - 1.0};
    std::vector<double> rewards;
    for (int i = 0; i < 4; ++i) {
      bool e = rng.uniform() < 0.5;
      bool c = rng.uniform() < 0.6;
      group.outcomes.push_back({e, c, policy.behavior_log_prob(e, group.features)});
      rewards.push_back(sr::naive_reward(e, c));
    }
    if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) rewards[0] += 1.0;
    auto adv = sr::group_advantages(rewards, 1e-6);
    sr::TrainerConfig cfg;

    auto g = sr::tb_grpo_surrogate(group, adv, policy, cfg).gradient;
    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      auto plus = theta, minus = theta;
      plus[k] += h;
      minus[k] -= h;
      sr::RoutingPolicy pp = policy, pm = policy;
      pp.set_theta(plus);
      pm.set_theta(minus);
      double fd = (sr::tb_grpo_surrogate(group, adv, pp, cfg).loss - sr::tb_grpo_surrogate(group, adv, pm, cfg).loss) /
                  (2.0 * h);
      num += (g[k] - fd) * (g[k] - fd);
      den += fd * fd;
    }
    double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, "max_relative_error=" + fmt(worst) + " over 20 instances"};
}

sr::RunConfig default_config() { return sr::parse_config(""); }

sr::TrainedStack train_with(sr::RunConfig cfg, sr::TrainerMode mode, double eta) {
  cfg.trainer.mode = mode;
  cfg.band.eta = eta;
  return sr::train_stack(cfg, 4);
}

// 5. Vanilla collapse versus target-balanced band holding.
Verdict mode_collapse() {
  auto vanilla = train_with(default_config(), sr::TrainerMode::Vanilla, 0.3);
  auto tb = train_with(default_config(), sr::TrainerMode::TargetBalanced, 0.3);
  double rho_v = vanilla.log.tail_mean_rho(sr::kFinalWindow);
  double rho_t = tb.log.tail_mean_rho(sr::kFinalWindow);
  double rew_v = vanilla.log.tail_mean_reward(sr::kFinalWindow);
  double rew_t = tb.log.tail_mean_reward(sr::kFinalWindow);
  bool a = rho_v > 0.9;
  bool b = rho_t >= 0.05 && rho_t <= 0.55;
  bool c = rew_t >= rew_v;
  std::string d = std::string("(a) vanilla rho=") + fmt(rho_v) + (a ? " ok" : " NOT>0.9") + "; (b) tb rho=" +
                  fmt(rho_t) + (b ? " ok" : " OUTSIDE[0.05,0.55]") + "; (c) tb reward=" + fmt(rew_t) +
                  " vs vanilla reward=" + fmt(rew_v) + (c ? " ok" : " LOWER") +
                  " (naive: tb=" + fmt(tb.log.tail_mean_naive_reward(sr::kFinalWindow)) + ")";
  return {a && b && c, d};
}

// 6. Final escalation ratio non-decreasing in eta.
Verdict eta_monotonicity() {
  std::vector<double> rhos;
  for (double eta : {0.2, 0.3, 0.4}) {
    rhos.push_back(train_with(default_config(), sr::TrainerMode::TargetBalanced, eta).log.tail_mean_rho(sr::kFinalWindow));
  }
  bool ok = rhos[0] <= rhos[1] && rhos[1] <= rhos[2];
  return {ok, "rho(eta=0.2,0.3,0.4)=" + fmt(rhos[0]) + "," + fmt(rhos[1]) + "," + fmt(rhos[2])};
}

// 7. Deletion asymmetry and default compression on the correlation-0.99 stream.
Verdict compression_asymmetry() {
  sr::SyntheticStreamConfig stream;
  stream.length = 100;
  stream.tokens_per_frame = 64;
  stream.dim = 64;
  stream.temporal_correlation = 0.99;
  stream.seed = 7;
  sr::CompressionPolicy policy;  // tau_near 1.0, tau_hist 0.01, W 3
  sr::ZoneImpact impact = sr::mean_zone_deletion_impact(stream, policy.window, 100, 7);
  sr::MemoryState state = sr::replay_memory(sr::generate_stream(stream), policy);
  std::size_t nearby_dropped = state.nearby_input_count() - state.nearby_tokens().size();
  bool ok = impact.historical < impact.nearby && state.drop_ratio() >= 0.90 && nearby_dropped == 0;
  return {ok, "jsd historical=" + fmt(impact.historical) + " nearby=" + fmt(impact.nearby) +
                  " drop_ratio=" + fmt(state.drop_ratio()) + " nearby_dropped=" + std::to_string(nearby_dropped)};
}

// 8. Adaptive cascade against single-path baselines.
Verdict cascade_efficiency() {
  sr::RunConfig cfg = default_config();
  auto stack = sr::train_stack(cfg, 4);
  sr::EvalReport r = sr::evaluate(cfg, sr::parameters_of(stack), 4);
  bool ok = r.adaptive.accuracy >= r.all_fast.accuracy && r.adaptive.mean_cost <= 0.6 * r.all_slow.mean_cost;
  return {ok, "queries=" + std::to_string(r.adaptive.queries) + " acc adaptive=" + fmt(r.adaptive.accuracy) +
                  " fast=" + fmt(r.all_fast.accuracy) + " slow=" + fmt(r.all_slow.accuracy) +
                  "; cost adaptive=" + fmt(r.adaptive.mean_cost) + " slow=" + fmt(r.all_slow.mean_cost)};
}

// 9. Boundary dataset rule and a separable readiness fit.
Verdict boundary_dataset() {
  std::size_t wrong = 0;
  for (std::size_t clue = 1; clue <= 10; ++clue) {
    auto ex = sr::generate_boundary_dataset(clue, 10, [](std::size_t s) { return std::vector<double>{double(s)}; });
    std::vector<std::size_t> expected_steps;
    for (long long s = static_cast<long long>(clue) - 3; s <= static_cast<long long>(clue) + 2; ++s) {
      if (s >= 1 && s <= 10) expected_steps.push_back(static_cast<std::size_t>(s));
    }
    if (ex.size() != expected_steps.size()) {
      ++wrong;
      continue;
    }
    for (std::size_t i = 0; i < ex.size(); ++i) {
      bool ready = ex[i].step >= clue;
      wrong += ex[i].step != expected_steps[i] ||
               ex[i].offset != static_cast<int>(ex[i].step) - static_cast<int>(clue) ||
               (ex[i].label == sr::Readiness::Ready) != ready;
    }
  }
  auto toy = sr::generate_boundary_dataset(10, 100, [](std::size_t s) { return std::vector<double>{double(s) - 10.0}; });
  auto fit = sr::train_readiness_head(toy, 200, 0.5, 7);
  double acc = sr::readiness_accuracy(fit.head, toy);
  return {wrong == 0 && acc == 1.0, "rule_violations=" + std::to_string(wrong) + " toy_accuracy=" + fmt(acc)};
}

// 10. Golden replay is byte-identical across runs and worker counts.
Verdict golden_replay() {
  const std::filesystem::path golden = STREAMROUTE_GOLDEN_DIR;
  sr::RunConfig cfg = sr::load_config(golden / "config.yaml");
  const auto base = std::filesystem::temp_directory_path() / ("streamroute_acceptance_" + std::to_string(::getpid()));
  std::string expected_trace = sr::read_text_file(golden / "trace.jsonl");
  std::string expected_metrics = sr::read_text_file(golden / "metrics.json");
  int mismatches = 0;
  int run = 0;
  for (std::size_t jobs : {1, 1, 4, 8}) {
    auto out = base / std::to_string(run++);
    sr::cmd_replay(cfg, golden / "stream.jsonl", golden / "queries.jsonl", golden / "parameters.json", out, jobs);
    mismatches += sr::read_text_file(out / "trace.jsonl") != expected_trace;
    mismatches += sr::read_text_file(out / "metrics.json") != expected_metrics;
  }
  std::filesystem::remove_all(base);
  return {mismatches == 0, "runs=4 jobs={1,1,4,8} byte_mismatches=" + std::to_string(mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"reward-math exactness", reward_math},
      {"in-band neutrality and exclusivity", band_properties},
      {"advantage normalization", advantage_normalization},
      {"surrogate gradient check", gradient_check},
      {"mode-collapse replication", mode_collapse},
      {"eta monotonicity", eta_monotonicity},
      {"compression asymmetry", compression_asymmetry},
      {"cascade efficiency", cascade_efficiency},
      {"respond boundary dataset", boundary_dataset},
      {"determinism and golden replay", golden_replay},
  };

  std::vector<std::size_t> selected;
  if (argc > 1) {
    std::size_t n = std::strtoul(argv[1], nullptr, 10);
    if (n < 1 || n > criteria.size()) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu]\n", argv[0], criteria.size());
      return 1;
    }
    selected.push_back(n - 1);
  } else {
    for (std::size_t i = 0; i < criteria.size(); ++i) selected.push_back(i);
  }

  bool all = true;
  for (std::size_t i : selected) {
    auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %zu: %s | %s | %.2fs\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
