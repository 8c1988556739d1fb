// SPDX-License-Identifier: Apache-2.0
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "streamroute/app.hpp"
#include "streamroute/error.hpp"

namespace py = pybind11;
namespace sr = streamroute;

namespace {

py::dict metrics_dict(const sr::PipelineMetrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["escalation_ratio"] = m.escalation_ratio;
  d["routine_ratio"] = m.routine_ratio;
  d["mean_cost"] = m.mean_cost;
  d["drop_ratio"] = m.drop_ratio;
  d["queries"] = m.queries;
  d["resolved"] = m.resolved;
  d["unresolved"] = m.unresolved;
  return d;
}

std::vector<std::vector<std::vector<double>>> frames_to_lists(const std::vector<sr::Frame>& frames) {
  std::vector<std::vector<std::vector<double>>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.tokens);
  return out;
}

std::vector<sr::Frame> lists_to_frames(const std::vector<std::vector<std::vector<double>>>& frames) {
  std::vector<sr::Frame> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out[i] = {i + 1, frames[i]};
  return out;
}

}  // namespace

PYBIND11_MODULE(_streamroute, m) {
  m.doc() = "Streaming memory compression, readiness gating and band-regularized compute routing";
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<sr::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<sr::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<sr::StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<sr::SequencingError>(m, "SequencingError", base.ptr());
  py::register_exception<sr::DataError>(m, "DataError", base.ptr());
  py::register_exception<sr::NumericalError>(m, "NumericalError", base.ptr());

  m.def(
      "partition_history",
      [](std::size_t t, std::size_t window) {
        auto p = sr::partition_history(t, window);
        std::optional<std::pair<std::size_t, std::size_t>> hist;
        if (p.historical) hist = std::make_pair(p.historical->first, p.historical->last);
        return py::make_tuple(hist, std::make_pair(p.nearby.first, p.nearby.last));
      },
      py::arg("current_step"), py::arg("window"), "Inclusive (historical, nearby) step ranges; historical may be None");

  m.def(
      "generate_stream",
      [](std::size_t length, std::size_t tokens, std::size_t dim, double correlation, std::uint64_t seed) {
        return frames_to_lists(sr::generate_stream({length, tokens, dim, correlation, seed}));
      },
      py::arg("length") = 100, py::arg("tokens_per_frame") = 64, py::arg("dim") = 64,
      py::arg("temporal_correlation") = 0.6, py::arg("seed") = 7, "Seeded AR(1) token stream as nested lists");

  m.def(
      "drop_ratio",
      [](const std::vector<std::vector<std::vector<double>>>& frames, double tau_near, double tau_hist,
         std::size_t window) {
        auto state = sr::replay_memory(lists_to_frames(frames), {tau_near, tau_hist, window});
        return state.drop_ratio();
      },
      py::arg("frames"), py::arg("tau_near") = 1.0, py::arg("tau_hist") = 0.01, py::arg("window") = 3,
      "Fraction of tokens dropped after replaying frames through the two-zone memory");

  m.def("naive_reward", &sr::naive_reward, py::arg("escalate"), py::arg("correct"));
  m.def(
      "band_penalties",
      [](double rho, double eta, double gamma) {
        auto p = sr::band_penalties(rho, {eta, gamma});
        return py::make_tuple(p.delta_esc, p.delta_ans);
      },
      py::arg("rho"), py::arg("eta") = 0.3, py::arg("gamma") = 0.2, "(delta_esc, delta_ans) for a group ratio");
  m.def(
      "modulated_reward",
      [](bool e, bool c, double delta_esc, double delta_ans) {
        return sr::modulated_reward(e, c, {delta_esc, delta_ans}).r;
      },
      py::arg("escalate"), py::arg("correct"), py::arg("delta_esc") = 0.0, py::arg("delta_ans") = 0.0);
  m.def(
      "group_advantages",
      [](const std::vector<double>& rewards, double eps) { return sr::group_advantages(rewards, eps); },
      py::arg("rewards"), py::arg("adv_epsilon") = 1e-6);

  m.def(
      "readiness_probability",
      [](const std::vector<double>& weights, double bias, const std::vector<double>& features) {
        return sr::readiness_probability(sr::ReadinessHead(weights, bias), features);
      },
      py::arg("weights"), py::arg("bias"), py::arg("features"));
  m.def(
      "generate_boundary_dataset",
      [](std::size_t clue, std::size_t length, const std::function<std::vector<double>(std::size_t)>& featurizer) {
        py::list out;
        for (const auto& e : sr::generate_boundary_dataset(clue, length, featurizer)) {
          out.append(py::make_tuple(e.step, e.offset, e.features, e.label == sr::Readiness::Ready));
        }
        return out;
      },
      py::arg("clue_step"), py::arg("stream_length"), py::arg("featurizer"),
      "List of (step, offset, features, ready) tuples");

  m.def(
      "jsd", [](const std::vector<double>& p, const std::vector<double>& q) { return sr::jsd(p, q); }, py::arg("p"),
      py::arg("q"));

  m.def(
      "default_config", []() { return sr::dump_config(sr::RunConfig{}); }, "Default run configuration as YAML");
  m.def(
      "normalize_config", [](const std::string& yaml) { return sr::dump_config(sr::parse_config(yaml)); },
      py::arg("yaml"), "Validate YAML and return it with every default filled in");

  m.def(
      "train",
      [](const std::string& yaml, std::size_t jobs) {
        sr::RunConfig config = sr::parse_config(yaml);
        sr::TrainedStack stack;
        {
          py::gil_scoped_release release;
          stack = sr::train_stack(config, jobs);
        }
        std::vector<double> rho;
        for (const auto& s : stack.log.steps) rho.push_back(s.rho_raw);
        py::dict d;
        d["theta"] = stack.policy.theta();
        d["rho"] = rho;
        d["final_rho"] = stack.log.steps.empty() ? 0.0 : stack.log.tail_mean_rho(sr::kFinalWindow);
        d["readiness_weights"] = stack.readiness.head.weights();
        d["readiness_bias"] = stack.readiness.head.bias();
        return d;
      },
      py::arg("config_yaml") = "", py::arg("jobs") = 1, "Train readiness and router; returns parameters and rho trace");

  m.def(
      "evaluate",
      [](const std::string& yaml, std::size_t jobs) {
        sr::RunConfig config = sr::parse_config(yaml);
        sr::EvalReport report;
        {
          py::gil_scoped_release release;
          report = sr::evaluate(config, sr::parameters_of(sr::train_stack(config, jobs)), jobs);
        }
        py::dict d;
        d["all_fast"] = metrics_dict(report.all_fast);
        d["all_slow"] = metrics_dict(report.all_slow);
        d["adaptive"] = metrics_dict(report.adaptive);
        return d;
      },
      py::arg("config_yaml") = "", py::arg("jobs") = 1, "Train, then compare all-fast, all-slow and adaptive");
}
