// SPDX-License-Identifier: Apache-2.0
#include "streamroute/io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "streamroute/error.hpp"

namespace streamroute {

using Json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

// Calls parse(record, line_number) for every nonblank line. Any failure is
// rethrown as DataError with the line number and byte offset of the record.
void for_each_record(std::istream& in, const char* what, const std::function<void(const Json&, std::size_t)>& parse) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    const std::size_t start = offset;
    offset += line.size() + (terminated ? 1 : 0);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      parse(Json::parse(line), line_no);
    } catch (const std::exception& e) {
      std::string prefix = terminated ? std::string("malformed ") : std::string("truncated ");
      throw DataError(prefix + what + " record at line " + std::to_string(line_no) + ", byte offset " +
                      std::to_string(start) + ": " + e.what());
    }
  }
}

std::vector<double> number_array(const Json& j, const char* key) {
  const Json& arr = j.at(key);
  if (!arr.is_array()) throw DataError(std::string(key) + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw DataError(std::string(key) + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::size_t positive_index(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number_unsigned() || v.get<std::size_t>() < 1) {
    throw DataError(std::string(key) + " must be a positive integer");
  }
  return v.get<std::size_t>();
}

Json json_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void write_stream_jsonl(std::ostream& out, std::span<const Frame> frames) {
  for (const Frame& f : frames) {
    Json j;
    j["index"] = f.index;
    j["dim"] = f.tokens.empty() ? 0 : f.tokens.front().size();
    Json values = Json::array();
    for (const auto& t : f.tokens) {
      for (double v : t) values.push_back(v);
    }
    j["values"] = std::move(values);
    out << j.dump() << '\n';
  }
}

std::vector<Frame> read_stream_jsonl(std::istream& in) {
  std::vector<Frame> frames;
  for_each_record(in, "stream", [&](const Json& j, std::size_t) {
    Frame f;
    f.index = positive_index(j, "index");
    if (f.index != frames.size() + 1) {
      throw DataError("expected frame index " + std::to_string(frames.size() + 1));
    }
    std::size_t dim = j.at("dim").get<std::size_t>();
    std::vector<double> values = number_array(j, "values");
    if (dim == 0 ? !values.empty() : values.size() % dim != 0) {
      throw DataError("values length " + std::to_string(values.size()) + " is not a multiple of dim");
    }
    for (std::size_t start = 0; start < values.size(); start += dim) {
      f.tokens.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(start),
                            values.begin() + static_cast<std::ptrdiff_t>(start + dim));
    }
    frames.push_back(std::move(f));
  });
  return frames;
}

void write_queries_jsonl(std::ostream& out, std::span<const Query> queries) {
  for (const Query& q : queries) {
    Json j;
    j["id"] = q.id;
    j["arrival_step"] = q.arrival_step;
    j["clue_step"] = q.clue_step;
    j["difficulty"] = q.difficulty;
    j["features"] = q.features;
    out << j.dump() << '\n';
  }
}

std::vector<Query> read_queries_jsonl(std::istream& in) {
  std::vector<Query> queries;
  for_each_record(in, "query", [&](const Json& j, std::size_t) {
    Query q;
    q.id = j.at("id").get<std::string>();
    q.arrival_step = positive_index(j, "arrival_step");
    q.clue_step = positive_index(j, "clue_step");
    q.difficulty = j.at("difficulty").get<double>();
    if (!(q.difficulty >= 0.0 && q.difficulty <= 1.0)) throw DataError("difficulty must lie in [0, 1]");
    q.features = number_array(j, "features");
    queries.push_back(std::move(q));
  });
  return queries;
}

void write_trace_jsonl(std::ostream& out, const ActionTrace& trace) {
  for (const ActionRecord& r : trace.records) {
    Json j;
    j["step"] = r.step;
    j["query_id"] = r.query_id;
    j["action"] = to_string(r.action);
    j["p_ready"] = r.p_ready;
    j["p_escalate"] = json_or_null(r.p_escalate);
    j["correct"] = r.correct ? Json(*r.correct) : Json(nullptr);
    j["cost"] = r.cost;
    j["fidelity"] = r.fidelity;
    out << j.dump() << '\n';
  }
}

namespace {

Json metrics_object(const PipelineMetrics& m) {
  Json j;
  j["accuracy"] = m.accuracy;
  j["escalation_ratio"] = m.escalation_ratio;
  j["routine_ratio"] = m.routine_ratio;
  j["mean_cost"] = m.mean_cost;
  j["drop_ratio"] = m.drop_ratio;
  j["queries"] = m.queries;
  j["resolved"] = m.resolved;
  j["unresolved"] = m.unresolved;
  j["encounters"] = m.encounters;
  j["answers"] = m.answers;
  j["escalations"] = m.escalations;
  j["routines"] = m.routines;
  j["correct"] = m.correct;
  return j;
}

}  // namespace

std::string metrics_json(const PipelineMetrics& metrics) { return metrics_object(metrics).dump(2) + "\n"; }

void write_run_log_csv(std::ostream& out, const RunLog& log) {
  out << kRunLogCsvHeader << '\n';
  for (const StepMetrics& m : log.steps) {
    out << m.step << ',' << format_double(m.rho_ema) << ',' << format_double(m.rho_raw) << ','
        << format_double(m.mean_reward) << ',' << format_double(m.accuracy) << ',' << m.escalate_count << ','
        << m.answer_count << '\n';
  }
}

void write_run_log_jsonl(std::ostream& out, const RunLog& log) {
  for (const StepMetrics& m : log.steps) {
    Json j;
    j["step"] = m.step;
    j["rho_ema"] = m.rho_ema;
    j["rho_raw"] = m.rho_raw;
    j["mean_reward"] = m.mean_reward;
    j["mean_naive_reward"] = m.mean_naive_reward;
    j["accuracy"] = m.accuracy;
    j["escalate_count"] = m.escalate_count;
    j["answer_count"] = m.answer_count;
    j["loss"] = m.loss;
    j["kl"] = m.kl;
    j["grad_norm"] = m.grad_norm;
    Json groups = Json::array();
    for (const GroupDiagnostics& g : m.groups) {
      Json gj;
      gj["query_id"] = g.query_id;
      gj["difficulty"] = g.difficulty;
      gj["p_escalate"] = g.p_escalate;
      gj["rho"] = g.rho;
      gj["delta_esc"] = g.delta_esc;
      gj["delta_ans"] = g.delta_ans;
      gj["escalate"] = g.escalate;
      gj["correct"] = g.correct;
      gj["rewards"] = g.rewards;
      gj["advantages"] = g.advantages;
      groups.push_back(std::move(gj));
    }
    j["groups"] = std::move(groups);
    out << j.dump() << '\n';
  }
  if (log.truncated) {
    Json j;
    j["truncated"] = true;
    j["stop_reason"] = log.stop_reason;
    out << j.dump() << '\n';
  }
}

void write_surface_csv(std::ostream& out, std::span<const SurfaceRow> rows) {
  out << kSurfaceCsvHeader << '\n';
  for (const SurfaceRow& r : rows) {
    out << format_double(r.rho) << ',' << (r.escalate ? 1 : 0) << ',' << (r.correct ? 1 : 0) << ','
        << format_double(r.delta_esc) << ',' << format_double(r.delta_ans) << ',' << format_double(r.r) << '\n';
  }
}

void write_readiness_jsonl(std::ostream& out, std::span<const ReadinessExample> examples) {
  for (const ReadinessExample& ex : examples) {
    Json j;
    j["step"] = ex.step;
    j["offset"] = ex.offset;
    j["label"] = ex.label == Readiness::Ready ? "ready" : "unready";
    j["features"] = ex.features;
    out << j.dump() << '\n';
  }
}

std::vector<ReadinessExample> read_readiness_jsonl(std::istream& in) {
  std::vector<ReadinessExample> out;
  for_each_record(in, "readiness", [&](const Json& j, std::size_t) {
    ReadinessExample ex;
    ex.step = positive_index(j, "step");
    ex.offset = j.at("offset").get<int>();
    std::string label = j.at("label").get<std::string>();
    if (label != "ready" && label != "unready") throw DataError("label must be \"ready\" or \"unready\"");
    ex.label = label == "ready" ? Readiness::Ready : Readiness::Unready;
    ex.features = number_array(j, "features");
    out.push_back(std::move(ex));
  });
  return out;
}

std::string parameters_json(const TrainedParameters& params) {
  Json j;
  j["theta"] = params.theta;
  j["theta_reference"] = params.theta_reference;
  j["readiness"] = {{"weights", params.readiness.weights()}, {"bias", params.readiness.bias()}};
  return j.dump(2) + "\n";
}

TrainedParameters read_parameters(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  try {
    Json j = Json::parse(text);
    TrainedParameters p;
    p.theta = number_array(j, "theta");
    p.theta_reference = number_array(j, "theta_reference");
    const Json& r = j.at("readiness");
    p.readiness = ReadinessHead(number_array(r, "weights"), r.at("bias").get<double>());
    return p;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("bad parameter file " + path.string() + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace streamroute
