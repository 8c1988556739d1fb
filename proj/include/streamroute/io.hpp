// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "streamroute/memory.hpp"
#include "streamroute/reason.hpp"
#include "streamroute/respond.hpp"
#include "streamroute/simulator.hpp"

namespace streamroute {

// Shortest text that reads back to the same double.
std::string format_double(double value);

// Stream replay file: one {"index", "dim", "values"} object per line with the
// frame's tokens flattened row-major.
void write_stream_jsonl(std::ostream& out, std::span<const Frame> frames);
// Throws DataError naming the line and byte offset of the first bad record.
std::vector<Frame> read_stream_jsonl(std::istream& in);

void write_queries_jsonl(std::ostream& out, std::span<const Query> queries);
std::vector<Query> read_queries_jsonl(std::istream& in);

void write_trace_jsonl(std::ostream& out, const ActionTrace& trace);
std::string metrics_json(const PipelineMetrics& metrics);

inline constexpr const char* kRunLogCsvHeader =
    "step,rho_ema,rho_raw,mean_reward,accuracy,escalate_count,answer_count";
void write_run_log_csv(std::ostream& out, const RunLog& log);
void write_run_log_jsonl(std::ostream& out, const RunLog& log);

inline constexpr const char* kSurfaceCsvHeader = "rho,e,c,delta_esc,delta_ans,r";
void write_surface_csv(std::ostream& out, std::span<const SurfaceRow> rows);

void write_readiness_jsonl(std::ostream& out, std::span<const ReadinessExample> examples);
std::vector<ReadinessExample> read_readiness_jsonl(std::istream& in);

struct TrainedParameters {
  std::vector<double> theta;
  std::vector<double> theta_reference;
  ReadinessHead readiness{0};
};

std::string parameters_json(const TrainedParameters& params);
TrainedParameters read_parameters(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace streamroute
