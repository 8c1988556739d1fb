// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace streamroute {

using TokenVector = std::vector<double>;

struct Frame {
  std::size_t index = 1;  // 1-based step ordinal
  std::vector<TokenVector> tokens;

  bool operator==(const Frame&) const = default;
};

// Token-wise cosine against the co-located token of the previous frame.
struct SimilarityDrop {
  bool operator==(const SimilarityDrop&) const = default;
};
// Mean over non-overlapping runs of `kernel` token positions.
struct AveragePool {
  std::size_t kernel = 4;
  bool operator==(const AveragePool&) const = default;
};
// Greedy farthest-point selection of ceil(keep_fraction * n) tokens.
struct DiversityPrune {
  double keep_fraction = 0.25;
  bool operator==(const DiversityPrune&) const = default;
};

using CompressionOperator = std::variant<SimilarityDrop, AveragePool, DiversityPrune>;

struct CompressionPolicy {
  double tau_near = 1.0;
  double tau_hist = 0.01;
  std::size_t window = 3;
  CompressionOperator op = SimilarityDrop{};

  // Throws ConfigError unless 0 < tau_hist <= tau_near <= 1 and window >= 1.
  void validate() const;
  bool operator==(const CompressionPolicy&) const = default;
};

struct MemoryToken {
  std::size_t frame = 0;
  std::size_t position = 0;
  TokenVector value;

  bool operator==(const MemoryToken&) const = default;
};

struct StepRange {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive

  std::size_t size() const noexcept { return last - first + 1; }
  bool operator==(const StepRange&) const = default;
};

struct HistoryPartition {
  std::optional<StepRange> historical;
  StepRange nearby;
};

HistoryPartition partition_history(std::size_t current_step, std::size_t window);

// Tolerance used for every similarity-threshold comparison.
inline constexpr double kSimilarityTolerance = 1e-12;

// Compresses a contiguous run of frames with a single threshold. For
// SimilarityDrop each frame is compared with the frame before it in `frames`;
// the first frame is kept whole. The other operators act per frame and only
// when tau < 1; at tau = 1 every operator keeps every token.
std::vector<MemoryToken> compress_zone(std::span<const Frame> frames, double tau, const CompressionOperator& op);

class MemoryState {
 public:
  MemoryState() = default;

  const std::vector<MemoryToken>& nearby_tokens() const noexcept { return nearby_; }
  const std::vector<MemoryToken>& historical_tokens() const noexcept { return historical_; }

  std::size_t input_token_count() const noexcept { return nearby_input_ + historical_input_; }
  std::size_t retained_token_count() const noexcept { return nearby_.size() + historical_.size(); }
  std::size_t nearby_input_count() const noexcept { return nearby_input_; }
  std::size_t historical_input_count() const noexcept { return historical_input_; }
  // Highest frame index consumed so far, 0 when empty.
  std::size_t last_frame_index() const noexcept { return last_index_; }
  // Frames currently inside the nearby window.
  std::size_t nearby_frame_count() const noexcept { return window_frames_.size(); }
  double drop_ratio() const noexcept;

  bool operator==(const MemoryState&) const = default;

 private:
  friend MemoryState update_memory(MemoryState state, const Frame& new_frame, const CompressionPolicy& policy);

  std::deque<Frame> window_frames_;
  std::optional<Frame> last_aged_;
  std::vector<MemoryToken> nearby_;
  std::vector<MemoryToken> historical_;
  std::size_t nearby_input_ = 0;
  std::size_t historical_input_ = 0;
  std::size_t last_index_ = 0;
  std::size_t dimension_ = 0;
};

// Consumes one frame. The frame leaving the nearby window (if any) is
// recompressed at tau_hist against its stream predecessor and appended to the
// historical zone; the new frame is compressed at tau_near and appended to the
// nearby zone. Throws SequencingError unless new_frame.index is one past the
// last consumed index, StructuralError on token dimension mismatch.
MemoryState update_memory(MemoryState state, const Frame& new_frame, const CompressionPolicy& policy);

// Replays a whole stream through update_memory.
MemoryState replay_memory(std::span<const Frame> frames, const CompressionPolicy& policy);

}  // namespace streamroute
