// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "streamroute/error.hpp"
#include "streamroute/memory.hpp"
#include "streamroute/simulator.hpp"
#include "test_util.hpp"

namespace sr = streamroute;
using sr::testing::random_frames;
using sr::testing::ref_cosine;

namespace {

// Brute-force SimilarityDrop: token j of frame f survives iff frame f has no
// predecessor in `all` or its cosine to the predecessor's token j is below tau.
std::vector<sr::MemoryToken> oracle_zone(const std::vector<sr::Frame>& all, std::size_t first, std::size_t last,
                                         double tau, bool stream_predecessor) {
  std::vector<sr::MemoryToken> out;
  for (std::size_t f = first; f <= last; ++f) {
    const sr::Frame& frame = all[f - 1];
    bool has_pred = stream_predecessor ? f >= 2 : f > first;
    for (std::size_t j = 0; j < frame.tokens.size(); ++j) {
      if (has_pred && ref_cosine(frame.tokens[j], all[f - 2].tokens[j]) >= tau - 1e-12) continue;
      out.push_back({frame.index, j, frame.tokens[j]});
    }
  }
  return out;
}

sr::SyntheticStreamConfig correlated_stream(double rho, std::uint64_t seed = 7) {
  sr::SyntheticStreamConfig c;
  c.length = 100;
  c.tokens_per_frame = 64;
  c.dim = 64;
  c.temporal_correlation = rho;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(PartitionHistory, MidStream) {
  auto p = sr::partition_history(10, 3);
  ASSERT_TRUE(p.historical.has_value());
  EXPECT_EQ(*p.historical, (sr::StepRange{1, 7}));
  EXPECT_EQ(p.nearby, (sr::StepRange{8, 10}));
}

TEST(PartitionHistory, ShorterThanWindow) {
  auto p = sr::partition_history(2, 3);
  EXPECT_FALSE(p.historical.has_value());
  EXPECT_EQ(p.nearby, (sr::StepRange{1, 2}));
}

TEST(PartitionHistory, HistoryVanishesAtWindow) {
  auto p = sr::partition_history(3, 3);
  EXPECT_FALSE(p.historical.has_value());
  EXPECT_EQ(p.nearby, (sr::StepRange{1, 3}));
}

TEST(PartitionHistory, DisjointAndCovering) {
  for (std::size_t t = 1; t <= 40; ++t) {
    for (std::size_t w = 1; w <= 6; ++w) {
      auto p = sr::partition_history(t, w);
      std::size_t covered = p.nearby.size();
      EXPECT_EQ(p.nearby.last, t);
      EXPECT_EQ(p.nearby.first, t > w ? t - w + 1 : 1);
      if (p.historical) {
        EXPECT_EQ(p.historical->first, 1u);
        EXPECT_EQ(p.historical->last + 1, p.nearby.first);
        covered += p.historical->size();
      } else {
        EXPECT_EQ(p.nearby.first, 1u);
      }
      EXPECT_EQ(covered, t);
    }
  }
}

TEST(PartitionHistory, RejectsZeroStep) { EXPECT_THROW(sr::partition_history(0, 3), sr::ConfigError); }

TEST(CompressZone, EmptyInput) { EXPECT_TRUE(sr::compress_zone({}, 0.5, sr::SimilarityDrop{}).empty()); }

TEST(CompressZone, TauOneKeepsDistinctTokens) {
  auto frames = random_frames(12, 8, 5, 3);
  auto kept = sr::compress_zone(frames, 1.0, sr::SimilarityDrop{});
  EXPECT_EQ(kept.size(), 12u * 8u);
}

TEST(CompressZone, DuplicateFrameIsDropped) {
  auto frames = random_frames(1, 6, 4, 9);
  sr::Frame copy = frames[0];
  copy.index = 2;
  frames.push_back(copy);
  auto kept = sr::compress_zone(frames, 0.5, sr::SimilarityDrop{});
  ASSERT_EQ(kept.size(), 6u);
  for (const auto& t : kept) EXPECT_EQ(t.frame, 1u);
}

TEST(CompressZone, ExactDuplicateDroppedEvenAtTauOne) {
  auto frames = random_frames(1, 3, 4, 2);
  sr::Frame scaled = frames[0];
  scaled.index = 2;
  for (auto& t : scaled.tokens) {
    for (double& v : t) v *= 2.0;
  }
  frames.push_back(scaled);
  EXPECT_EQ(sr::compress_zone(frames, 1.0, sr::SimilarityDrop{}).size(), 3u);
}

TEST(CompressZone, CorrelatedStreamDropRatio) {
  auto frames = sr::generate_stream(correlated_stream(0.99));
  auto kept = sr::compress_zone(frames, 0.01, sr::SimilarityDrop{});
  auto oracle = oracle_zone(frames, 1, frames.size(), 0.01, false);
  EXPECT_EQ(kept, oracle);
  double drop = 1.0 - static_cast<double>(kept.size()) / (100.0 * 64.0);
  EXPECT_GE(drop, 0.90);
}

TEST(CompressZone, MatchesOracleAtManyThresholds) {
  auto frames = sr::generate_stream(correlated_stream(0.5, 11));
  for (double tau : {0.05, 0.3, 0.5, 0.7, 0.95, 1.0}) {
    EXPECT_EQ(sr::compress_zone(frames, tau, sr::SimilarityDrop{}), oracle_zone(frames, 1, frames.size(), tau, false))
        << "tau=" << tau;
  }
}

TEST(CompressZone, PreservesFramePositionOrder) {
  auto frames = sr::generate_stream(correlated_stream(0.5, 5));
  auto kept = sr::compress_zone(frames, 0.5, sr::SimilarityDrop{});
  for (std::size_t i = 1; i < kept.size(); ++i) {
    EXPECT_TRUE(std::pair(kept[i - 1].frame, kept[i - 1].position) < std::pair(kept[i].frame, kept[i].position));
  }
}

TEST(CompressZone, DimensionMismatchIsStructural) {
  auto a = random_frames(1, 2, 3, 1, 1);
  auto b = random_frames(1, 2, 4, 2, 2);
  std::vector<sr::Frame> frames{a[0], b[0]};
  EXPECT_THROW(sr::compress_zone(frames, 0.5, sr::SimilarityDrop{}), sr::StructuralError);
}

TEST(CompressZone, TauOutOfRangeIsConfiguration) {
  auto frames = random_frames(2, 2, 2, 1);
  EXPECT_THROW(sr::compress_zone(frames, 0.0, sr::SimilarityDrop{}), sr::ConfigError);
  EXPECT_THROW(sr::compress_zone(frames, 1.5, sr::SimilarityDrop{}), sr::ConfigError);
}

TEST(CompressZone, MonotoneInTau) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto frames = sr::generate_stream(correlated_stream(0.6, seed));
    std::size_t previous = 0;
    for (double tau = 0.05; tau <= 1.0 + 1e-9; tau += 0.05) {
      std::size_t kept = sr::compress_zone(frames, std::min(tau, 1.0), sr::SimilarityDrop{}).size();
      EXPECT_GE(kept, previous) << "seed " << seed << " tau " << tau;
      previous = kept;
    }
  }
}

TEST(CompressZone, AveragePoolMeansRuns) {
  sr::Frame f{1, {{1, 0}, {3, 2}, {5, 4}, {7, 6}, {9, 8}}};
  std::vector<sr::Frame> frames{f};
  auto kept = sr::compress_zone(frames, 0.5, sr::AveragePool{2});
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].value, (sr::TokenVector{2, 1}));
  EXPECT_EQ(kept[1].value, (sr::TokenVector{6, 5}));
  EXPECT_EQ(kept[2].value, (sr::TokenVector{9, 8}));
  EXPECT_EQ(kept[2].position, 2u);
  EXPECT_EQ(sr::compress_zone(frames, 1.0, sr::AveragePool{2}).size(), 5u);
}

TEST(CompressZone, DiversityPruneKeepsFarthestPoints) {
  // Token 0 is picked first, then the farthest from it (3), then the one
  // farthest from {0, 3} (1).
  sr::Frame f{1, {{0, 0}, {5, 5}, {0.1, 0}, {10, 0}, {9.9, 0}}};
  std::vector<sr::Frame> frames{f};
  auto kept = sr::compress_zone(frames, 0.5, sr::DiversityPrune{0.6});
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].position, 0u);
  EXPECT_EQ(kept[1].position, 1u);
  EXPECT_EQ(kept[2].position, 3u);
  EXPECT_EQ(sr::compress_zone(frames, 1.0, sr::DiversityPrune{0.6}).size(), 5u);
}

TEST(CompressionPolicy, Validation) {
  sr::CompressionPolicy p;
  EXPECT_NO_THROW(p.validate());
  p.tau_hist = 1.5;
  EXPECT_THROW(p.validate(), sr::ConfigError);
  p = {};
  p.tau_hist = 0.9;
  p.tau_near = 0.5;
  EXPECT_THROW(p.validate(), sr::ConfigError);
  p = {};
  p.window = 0;
  EXPECT_THROW(p.validate(), sr::ConfigError);
}

TEST(UpdateMemory, FirstFrame) {
  auto frames = random_frames(1, 4, 3, 1);
  auto s = sr::update_memory({}, frames[0], {});
  EXPECT_EQ(s.nearby_tokens().size(), 4u);
  EXPECT_TRUE(s.historical_tokens().empty());
  EXPECT_EQ(s.last_frame_index(), 1u);
}

TEST(UpdateMemory, WindowSlide) {
  auto frames = random_frames(4, 4, 3, 1);
  sr::CompressionPolicy policy;
  sr::MemoryState s;
  for (int i = 0; i < 3; ++i) s = sr::update_memory(s, frames[i], policy);
  EXPECT_TRUE(s.historical_tokens().empty());
  s = sr::update_memory(s, frames[3], policy);
  ASSERT_FALSE(s.historical_tokens().empty());
  for (const auto& t : s.historical_tokens()) EXPECT_EQ(t.frame, 1u);
  EXPECT_EQ(s.historical_tokens().size(), 4u);  // no predecessor for frame 1
  std::vector<std::size_t> near;
  for (const auto& t : s.nearby_tokens()) near.push_back(t.frame);
  EXPECT_EQ(near.front(), 2u);
  EXPECT_EQ(near.back(), 4u);
}

TEST(UpdateMemory, SequencingErrors) {
  auto frames = random_frames(3, 2, 2, 1);
  sr::MemoryState s = sr::update_memory({}, frames[0], {});
  EXPECT_THROW(sr::update_memory(s, frames[0], {}), sr::SequencingError);
  EXPECT_THROW(sr::update_memory(s, frames[2], {}), sr::SequencingError);
  EXPECT_THROW(sr::update_memory({}, frames[1], {}), sr::SequencingError);
}

TEST(UpdateMemory, DimensionMismatchAcrossFrames) {
  auto a = random_frames(1, 2, 3, 1, 1);
  auto b = random_frames(1, 2, 5, 1, 2);
  sr::MemoryState s = sr::update_memory({}, a[0], {});
  EXPECT_THROW(sr::update_memory(s, b[0], {}), sr::StructuralError);
}

TEST(UpdateMemory, DefaultPolicyOnCorrelatedStream) {
  auto frames = sr::generate_stream(correlated_stream(0.99));
  auto s = sr::replay_memory(frames, {});
  EXPECT_GE(s.drop_ratio(), 0.90);
  EXPECT_EQ(s.nearby_tokens().size(), s.nearby_input_count());
  EXPECT_EQ(s.nearby_input_count(), 3u * 64u);
}

TEST(UpdateMemory, EveryStepMatchesZoneOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto frames = sr::generate_stream(correlated_stream(0.5, seed));
    frames.resize(30);
    sr::CompressionPolicy policy;
    policy.tau_near = seed % 2 ? 1.0 : 0.8;
    policy.tau_hist = 0.45;
    policy.window = 1 + seed % 4;
    sr::MemoryState s;
    for (std::size_t t = 1; t <= frames.size(); ++t) {
      s = sr::update_memory(s, frames[t - 1], policy);
      auto part = sr::partition_history(t, policy.window);
      EXPECT_EQ(s.nearby_tokens(), oracle_zone(frames, part.nearby.first, part.nearby.last, policy.tau_near, true));
      std::vector<sr::MemoryToken> hist;
      if (part.historical) hist = oracle_zone(frames, 1, part.historical->last, policy.tau_hist, true);
      EXPECT_EQ(s.historical_tokens(), hist);
    }
  }
}

TEST(UpdateMemory, HistoricalZoneEqualsCompressZoneWhenNearbyUncompressed) {
  auto frames = sr::generate_stream(correlated_stream(0.5, 3));
  sr::CompressionPolicy policy;
  policy.tau_hist = 0.5;
  auto s = sr::replay_memory(frames, policy);
  std::vector<sr::Frame> old(frames.begin(), frames.end() - 3);
  EXPECT_EQ(s.historical_tokens(), sr::compress_zone(old, 0.5, sr::SimilarityDrop{}));
}

TEST(MemoryInvariants, ZoneOrderingCountersAndConservation) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    sr::Rng rng(seed);
    std::vector<sr::Frame> frames;
    std::size_t total = 0;
    for (std::size_t f = 1; f <= 25; ++f) {
      std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 6);
      auto fr = random_frames(1, n, 3, seed * 100 + f, f);
      if (f > 1 && rng.uniform() < 0.5) fr[0].tokens.resize(std::min(n, frames.back().tokens.size()));
      total += fr[0].tokens.size();
      frames.push_back(fr[0]);
    }
    sr::CompressionPolicy policy;
    policy.tau_near = 0.9;
    policy.tau_hist = 0.1;
    policy.window = 1 + seed % 3;
    sr::MemoryState s;
    std::size_t seen = 0;
    for (const auto& f : frames) {
      s = sr::update_memory(s, f, policy);
      seen += f.tokens.size();
      EXPECT_EQ(s.input_token_count(), seen);
      EXPECT_EQ(s.retained_token_count(), s.nearby_tokens().size() + s.historical_tokens().size());
      EXPECT_LE(s.retained_token_count(), s.input_token_count());
      EXPECT_GE(s.drop_ratio(), 0.0);
      EXPECT_LE(s.drop_ratio(), 1.0);
      if (!s.nearby_tokens().empty() && !s.historical_tokens().empty()) {
        std::size_t min_near = s.nearby_tokens().front().frame;
        std::size_t max_hist = 0;
        for (const auto& t : s.historical_tokens()) max_hist = std::max(max_hist, t.frame);
        for (const auto& t : s.nearby_tokens()) min_near = std::min(min_near, t.frame);
        EXPECT_GT(min_near, max_hist);
      }
    }
    EXPECT_EQ(s.input_token_count(), total);
  }
}

TEST(MemoryInvariants, DropRatioNonIncreasingInTau) {
  auto frames = sr::generate_stream(correlated_stream(0.6, 21));
  for (auto op : {sr::CompressionOperator{sr::SimilarityDrop{}}, sr::CompressionOperator{sr::AveragePool{4}},
                  sr::CompressionOperator{sr::DiversityPrune{0.3}}}) {
    double previous = 2.0;
    for (double tau : {0.01, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      sr::CompressionPolicy p;
      p.tau_near = tau;
      p.tau_hist = tau;
      p.op = op;
      double drop = sr::replay_memory(frames, p).drop_ratio();
      EXPECT_LE(drop, previous) << "tau " << tau;
      previous = drop;
    }
  }
}

TEST(MemoryInvariants, NoCompressionIdentity) {
  auto frames = sr::generate_stream(correlated_stream(0.99, 4));
  sr::CompressionPolicy p;
  p.tau_near = 1.0;
  p.tau_hist = 1.0;
  for (auto op : {sr::CompressionOperator{sr::SimilarityDrop{}}, sr::CompressionOperator{sr::AveragePool{4}},
                  sr::CompressionOperator{sr::DiversityPrune{0.3}}}) {
    p.op = op;
    EXPECT_EQ(sr::replay_memory(frames, p).drop_ratio(), 0.0);
  }
}

TEST(MemoryInvariants, Determinism) {
  auto frames = sr::generate_stream(correlated_stream(0.9, 8));
  sr::CompressionPolicy p;
  p.tau_hist = 0.95;
  EXPECT_EQ(sr::replay_memory(frames, p), sr::replay_memory(frames, p));
}
