#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fsu/data/sequence.hpp"

namespace fsu::data {

struct EpisodeItem {
  SegmentFeatureSequence video;
  std::size_t way = 0;  // class index inside the episode, 0..K-1
};

// K-way n-shot episode: trimmed support videos and untrimmed queries.
struct Episode {
  std::size_t K = 0;
  std::size_t n = 0;
  std::size_t q = 0;
  std::vector<int> classes;         // novel label of each way
  std::map<int, std::size_t> class_remap;  // novel label -> way
  std::vector<EpisodeItem> support;  // K*n, grouped by way
  std::vector<EpisodeItem> queries;  // K*q, grouped by way
};

// Samples K classes, then n support and q query videos per class, all
// without replacement. Support videos are trimmed to their annotation.
Episode sample_episode(std::span<const SegmentFeatureSequence> novel,
                       std::size_t K, std::size_t n, std::size_t q,
                       std::uint64_t seed);

// Seed for the i-th episode of a run, so episodes are independent of the
// order (and thread) in which they are drawn.
std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t index);

}  // namespace fsu::data
