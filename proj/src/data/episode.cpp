#include "fsu/data/episode.hpp"

#include <algorithm>
#include <random>

#include "fsu/error.hpp"

namespace fsu::data {

std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Episode sample_episode(std::span<const SegmentFeatureSequence> novel,
                       std::size_t K, std::size_t n, std::size_t q,
                       std::uint64_t seed) {
  if (K == 0 || n == 0) throw usage_error("episode needs K >= 1 and n >= 1");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < novel.size(); ++i) {
    by_class[novel[i].class_label].push_back(i);
  }
  if (by_class.size() < K) {
    throw data_error("cannot sample " + std::to_string(K) + "-way episode from " +
                     std::to_string(by_class.size()) + " novel classes");
  }

  std::mt19937_64 rng(seed);
  std::vector<int> labels;
  for (const auto& [label, _] : by_class) labels.push_back(label);
  std::shuffle(labels.begin(), labels.end(), rng);
  labels.resize(K);

  Episode ep;
  ep.K = K;
  ep.n = n;
  ep.q = q;
  ep.classes = labels;
  for (std::size_t way = 0; way < K; ++way) {
    const int label = labels[way];
    ep.class_remap[label] = way;
    std::vector<std::size_t> pool = by_class[label];
    if (pool.size() < n + q) {
      throw data_error("novel class " + std::to_string(label) + " has " +
                       std::to_string(pool.size()) + " videos, episode needs " +
                       std::to_string(n + q));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t j = 0; j < n; ++j) {
      ep.support.push_back({trim_support_video(novel[pool[j]]), way});
    }
    for (std::size_t j = n; j < n + q; ++j) {
      ep.queries.push_back({novel[pool[j]], way});
    }
  }
  return ep;
}

}  // namespace fsu::data
