#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fsu/data/manifest.hpp"
#include "fsu/data/sequence.hpp"

namespace fsu::data {

struct ConceptCounts {
  std::size_t fg_per_class = 1;
  std::size_t ibg = 12;
  std::size_t nbg = 3;
};

// Untrimmed-video generator. Segments are latent concept vectors plus
// Gaussian noise:
//   FG  - a concept of the video's class
//   IBG - a concept from a pool shared by every class ("scene" content)
//   NBG - a concept from a small pool (logos, credits), extra noise,
//         placed preferentially near the ends of the video
// The first ceil(overlap_fraction * n_novel_classes) novel classes take
// a base IBG concept as their FG concept.
struct SyntheticConfig {
  std::size_t n_base_classes = 20;
  std::size_t n_novel_classes = 10;
  std::size_t videos_per_class = 30;
  std::size_t T = 20;
  std::size_t d_in = 32;
  ConceptCounts concepts;
  double overlap_fraction = 0.5;
  double noise_std = 0.15;
  double nbg_noise_scale = 2.5;
  double fg_fraction_min = 0.3;
  double fg_fraction_max = 0.5;
  double nbg_share = 0.4;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticDataset {
  DatasetManifest base;
  DatasetManifest novel;
  std::vector<SegmentFeatureSequence> base_videos;
  std::vector<SegmentFeatureSequence> novel_videos;
  // Index into the IBG pool for each novel class whose FG is shared, else -1.
  std::vector<int> novel_fg_from_ibg;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg);

// Writes {dir}/base/*.segf, {dir}/novel/*.segf, {dir}/base.jsonl and
// {dir}/novel.jsonl. Feature values are f32-exact so reading back is lossless.
void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);

inline constexpr const char* kBaseManifestName = "base.jsonl";
inline constexpr const char* kNovelManifestName = "novel.jsonl";

}  // namespace fsu::data
