#include "fsu/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "fsu/data/segf.hpp"
#include "fsu/error.hpp"

namespace fsu::data {
namespace {

using numgrad::Tensor;
using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = n(rng);
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

std::string fmt(const char* pattern, std::size_t a, std::size_t b) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// Lays out FG intervals and assigns a role to every segment.
std::string layout_roles(const SyntheticConfig& cfg, Rng& rng,
                         std::vector<Interval>* intervals) {
  const std::size_t T = cfg.T;
  const auto lo = static_cast<std::size_t>(std::ceil(cfg.fg_fraction_min * T));
  const auto hi = static_cast<std::size_t>(std::floor(cfg.fg_fraction_max * T));
  const std::size_t fg_len =
      std::clamp<std::size_t>(uniform_index(rng, std::min(lo, hi), std::max(lo, hi)), 1, T);
  const std::size_t rest = T - fg_len;

  std::size_t k = uniform_index(rng, 1, 3);
  k = std::min(k, fg_len);
  while (k > 1 && rest < k - 1) --k;

  // Split fg_len into k positive parts.
  std::vector<std::size_t> cuts(fg_len - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(k - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> parts;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    parts.push_back(c - prev);
    prev = c;
  }
  parts.push_back(fg_len - prev);

  // k + 1 gaps, internal gaps at least one segment.
  std::vector<std::size_t> gaps(k + 1, 0);
  for (std::size_t i = 1; i < k; ++i) gaps[i] = 1;
  for (std::size_t u = 0; u < rest - (k - 1); ++u) gaps[uniform_index(rng, 0, k)] += 1;

  std::string roles(T, static_cast<char>(SegmentRole::kInformativeBg));
  intervals->clear();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    pos += gaps[i];
    intervals->push_back({pos, pos + parts[i]});
    for (std::size_t t = pos; t < pos + parts[i]; ++t) {
      roles[t] = static_cast<char>(SegmentRole::kForeground);
    }
    pos += parts[i];
  }

  // NBG share of the background, as blocks at the two ends of the video
  // (opening logos, closing credits).
  std::vector<std::size_t> bg;
  for (std::size_t t = 0; t < T; ++t) {
    if (roles[t] != static_cast<char>(SegmentRole::kForeground)) bg.push_back(t);
  }
  const auto n_nbg = static_cast<std::size_t>(std::lround(cfg.nbg_share * bg.size()));
  const std::size_t n_head = std::binomial_distribution<std::size_t>(n_nbg, 0.5)(rng);
  for (std::size_t i = 0; i < n_head; ++i) {
    roles[bg[i]] = static_cast<char>(SegmentRole::kNonInformativeBg);
  }
  for (std::size_t i = 0; i < n_nbg - n_head; ++i) {
    roles[bg[bg.size() - 1 - i]] = static_cast<char>(SegmentRole::kNonInformativeBg);
  }
  return roles;
}

struct Pools {
  std::vector<std::vector<std::vector<double>>> fg;  // per class label offset
  std::vector<std::vector<double>> ibg;
  std::vector<std::vector<double>> nbg;
};

SegmentFeatureSequence make_video(const SyntheticConfig& cfg, Rng& rng,
                                  const std::vector<std::vector<double>>& fg,
                                  const std::vector<std::size_t>& ibg_choices,
                                  const Pools& pools) {
  SegmentFeatureSequence seq;
  seq.roles = layout_roles(cfg, rng, &seq.gt_intervals);

  // Each video shows one or two IBG "scenes".
  std::vector<std::size_t> scene;
  const std::size_t n_scene = std::min<std::size_t>(uniform_index(rng, 1, 2), ibg_choices.size());
  std::vector<std::size_t> shuffled = ibg_choices;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  scene.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_scene));

  // One NBG source per video; one scene per background run.
  const std::size_t nbg_source = uniform_index(rng, 0, pools.nbg.size() - 1);
  std::size_t run_scene = scene.front();

  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor features(cfg.T, cfg.d_in);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const std::vector<double>* source = nullptr;
    double sigma = cfg.noise_std;
    switch (static_cast<SegmentRole>(seq.roles[t])) {
      case SegmentRole::kForeground:
        source = &fg[uniform_index(rng, 0, fg.size() - 1)];
        break;
      case SegmentRole::kInformativeBg:
        if (t > 0 && seq.roles[t - 1] != seq.roles[t]) {
          run_scene = scene[uniform_index(rng, 0, scene.size() - 1)];
        }
        source = &pools.ibg[run_scene];
        break;
      case SegmentRole::kNonInformativeBg:
        source = &pools.nbg[nbg_source];
        sigma *= cfg.nbg_noise_scale;
        break;
    }
    for (std::size_t c = 0; c < cfg.d_in; ++c) {
      features(t, c) = (*source)[c] + sigma * noise(rng);
    }
  }
  seq.features = quantize_to_f32(std::move(features));
  return seq;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& m) { throw usage_error("synthetic config: " + m); };
  if (n_base_classes < 1 || n_novel_classes < 1) fail("class counts must be >= 1");
  if (videos_per_class < 1) fail("videos_per_class must be >= 1");
  if (T < 1 || d_in < 1) fail("T and d_in must be >= 1");
  if (concepts.fg_per_class < 1 || concepts.ibg < 1 || concepts.nbg < 1) {
    fail("source counts must be >= 1");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0)) {
    fail("overlap_fraction must lie in [0,1]");
  }
  const auto shared = static_cast<std::size_t>(
      std::ceil(overlap_fraction * static_cast<double>(n_novel_classes)));
  if (shared > concepts.ibg) fail("overlap needs more IBG concepts than available");
  if (shared > 0 && concepts.ibg < 2) {
    fail("overlap needs at least two IBG concepts");
  }
  if (!(noise_std >= 0.0) || !(nbg_noise_scale >= 0.0)) fail("noise must be >= 0");
  if (!(fg_fraction_min > 0.0 && fg_fraction_min <= fg_fraction_max &&
        fg_fraction_max <= 1.0)) {
    fail("need 0 < fg_fraction_min <= fg_fraction_max <= 1");
  }
  if (!(nbg_share >= 0.0 && nbg_share <= 1.0)) fail("nbg_share must lie in [0,1]");
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const std::size_t n_classes = cfg.n_base_classes + cfg.n_novel_classes;
  Pools pools;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<std::vector<double>> concepts;
    for (std::size_t j = 0; j < cfg.concepts.fg_per_class; ++j) {
      concepts.push_back(random_unit(rng, cfg.d_in));
    }
    pools.fg.push_back(std::move(concepts));
  }
  for (std::size_t j = 0; j < cfg.concepts.ibg; ++j) pools.ibg.push_back(random_unit(rng, cfg.d_in));
  for (std::size_t j = 0; j < cfg.concepts.nbg; ++j) pools.nbg.push_back(random_unit(rng, cfg.d_in));

  SyntheticDataset ds;
  const auto shared = static_cast<std::size_t>(
      std::ceil(cfg.overlap_fraction * static_cast<double>(cfg.n_novel_classes)));
  std::vector<std::size_t> ibg_order(cfg.concepts.ibg);
  std::iota(ibg_order.begin(), ibg_order.end(), 0);
  std::shuffle(ibg_order.begin(), ibg_order.end(), rng);
  ds.novel_fg_from_ibg.assign(cfg.n_novel_classes, -1);
  for (std::size_t k = 0; k < shared; ++k) {
    const std::size_t cls = cfg.n_base_classes + k;
    ds.novel_fg_from_ibg[k] = static_cast<int>(ibg_order[k]);
    pools.fg[cls].assign(cfg.concepts.fg_per_class, pools.ibg[ibg_order[k]]);
  }

  ds.base.split = Split::kBase;
  ds.novel.split = Split::kNovel;
  std::vector<std::size_t> all_ibg(cfg.concepts.ibg);
  std::iota(all_ibg.begin(), all_ibg.end(), 0);

  for (std::size_t c = 0; c < n_classes; ++c) {
    const bool is_base = c < cfg.n_base_classes;
    const std::size_t local = is_base ? c : c - cfg.n_base_classes;
    DatasetManifest& m = is_base ? ds.base : ds.novel;
    auto& videos = is_base ? ds.base_videos : ds.novel_videos;
    const char* prefix = is_base ? "base" : "novel";
    m.classes.push_back({static_cast<int>(c), fmt(is_base ? "base_%02zu" : "novel_%02zu", local, 0)});

    // A video never shows its own FG source as background.
    std::vector<std::size_t> ibg_choices;
    const int own = is_base ? -1 : ds.novel_fg_from_ibg[local];
    for (std::size_t j : all_ibg) {
      if (static_cast<int>(j) != own) ibg_choices.push_back(j);
    }

    for (std::size_t v = 0; v < cfg.videos_per_class; ++v) {
      SegmentFeatureSequence seq = make_video(cfg, rng, pools.fg[c], ibg_choices, pools);
      seq.video_id = std::string(prefix) + fmt("_c%02zu_v%03zu", c, v);
      seq.class_label = static_cast<int>(c);

      ManifestEntry e;
      e.video_id = seq.video_id;
      e.class_label = seq.class_label;
      e.feature_file = std::string(prefix) + "/" + seq.video_id + ".segf";
      e.gt_intervals = seq.gt_intervals;
      e.roles = seq.roles;
      m.entries.push_back(std::move(e));
      videos.push_back(std::move(seq));
    }
  }
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "base");
  fs::create_directories(dir / "novel");
  auto emit = [&](DatasetManifest m, const std::vector<SegmentFeatureSequence>& videos,
                  const char* name) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      write_feature_file(videos[i].features, dir / m.entries[i].feature_file);
    }
    m.root = dir;
    write_manifest(m, dir / name);
  };
  emit(ds.base, ds.base_videos, kBaseManifestName);
  emit(ds.novel, ds.novel_videos, kNovelManifestName);
}

}  // namespace fsu::data
