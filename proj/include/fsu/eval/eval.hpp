#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsu/data/episode.hpp"
#include "fsu/losses/losses.hpp"
#include "fsu/model/model.hpp"

namespace fsu::eval {

using data::Interval;
using numgrad::Tensor;

struct Prototype {
  std::size_t way = 0;
  Tensor vector;            // 1 x d, unit norm unless degenerate
  bool degenerate = false;  // class mean was (numerically) zero
};

// How queries are weighted and scored. `sw` off falls back to the model's
// attention network, matching how such a model was trained.
struct EvalConfig {
  losses::LossConfig loss;
  pseudo::PseudoConfig pseudo;
  double t_a = 0.5;
};

// features[i]: embedded segments (T_i x d) of a support video of way ways[i].
std::vector<Prototype> compute_prototypes(std::span<const Tensor> features,
                                          std::span<const std::size_t> ways,
                                          std::size_t K);
std::vector<Prototype> compute_prototypes(const model::ModelParams& params,
                                          const data::Episode& episode);

// K x d matrix with one prototype per row.
Tensor prototype_matrix(std::span<const Prototype> prototypes);

// Cosine between every row of `a` and every row of `b`; zero rows give 0.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

struct QueryResult {
  std::vector<double> probabilities;      // K
  std::vector<std::size_t> predicted;     // {k : prob_k > t_a}
  std::size_t top1 = 0;
  std::size_t i_bg = 0;
  Tensor weights;                         // T x 1
  Tensor features;                        // T x d
};

// Query scoring from embedded features; `attention` overrides self-weighting.
QueryResult classify_embedded(const Tensor& f, std::span<const Prototype> prototypes,
                              const EvalConfig& cfg,
                              const std::optional<Tensor>& attention = std::nullopt);
QueryResult classify_query(const model::ModelParams& params, const Tensor& raw,
                           std::span<const Prototype> prototypes, const EvalConfig& cfg);

double episode_accuracy(const data::Episode& episode, const model::ModelParams& params,
                        const EvalConfig& cfg);

// A[i,k] = w_i * cos(f_i, p_k).
Tensor tcam(const Tensor& f, const Tensor& weights, std::span<const Prototype> prototypes);

struct DetectionResult {
  std::string video_id;
  std::size_t cls = 0;
  Interval interval;
  double score = 0.0;
  friend bool operator==(const DetectionResult&, const DetectionResult&) = default;
};

struct GroundTruth {
  std::string video_id;
  std::size_t cls = 0;
  Interval interval;
};

std::vector<double> default_thresholds();

// Runs above theta * column max, scored by their mean activation, then
// per-class NMS at tIoU 0.5 keeping the higher score.
std::vector<DetectionResult> extract_proposals(const Tensor& A,
                                               std::span<const double> thresholds,
                                               const std::string& video_id = "");

double temporal_iou(const Interval& a, const Interval& b);

// Single-class AP. Detections are ranked by descending score (stable);
// each takes the unmatched same-video ground truth with the highest tIoU at
// or above the threshold. Area under the all-point interpolated PR curve.
// Empty when there are no ground truths.
std::optional<double> average_precision(std::span<const DetectionResult> detections,
                                        std::span<const GroundTruth> ground_truths,
                                        double tiou_threshold);

// Macro average of AP over the classes 0..K-1 that have ground truth.
std::optional<double> mean_average_precision(std::span<const DetectionResult> detections,
                                             std::span<const GroundTruth> ground_truths,
                                             std::size_t K, double tiou_threshold);

std::vector<double> tiou_thresholds();  // 0.50, 0.55, ..., 0.95

struct DetectionScores {
  double map_50 = 0.0;
  double average_map = 0.0;
};
DetectionScores episode_detection(const data::Episode& episode,
                                  const model::ModelParams& params, const EvalConfig& cfg);

struct Summary {
  double mean = 0.0;
  double ci = 0.0;  // 1.96 * sample sd / sqrt(E)
};
Summary summarize(std::span<const double> values);

enum class Mode { kClassification, kDetection };

struct EvaluateConfig {
  EvalConfig scoring;
  std::size_t K = 5;
  std::size_t n = 1;
  std::size_t q = 5;
  std::size_t episodes = 300;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  Mode mode = Mode::kClassification;
};

struct EpisodeRow {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;   // classification
  double map_50 = 0.0;     // detection
  double average_map = 0.0;
};

struct Report {
  Mode mode = Mode::kClassification;
  std::vector<EpisodeRow> rows;  // in episode order
  Summary accuracy;
  Summary map_50;
  Summary average_map;
};

// Episodes are drawn from per-index seeds and may run on `jobs` threads;
// results are reduced in episode order, so output is independent of jobs.
Report evaluate(std::span<const data::SegmentFeatureSequence> novel,
                const model::ModelParams& params, const EvaluateConfig& cfg);

void write_report_csv(const Report& report, const std::filesystem::path& path);
void write_tcam_csv(const Tensor& A, const std::filesystem::path& path);

}  // namespace fsu::eval
