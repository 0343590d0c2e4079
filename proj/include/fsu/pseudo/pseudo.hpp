#pragma once

#include <cstddef>
#include <vector>

#include "fsu/numgrad/tensor.hpp"

namespace fsu::pseudo {

using numgrad::Tensor;

// Per-segment confidence: the raw max logit, or the max of softmax(tau * logits).
enum class ScoreMode { kLogit, kProbability };

struct PseudoConfig {
  double t_n = 0.25;
  std::size_t fg_ibg_count = 0;  // 0 selects max(2, ceil(T/8))
  ScoreMode mode = ScoreMode::kLogit;
  double tau = 10.0;  // only used in probability mode
};

struct PseudoLabelRecord {
  std::size_t i_bg = 0;
  bool is_nbg = false;
  std::vector<std::size_t> fg_ibg_indices;  // ascending
  std::vector<double> max_logits;           // per-segment confidence
};

// Row-wise confidence scores of a T x N logit matrix.
std::vector<double> segment_confidence(const Tensor& logits,
                                       ScoreMode mode = ScoreMode::kLogit,
                                       double tau = 10.0);

// argmin over segments of the max logit; ties go to the lowest index.
std::size_t pseudo_label_bg(const Tensor& logits);
std::size_t least_confident(const std::vector<double>& scores);

// True iff the confidence of segment i_bg is below t_n.
bool filter_nbg(std::size_t i_bg, const Tensor& logits, double t_n,
                ScoreMode mode = ScoreMode::kLogit, double tau = 10.0);

// Indices of the M most confident segments (ties to the lower index),
// returned in ascending order. Requires 1 <= M <= T-1.
std::vector<std::size_t> select_fg_ibg(const Tensor& logits, std::size_t M);
std::vector<std::size_t> top_confident(const std::vector<double>& scores,
                                       std::size_t M);

std::size_t default_fg_ibg_count(std::size_t T);

// Full pseudo-labeling of one video. M is clamped to T-1 so degenerate
// short videos never abort training.
PseudoLabelRecord pseudo_label(const Tensor& logits, const PseudoConfig& cfg);

}  // namespace fsu::pseudo
