#include "fsu/pseudo/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsu/error.hpp"

namespace fsu::pseudo {

std::vector<double> segment_confidence(const Tensor& logits, ScoreMode mode,
                                       double tau) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    if (mode == ScoreMode::kLogit) {
      out[r] = m;
      continue;
    }
    // max softmax probability = 1 / sum_k exp(tau * (l_k - max))
    double z = 0.0;
    for (double v : row) z += std::exp(tau * (v - m));
    out[r] = 1.0 / z;
  }
  return out;
}

std::size_t least_confident(const std::vector<double>& scores) {
  if (scores.empty()) throw usage_error("pseudo_label_bg: video has no segments");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

std::size_t pseudo_label_bg(const Tensor& logits) {
  return least_confident(segment_confidence(logits));
}

bool filter_nbg(std::size_t i_bg, const Tensor& logits, double t_n,
                ScoreMode mode, double tau) {
  if (i_bg >= logits.rows()) throw usage_error("filter_nbg: i_bg out of range");
  return segment_confidence(logits, mode, tau)[i_bg] < t_n;
}

std::vector<std::size_t> top_confident(const std::vector<double>& scores,
                                       std::size_t M) {
  const std::size_t T = scores.size();
  if (M < 1 || M + 1 > T) {
    throw usage_error("select_fg_ibg: M=" + std::to_string(M) +
                      " outside [1, T-1] for T=" + std::to_string(T));
  }
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(M);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> select_fg_ibg(const Tensor& logits, std::size_t M) {
  return top_confident(segment_confidence(logits), M);
}

std::size_t default_fg_ibg_count(std::size_t T) {
  return std::max<std::size_t>(2, (T + 7) / 8);
}

PseudoLabelRecord pseudo_label(const Tensor& logits, const PseudoConfig& cfg) {
  PseudoLabelRecord rec;
  rec.max_logits = segment_confidence(logits, cfg.mode, cfg.tau);
  rec.i_bg = least_confident(rec.max_logits);
  rec.is_nbg = rec.max_logits[rec.i_bg] < cfg.t_n;

  const std::size_t T = logits.rows();
  std::size_t M = cfg.fg_ibg_count == 0 ? default_fg_ibg_count(T) : cfg.fg_ibg_count;
  M = std::min(M, T - 1);
  if (M >= 1) rec.fg_ibg_indices = top_confident(rec.max_logits, M);
  return rec;
}

}  // namespace fsu::pseudo
