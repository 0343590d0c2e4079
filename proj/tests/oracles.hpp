#pragma once

// Straight-line reference computations used by the unit and acceptance
// suites. Nothing here calls into the library's algorithm code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace fsu::oracle {

using Matrix = std::vector<std::vector<double>>;

inline double row_max(const std::vector<double>& row) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : row) m = v > m ? v : m;
  return m;
}

// Exhaustive scan: the first segment whose max logit is <= every other.
inline std::size_t bg_index(const Matrix& logits) {
  for (std::size_t i = 0; i < logits.size(); ++i) {
    bool minimal = true;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (row_max(logits[j]) < row_max(logits[i])) minimal = false;
      if (j < i && row_max(logits[j]) == row_max(logits[i])) minimal = false;
    }
    if (minimal) return i;
  }
  return 0;
}

// Segment i is selected iff fewer than M segments outrank it, where j
// outranks i when its score is higher or equal with a lower index.
inline std::vector<std::size_t> top_m(const Matrix& logits, std::size_t M) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::size_t beaten_by = 0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double a = row_max(logits[j]), b = row_max(logits[i]);
      if (a > b || (a == b && j < i)) ++beaten_by;
    }
    if (beaten_by < M) out.push_back(i);
  }
  return out;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Contrastive objective by enumerating every pair.
inline double contrastive(const Matrix& nbg, const Matrix& fgibg, double margin,
                          double beta) {
  double pos = 0.0;
  bool have_pos = false;
  for (std::size_t j = 0; j < nbg.size(); ++j)
    for (std::size_t k = 0; k < nbg.size(); ++k) {
      if (j == k) continue;
      const double d = sq_dist(nbg[j], nbg[k]);
      if (!have_pos || d > pos) pos = d;
      have_pos = true;
    }
  double neg = 0.0;
  if (!nbg.empty() && !fgibg.empty()) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& a : fgibg)
      for (const auto& b : nbg) closest = std::min(closest, sq_dist(a, b));
    neg = beta * std::max(0.0, margin - closest);
  }
  return pos + neg;
}

inline double tiou(std::size_t s1, std::size_t e1, std::size_t s2, std::size_t e2) {
  // count segments in intersection and union one by one
  std::size_t inter = 0, uni = 0;
  const std::size_t hi = std::max(e1, e2);
  for (std::size_t t = 0; t < hi; ++t) {
    const bool a = t >= s1 && t < e1;
    const bool b = t >= s2 && t < e2;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Det {
  std::string video;
  std::size_t start, end;
  double score;
};
struct Gt {
  std::string video;
  std::size_t start, end;
};

// Explicit precision/recall table. Interpolated precision at each rank is
// the best precision at any rank with recall >= the current recall; AP
// sums it over the ranks where recall increases.
inline double average_precision(std::vector<Det> dets, const std::vector<Gt>& gts,
                                double thr) {
  if (gts.empty()) return std::numeric_limits<double>::quiet_NaN();
  // insertion sort, stable, descending score
  for (std::size_t i = 1; i < dets.size(); ++i) {
    for (std::size_t j = i; j > 0 && dets[j].score > dets[j - 1].score; --j) {
      std::swap(dets[j], dets[j - 1]);
    }
  }
  std::vector<bool> used(gts.size(), false);
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < dets.size(); ++r) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].video != dets[r].video) continue;
      const double iou = tiou(dets[r].start, dets[r].end, gts[g].start, gts[g].end);
      if (iou >= thr && iou > best_iou) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
    precision.push_back(double(tp) / double(r + 1));
    recall.push_back(double(tp) / double(gts.size()));
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t r = 0; r < recall.size(); ++r) {
    if (recall[r] <= prev_recall) continue;
    double interp = 0.0;
    for (std::size_t k = r; k < precision.size(); ++k) interp = std::max(interp, precision[k]);
    ap += (recall[r] - prev_recall) * interp;
    prev_recall = recall[r];
  }
  return ap;
}

}  // namespace fsu::oracle
