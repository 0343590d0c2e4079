#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fsu/numgrad/tensor.hpp"

namespace fsu::data {

// Half-open segment range [start, end).
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Generator ground truth for a segment. Never consumed by training.
enum class SegmentRole : char {
  kForeground = 'F',
  kInformativeBg = 'I',
  kNonInformativeBg = 'N',
};

// One untrimmed (or trimmed) video as T pre-extracted segment features.
struct SegmentFeatureSequence {
  std::string video_id;
  int class_label = 0;
  numgrad::Tensor features;  // T x d_in
  std::vector<Interval> gt_intervals;
  std::string roles;  // optional, one SegmentRole char per segment

  std::size_t length() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  // Throws a data error when intervals are unsorted, overlapping, out of
  // range, or any feature is non-finite.
  void validate() const;
};

void validate_intervals(const std::vector<Interval>& intervals, std::size_t T,
                        const std::string& context);

// Concatenation of the annotated segments. Needs at least one interval.
SegmentFeatureSequence trim_support_video(const SegmentFeatureSequence& seq);

}  // namespace fsu::data
