#include "fsu/data/sequence.hpp"

#include <algorithm>

#include "fsu/error.hpp"

namespace fsu::data {

void validate_intervals(const std::vector<Interval>& intervals, std::size_t T,
                        const std::string& context) {
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const Interval& iv = intervals[i];
    if (iv.start >= iv.end || iv.end > T) {
      throw data_error(context + ": interval [" + std::to_string(iv.start) +
                       "," + std::to_string(iv.end) + ") invalid for T=" +
                       std::to_string(T));
    }
    if (i > 0 && iv.start < prev_end) {
      throw data_error(context + ": intervals unsorted or overlapping");
    }
    prev_end = iv.end;
  }
}

void SegmentFeatureSequence::validate() const {
  validate_intervals(gt_intervals, length(), video_id);
  if (!features.all_finite()) {
    throw data_error(video_id + ": non-finite feature value");
  }
  if (!roles.empty() && roles.size() != length()) {
    throw data_error(video_id + ": roles length does not match T");
  }
}

SegmentFeatureSequence trim_support_video(const SegmentFeatureSequence& seq) {
  if (seq.gt_intervals.empty()) {
    throw data_error(seq.video_id +
                     ": support video needs temporal annotation to be trimmed");
  }
  validate_intervals(seq.gt_intervals, seq.length(), seq.video_id);

  std::size_t total = 0;
  for (const Interval& iv : seq.gt_intervals) total += iv.length();

  SegmentFeatureSequence out;
  out.video_id = seq.video_id;
  out.class_label = seq.class_label;
  out.features = numgrad::Tensor(total, seq.dim());
  std::size_t row = 0;
  for (const Interval& iv : seq.gt_intervals) {
    for (std::size_t t = iv.start; t < iv.end; ++t, ++row) {
      auto src = seq.features.row_span(t);
      std::copy(src.begin(), src.end(), out.features.row_span(row).begin());
      if (!seq.roles.empty()) out.roles.push_back(seq.roles[t]);
    }
  }
  out.gt_intervals = {Interval{0, total}};
  return out;
}

}  // namespace fsu::data
