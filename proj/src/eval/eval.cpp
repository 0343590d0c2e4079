#include "fsu/eval/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "fsu/error.hpp"

namespace fsu::eval {

namespace {

double row_norm(std::span<const double> r) {
  double s = 0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kDegenerateNorm = 1e-12;

}  // namespace

std::vector<Prototype> compute_prototypes(std::span<const Tensor> features,
                                          std::span<const std::size_t> ways,
                                          std::size_t K) {
  if (features.size() != ways.size()) {
    throw usage_error("compute_prototypes: " + std::to_string(features.size()) +
                      " feature sets for " + std::to_string(ways.size()) + " labels");
  }
  if (features.empty()) throw data_error("compute_prototypes: no support videos");
  const std::size_t d = features.front().cols();
  std::vector<Tensor> sums(K, Tensor(1, d));
  std::vector<std::size_t> counts(K, 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Tensor& f = features[i];
    if (ways[i] >= K) throw data_error("support way " + std::to_string(ways[i]) + " out of range");
    if (f.cols() != d) throw numgrad::ShapeError("compute_prototypes", {1, d}, f.shape());
    if (f.rows() == 0) throw data_error("support video with no segments");
    Tensor& s = sums[ways[i]];
    for (std::size_t t = 0; t < f.rows(); ++t)
      for (std::size_t c = 0; c < d; ++c) s(0, c) += f(t, c) / double(f.rows());
    ++counts[ways[i]];
  }
  std::vector<Prototype> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] == 0) throw data_error("class " + std::to_string(k) + " has no support videos");
    Tensor v = sums[k];
    for (double& x : v.data()) x /= double(counts[k]);
    const double n = row_norm(v.data());
    out[k].way = k;
    if (n < kDegenerateNorm) {
      out[k].vector = Tensor(1, d);
      out[k].degenerate = true;
    } else {
      for (double& x : v.data()) x /= n;
      out[k].vector = std::move(v);
    }
  }
  return out;
}

std::vector<Prototype> compute_prototypes(const model::ModelParams& params,
                                          const data::Episode& episode) {
  std::vector<Tensor> feats;
  std::vector<std::size_t> ways;
  for (const auto& item : episode.support) {
    feats.push_back(model::embed_segments(params, item.video.features));
    ways.push_back(item.way);
  }
  return compute_prototypes(feats, ways, episode.K);
}

Tensor prototype_matrix(std::span<const Prototype> prototypes) {
  if (prototypes.empty()) return Tensor();
  const std::size_t d = prototypes.front().vector.cols();
  Tensor P(prototypes.size(), d);
  for (std::size_t k = 0; k < prototypes.size(); ++k)
    for (std::size_t c = 0; c < d; ++c) P(k, c) = prototypes[k].vector(0, c);
  return P;
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw numgrad::ShapeError("cosine_matrix", a.shape(), b.shape());
  Tensor out(a.rows(), b.rows());
  std::vector<double> bn(b.rows());
  for (std::size_t j = 0; j < b.rows(); ++j) bn[j] = row_norm(b.row_span(j));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double an = row_norm(a.row_span(i));
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double den = an * bn[j];
      out(i, j) = den < kDegenerateNorm ? 0.0 : dot(a.row_span(i), b.row_span(j)) / den;
    }
  }
  return out;
}

QueryResult classify_embedded(const Tensor& f, std::span<const Prototype> prototypes,
                              const EvalConfig& cfg, const std::optional<Tensor>& attention) {
  const Tensor P = prototype_matrix(prototypes);
  const Tensor logits = cosine_matrix(f, P);
  QueryResult r;
  r.i_bg = pseudo::least_confident(
      pseudo::segment_confidence(logits, cfg.pseudo.mode, cfg.pseudo.tau));
  r.weights = attention ? *attention : losses::self_weight(f, r.i_bg, cfg.loss.tau_s, cfg.loss.c);
  const Tensor F = losses::aggregate_video_feature(f, r.weights);
  const Tensor s = cosine_matrix(F, P);

  const std::size_t K = P.rows();
  double mx = s(0, 0);
  for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, s(0, k));
  double z = 0;
  r.probabilities.resize(K);
  for (std::size_t k = 0; k < K; ++k) z += r.probabilities[k] = std::exp(s(0, k) - mx);
  for (std::size_t k = 0; k < K; ++k) {
    r.probabilities[k] /= z;
    if (r.probabilities[k] > r.probabilities[r.top1]) r.top1 = k;
    if (r.probabilities[k] > cfg.t_a) r.predicted.push_back(k);
  }
  r.features = f;
  return r;
}

QueryResult classify_query(const model::ModelParams& params, const Tensor& raw,
                           std::span<const Prototype> prototypes, const EvalConfig& cfg) {
  const Tensor f = model::embed_segments(params, raw);
  if (cfg.loss.flags.sw) return classify_embedded(f, prototypes, cfg);
  return classify_embedded(f, prototypes, cfg, model::baseline_attention(params, f));
}

double episode_accuracy(const data::Episode& episode, const model::ModelParams& params,
                        const EvalConfig& cfg) {
  if (episode.queries.empty()) return 0.0;
  const auto protos = compute_prototypes(params, episode);
  std::size_t correct = 0;
  for (const auto& q : episode.queries) {
    if (classify_query(params, q.video.features, protos, cfg).top1 == q.way) ++correct;
  }
  return double(correct) / double(episode.queries.size());
}

Tensor tcam(const Tensor& f, const Tensor& weights, std::span<const Prototype> prototypes) {
  if (weights.size() != f.rows()) {
    throw numgrad::ShapeError("tcam", {f.rows(), 1}, weights.shape());
  }
  Tensor A = cosine_matrix(f, prototype_matrix(prototypes));
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t k = 0; k < A.cols(); ++k) A(i, k) *= weights[i];
  return A;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 9; ++i) t.push_back(i / 10.0);
  return t;
}

double temporal_iou(const Interval& a, const Interval& b) {
  const std::size_t lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  const std::size_t inter = hi > lo ? hi - lo : 0;
  const std::size_t uni = a.length() + b.length() - inter;
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

std::vector<DetectionResult> extract_proposals(const Tensor& A,
                                               std::span<const double> thresholds,
                                               const std::string& video_id) {
  std::vector<DetectionResult> out;
  const std::size_t T = A.rows();
  for (std::size_t k = 0; k < A.cols(); ++k) {
    double mx = 0.0;
    for (std::size_t i = 0; i < T; ++i) mx = std::max(mx, A(i, k));
    if (!(mx > 0.0)) continue;

    std::vector<DetectionResult> cand;
    for (double theta : thresholds) {
      const double cut = theta * mx;
      std::size_t i = 0;
      while (i < T) {
        if (!(A(i, k) > cut)) {
          ++i;
          continue;
        }
        std::size_t j = i;
        double sum = 0;
        while (j < T && A(j, k) > cut) sum += A(j++, k);
        cand.push_back({video_id, k, {i, j}, sum / double(j - i)});
        i = j;
      }
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
      return a.interval.end < b.interval.end;
    });
    std::vector<DetectionResult> kept;
    for (const auto& c : cand) {
      bool suppressed = false;
      for (const auto& k2 : kept) {
        if (temporal_iou(c.interval, k2.interval) >= 0.5) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept.push_back(c);
    }
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

std::optional<double> average_precision(std::span<const DetectionResult> detections,
                                        std::span<const GroundTruth> ground_truths,
                                        double tiou_threshold) {
  if (ground_truths.empty()) return std::nullopt;
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<bool> used(ground_truths.size(), false);
  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const DetectionResult& det = detections[order[rank]];
    std::size_t best = ground_truths.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (used[g] || ground_truths[g].video_id != det.video_id) continue;
      const double iou = temporal_iou(det.interval, ground_truths[g].interval);
      if (iou >= tiou_threshold && iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < ground_truths.size()) {
      used[best] = true;
      ++tp;
    }
    precision.push_back(double(tp) / double(rank + 1));
    recall.push_back(double(tp) / double(ground_truths.size()));
  }
  // precision envelope from the right, then area over recall steps
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev) {
      ap += (recall[i] - prev) * precision[i];
      prev = recall[i];
    }
  }
  return ap;
}

std::optional<double> mean_average_precision(std::span<const DetectionResult> detections,
                                             std::span<const GroundTruth> ground_truths,
                                             std::size_t K, double tiou_threshold) {
  double sum = 0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<DetectionResult> dets;
    std::vector<GroundTruth> gts;
    for (const auto& d : detections)
      if (d.cls == k) dets.push_back(d);
    for (const auto& g : ground_truths)
      if (g.cls == k) gts.push_back(g);
    if (auto ap = average_precision(dets, gts, tiou_threshold)) {
      sum += *ap;
      ++counted;
    }
  }
  if (counted == 0) return std::nullopt;
  return sum / double(counted);
}

std::vector<double> tiou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

DetectionScores episode_detection(const data::Episode& episode,
                                  const model::ModelParams& params, const EvalConfig& cfg) {
  const auto protos = compute_prototypes(params, episode);
  const auto thresholds = default_thresholds();
  std::vector<DetectionResult> dets;
  std::vector<GroundTruth> gts;
  for (const auto& q : episode.queries) {
    const QueryResult r = classify_query(params, q.video.features, protos, cfg);
    const Tensor A = tcam(r.features, r.weights, protos);
    const auto props = extract_proposals(A, thresholds, q.video.video_id);
    dets.insert(dets.end(), props.begin(), props.end());
    for (const auto& iv : q.video.gt_intervals) gts.push_back({q.video.video_id, q.way, iv});
  }
  DetectionScores s;
  const auto levels = tiou_thresholds();
  double sum = 0;
  for (double thr : levels) {
    const double m = mean_average_precision(dets, gts, episode.K, thr).value_or(0.0);
    if (thr == 0.5) s.map_50 = m;
    sum += m;
  }
  s.average_map = sum / double(levels.size());
  return s;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double E = double(values.size());
  for (double v : values) s.mean += v;
  s.mean /= E;
  if (values.size() < 2) return s;
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.ci = 1.96 * std::sqrt(ss / (E - 1.0)) / std::sqrt(E);
  return s;
}

Report evaluate(std::span<const data::SegmentFeatureSequence> novel,
                const model::ModelParams& params, const EvaluateConfig& cfg) {
  if (cfg.episodes == 0) throw usage_error("episodes must be at least 1");
  if (cfg.K == 0 || cfg.n == 0 || cfg.q == 0) throw usage_error("K, n and q must be positive");
  Report report;
  report.mode = cfg.mode;
  report.rows.resize(cfg.episodes);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.episodes) return;
      try {
        EpisodeRow row;
        row.episode = i;
        row.seed = data::episode_seed(cfg.seed, i);
        const data::Episode ep = data::sample_episode(novel, cfg.K, cfg.n, cfg.q, row.seed);
        if (cfg.mode == Mode::kClassification) {
          row.accuracy = episode_accuracy(ep, params, cfg.scoring);
        } else {
          const DetectionScores d = episode_detection(ep, params, cfg.scoring);
          row.map_50 = d.map_50;
          row.average_map = d.average_map;
        }
        report.rows[i] = row;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cfg.episodes);
        return;
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.episodes));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> acc, m50, avg;
  for (const auto& r : report.rows) {
    acc.push_back(r.accuracy);
    m50.push_back(r.map_50);
    avg.push_back(r.average_map);
  }
  report.accuracy = summarize(acc);
  report.map_50 = summarize(m50);
  report.average_map = summarize(avg);
  return report;
}

void write_report_csv(const Report& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path.string());
  char buf[256];
  if (report.mode == Mode::kClassification) {
    out << "episode,seed,accuracy\n";
    for (const auto& r : report.rows) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g\n", r.episode,
                    static_cast<unsigned long long>(r.seed), r.accuracy);
      out << buf;
    }
  } else {
    out << "episode,seed,map_50,average_map\n";
    for (const auto& r : report.rows) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g\n", r.episode,
                    static_cast<unsigned long long>(r.seed), r.map_50, r.average_map);
      out << buf;
    }
  }
  if (!out) throw data_error("failed writing " + path.string());
}

void write_tcam_csv(const Tensor& A, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path.string());
  out << "segment";
  for (std::size_t k = 0; k < A.cols(); ++k) out << ",class_" << k;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < A.rows(); ++i) {
    out << i;
    for (std::size_t k = 0; k < A.cols(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", A(i, k));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace fsu::eval
