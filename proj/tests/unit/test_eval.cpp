#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "../support.hpp"
#include "fsu/data/synthetic.hpp"
#include "fsu/eval/eval.hpp"

using namespace fsu::eval;
using fsu::data::Episode;
using fsu::data::SegmentFeatureSequence;

using namespace fsu::testing;

namespace {

Tensor unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n;
  Tensor t(1, d);
  double sq = 0;
  for (double& v : t.data()) sq += (v = n(rng)) * v;
  for (double& v : t.data()) v /= std::sqrt(sq);
  return t;
}

std::vector<Prototype> protos_from(const Tensor& rows) {
  std::vector<Prototype> out;
  for (std::size_t k = 0; k < rows.rows(); ++k) {
    Tensor v(1, rows.cols());
    for (std::size_t c = 0; c < rows.cols(); ++c) v(0, c) = rows(k, c);
    out.push_back({k, v, false});
  }
  return out;
}

// Identity transform with a centered delta kernel: embedding is plain row
// normalization.
fsu::model::ModelParams identity_model(std::size_t d, std::size_t n_base = 2) {
  fsu::model::ModelConfig mc;
  mc.d_in = d;
  mc.d = d;
  mc.kernel_width = 3;
  mc.n_base = n_base;
  auto p = fsu::model::init_params(mc, 1);
  p.transform = Tensor(d, d);
  for (std::size_t i = 0; i < d; ++i) p.transform(i, i) = 1.0;
  p.temporal_kernel = Tensor(d, 3);
  for (std::size_t i = 0; i < d; ++i) p.temporal_kernel(i, 1) = 1.0;
  return p;
}

SegmentFeatureSequence constant_video(const std::string& id, const Tensor& row, std::size_t T) {
  SegmentFeatureSequence s;
  s.video_id = id;
  s.features = Tensor(T, row.cols());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < row.cols(); ++c) s.features(t, c) = row(0, c);
  s.gt_intervals = {{0, T}};
  return s;
}

}  // namespace

TEST_CASE("prototype examples") {
  const Tensor a = Tensor::matrix(1, 2, {0.6, 0.8});
  auto p = compute_prototypes(std::vector<Tensor>{a}, std::vector<std::size_t>{0}, 1);
  CHECK(p[0].vector == a);
  CHECK_FALSE(p[0].degenerate);

  p = compute_prototypes(std::vector<Tensor>{Tensor::matrix(2, 2, {1, 0, -1, 0})},
                         std::vector<std::size_t>{0}, 1);
  CHECK(p[0].degenerate);
  CHECK(p[0].vector == Tensor(1, 2));

  p = compute_prototypes(std::vector<Tensor>{Tensor::row({1, 0}), Tensor::row({0, 1})},
                         std::vector<std::size_t>{0, 0}, 1);
  CHECK(p[0].vector(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(p[0].vector(0, 1) == doctest::Approx(std::sqrt(0.5)));

  // per-video means first: a long video does not outweigh a short one
  p = compute_prototypes(std::vector<Tensor>{Tensor::matrix(3, 2, {1, 0, 1, 0, 1, 0}),
                                             Tensor::row({0, 1})},
                         std::vector<std::size_t>{0, 0}, 1);
  CHECK(p[0].vector(0, 0) == doctest::Approx(p[0].vector(0, 1)));

  CHECK_THROWS_AS(compute_prototypes(std::vector<Tensor>{a}, std::vector<std::size_t>{0}, 2),
                  fsu::Error);
}

TEST_CASE("query probabilities") {
  const auto protos = protos_from(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  EvalConfig cfg;
  // a single segment: self-weight is positive, so F is the segment itself
  QueryResult r = classify_embedded(Tensor::row({1, 0}), protos, cfg);
  CHECK(r.probabilities[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)));
  CHECK(r.probabilities[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(r.probabilities[1] == doctest::Approx(0.2689).epsilon(1e-3));
  CHECK(r.top1 == 0);

  r = classify_embedded(Tensor::row({std::sqrt(0.5), std::sqrt(0.5)}), protos, cfg);
  CHECK(r.probabilities[0] == doctest::Approx(0.5));
  CHECK(r.probabilities[1] == doctest::Approx(0.5));

  cfg.t_a = 0.0;
  r = classify_embedded(Tensor::row({0.6, 0.8}), protos, cfg);
  CHECK(r.predicted == std::vector<std::size_t>{0, 1});
  cfg.t_a = 0.5;
  r = classify_embedded(Tensor::row({0.6, 0.8}), protos, cfg);
  CHECK(r.predicted == std::vector<std::size_t>{1});
}

TEST_CASE("query argmax ignores monotone rescaling of prototypes") {
  std::mt19937_64 rng(5);
  EvalConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor P(4, 5);
    for (std::size_t k = 0; k < 4; ++k) {
      const Tensor u = unit(rng, 5);
      for (std::size_t c = 0; c < 5; ++c) P(k, c) = u(0, c);
    }
    Tensor f(6, 5);
    for (std::size_t t = 0; t < 6; ++t) {
      const Tensor u = unit(rng, 5);
      for (std::size_t c = 0; c < 5; ++c) f(t, c) = u(0, c);
    }
    auto protos = protos_from(P);
    const QueryResult a = classify_embedded(f, protos, cfg);
    Tensor scaled = P;
    for (double& v : scaled.data()) v *= 3.0;
    const QueryResult b = classify_embedded(f, protos_from(scaled), cfg);
    CHECK(a.top1 == b.top1);
    double total = 0;
    for (double p : a.probabilities) total += p;
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("episode accuracy by enumeration") {
  const auto params = identity_model(3);
  const Tensor e0 = Tensor::row({1, 0, 0}), e1 = Tensor::row({0, 1, 0}),
               e2 = Tensor::row({0, 0, 1});
  Episode ep;
  ep.K = 3;
  ep.n = 1;
  ep.q = 2;
  ep.support = {{constant_video("s0", e0, 2), 0}, {constant_video("s1", e1, 2), 1},
                {constant_video("s2", e2, 2), 2}};
  // each query is a constant video, so its pooled feature is its row
  const Tensor rows[] = {Tensor::row({0.9, 0.1, 0}), Tensor::row({0.2, 0.7, 0.1}),
                         Tensor::row({0.1, 0.8, 0}), Tensor::row({0.6, 0.5, 0}),
                         Tensor::row({0, 0.3, 0.9}), Tensor::row({0.5, 0.1, 0.4})};
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t way = i / 2;
    ep.queries.push_back({constant_video("q" + std::to_string(i), rows[i], 4), way});
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (rows[i](0, k) > rows[i](0, best)) best = k;
    if (best == way) ++expected;
  }
  CHECK(expected == 3);
  EvalConfig cfg;
  CHECK(episode_accuracy(ep, params, cfg) == doctest::Approx(0.5));
  cfg.loss.flags.sw = false;
  CHECK(episode_accuracy(ep, params, cfg) == doctest::Approx(0.5));
}

TEST_CASE("random prototypes sit at chance") {
  std::mt19937_64 rng(7);
  EvalConfig cfg;
  std::size_t correct = 0, total = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Tensor P(5, 8);
    for (std::size_t k = 0; k < 5; ++k) {
      const Tensor u = unit(rng, 8);
      for (std::size_t c = 0; c < 8; ++c) P(k, c) = u(0, c);
    }
    Tensor f(4, 8);
    for (std::size_t t = 0; t < 4; ++t) {
      const Tensor u = unit(rng, 8);
      for (std::size_t c = 0; c < 8; ++c) f(t, c) = u(0, c);
    }
    if (classify_embedded(f, protos_from(P), cfg).top1 == rng() % 5) ++correct;
    ++total;
  }
  CHECK(double(correct) / double(total) == doctest::Approx(0.2).epsilon(0.25));
}

TEST_CASE("tcam examples") {
  const auto protos = protos_from(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Tensor f = Tensor::matrix(2, 2, {0.6, 0.8, 1, 0});
  Tensor A = tcam(f, Tensor::matrix(2, 1, {0.5, 1.0}), protos);
  CHECK(A == Tensor::matrix(2, 2, {0.3, 0.4, 1.0, 0.0}));
  A = tcam(f, Tensor::matrix(2, 1, {0.0, 1.0}), protos);
  CHECK(A(0, 0) == 0.0);
  CHECK(A(0, 1) == 0.0);
  CHECK_THROWS_AS(tcam(f, Tensor(3, 1), protos), fsu::Error);
}

TEST_CASE("proposal extraction") {
  const double half[] = {0.5};
  auto p = extract_proposals(Tensor::matrix(4, 1, {0, 1, 1, 0}), half);
  REQUIRE(p.size() == 1);
  CHECK(p[0].interval.start == 1);
  CHECK(p[0].interval.end == 3);
  CHECK(p[0].score == 1.0);

  CHECK(extract_proposals(Tensor(5, 1), default_thresholds()).empty());

  p = extract_proposals(Tensor::matrix(6, 1, {1, 1, 0, 0, 0.8, 0.8}), half);
  REQUIRE(p.size() == 2);
  CHECK(p[0].interval.start == 0);
  CHECK(p[1].interval.start == 4);

  // nested runs from different thresholds: the lower-scoring wide run is
  // suppressed only when it overlaps enough
  p = extract_proposals(Tensor::matrix(5, 1, {0.3, 1, 1, 1, 0.3}), default_thresholds());
  REQUIRE(p.size() == 1);
  CHECK(p[0].interval.start == 1);
  CHECK(p[0].interval.end == 4);

  // one list per class column
  p = extract_proposals(Tensor::matrix(3, 2, {1, 0, 0, 0, 0, 1}), half, "vid");
  REQUIRE(p.size() == 2);
  CHECK(p[0].cls == 0);
  CHECK(p[1].cls == 1);
  CHECK(p[1].video_id == "vid");
}

TEST_CASE("temporal iou") {
  CHECK(temporal_iou({0, 2}, {1, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(temporal_iou({2, 7}, {2, 7}) == 1.0);
  CHECK(temporal_iou({0, 2}, {2, 4}) == 0.0);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = a + 1; b <= 8; ++b)
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t d = c + 1; d <= 8; ++d) {
          const double x = temporal_iou({a, b}, {c, d});
          CHECK(x == temporal_iou({c, d}, {a, b}));
          CHECK(x == fsu::oracle::tiou(a, b, c, d));
          CHECK((x == 1.0) == (a == c && b == d));
        }
}

TEST_CASE("average precision examples") {
  const std::vector<GroundTruth> one = {{"v", 0, {0, 4}}};
  std::vector<DetectionResult> d = {{"v", 0, {0, 4}, 0.9}};
  CHECK(*average_precision(d, one, 0.5) == 1.0);
  d = {{"v", 0, {0, 2}, 0.9}};  // tIoU 0.5 exactly is a match
  CHECK(*average_precision(d, one, 0.5) == 1.0);
  d = {{"v", 0, {2, 7}, 0.9}};  // tIoU 2/7
  CHECK(*average_precision(d, one, 0.5) == 0.0);
  d = {{"w", 0, {0, 4}, 0.9}};
  CHECK(*average_precision(d, one, 0.5) == 0.0);

  const std::vector<GroundTruth> two = {{"v", 0, {0, 4}}, {"v", 0, {10, 14}}};
  d = {{"v", 0, {0, 4}, 0.9}, {"v", 0, {5, 8}, 0.8}, {"v", 0, {10, 14}, 0.7}};
  CHECK(*average_precision(d, two, 0.5) == doctest::Approx(5.0 / 6.0));

  CHECK_FALSE(average_precision(d, {}, 0.5).has_value());
  CHECK(*average_precision({}, two, 0.5) == 0.0);
}

TEST_CASE("average precision matches the brute-force table") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 500; ++trial) {
    const Instance in = random_instance(rng);
    for (double thr : {0.3, 0.5, 0.75}) {
      const auto got = average_precision(in.dets, in.gts, thr);
      const double want = fsu::oracle::average_precision(to_oracle(in.dets), to_oracle(in.gts), thr);
      if (in.gts.empty()) {
        CHECK_FALSE(got.has_value());
      } else {
        REQUIRE(got.has_value());
        CHECK(std::abs(*got - want) < 1e-12);
        CHECK(*got >= 0.0);
        CHECK(*got <= 1.0);
      }
    }
  }
}

TEST_CASE("average precision depends only on score order") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = random_instance(rng);
    if (in.gts.empty()) continue;
    const double base = *average_precision(in.dets, in.gts, 0.5);
    for (auto& d : in.dets) d.score = std::exp(3.0 * d.score) - 7.0;
    CHECK(*average_precision(in.dets, in.gts, 0.5) == base);
  }
}

TEST_CASE("mean average precision skips classes without ground truth") {
  const std::vector<GroundTruth> gts = {{"v", 0, {0, 4}}, {"v", 2, {4, 6}}};
  const std::vector<DetectionResult> dets = {
      {"v", 0, {0, 4}, 0.9}, {"v", 1, {0, 4}, 0.9}, {"v", 2, {0, 2}, 0.5}};
  CHECK(*mean_average_precision(dets, gts, 3, 0.5) == doctest::Approx(0.5));
  CHECK_FALSE(mean_average_precision(dets, {}, 3, 0.5).has_value());
}

TEST_CASE("summaries") {
  const std::vector<double> flat(10, 0.8);
  Summary s = summarize(flat);
  CHECK(s.mean == doctest::Approx(0.8));
  CHECK(s.ci == doctest::Approx(0.0));
  s = summarize(std::vector<double>{0.6, 1.0});
  CHECK(s.mean == doctest::Approx(0.8));
  CHECK(s.ci == doctest::Approx(1.96 * std::sqrt(0.08) / std::sqrt(2.0)));
  CHECK(s.ci == doctest::Approx(0.392).epsilon(1e-3));
}

TEST_CASE("evaluation is deterministic and independent of job count") {
  fsu::data::SyntheticConfig sc;
  sc.n_base_classes = 4;
  sc.n_novel_classes = 6;
  sc.videos_per_class = 8;
  sc.T = 12;
  sc.d_in = 8;
  const auto ds = fsu::data::generate_synthetic_dataset(sc);
  fsu::model::ModelConfig mc;
  mc.d_in = 8;
  mc.d = 8;
  mc.n_base = 4;
  const auto params = fsu::model::init_params(mc, 3);

  for (Mode mode : {Mode::kClassification, Mode::kDetection}) {
    EvaluateConfig cfg;
    cfg.episodes = 12;
    cfg.mode = mode;
    const Report a = evaluate(ds.novel_videos, params, cfg);
    cfg.jobs = 3;
    const Report b = evaluate(ds.novel_videos, params, cfg);
    REQUIRE(a.rows.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(a.rows[i].seed == b.rows[i].seed);
      CHECK(a.rows[i].accuracy == b.rows[i].accuracy);
      CHECK(a.rows[i].map_50 == b.rows[i].map_50);
      CHECK(a.rows[i].average_map == b.rows[i].average_map);
    }
    CHECK(a.accuracy.mean == b.accuracy.mean);
    CHECK(a.average_map.ci == b.average_map.ci);
  }
}

TEST_CASE("detection scores match an independent AP computation") {
  fsu::data::SyntheticConfig sc;
  sc.n_base_classes = 4;
  sc.n_novel_classes = 6;
  sc.videos_per_class = 8;
  sc.T = 16;
  sc.d_in = 8;
  const auto ds = fsu::data::generate_synthetic_dataset(sc);
  fsu::model::ModelConfig mc;
  mc.d_in = 8;
  mc.d = 8;
  mc.n_base = 4;
  const auto params = fsu::model::init_params(mc, 9);
  EvalConfig cfg;

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Episode ep = fsu::data::sample_episode(ds.novel_videos, 3, 1, 3, seed);
    const auto protos = compute_prototypes(params, ep);
    std::vector<std::vector<fsu::oracle::Det>> dets(ep.K);
    std::vector<std::vector<fsu::oracle::Gt>> gts(ep.K);
    for (const auto& q : ep.queries) {
      const QueryResult r = classify_query(params, q.video.features, protos, cfg);
      const Tensor A = tcam(r.features, r.weights, protos);
      for (const auto& d : extract_proposals(A, default_thresholds(), q.video.video_id)) {
        dets[d.cls].push_back({d.video_id, d.interval.start, d.interval.end, d.score});
      }
      for (const auto& iv : q.video.gt_intervals) gts[q.way].push_back({q.video.video_id, iv.start, iv.end});
    }
    double avg = 0, at50 = 0;
    for (double thr : tiou_thresholds()) {
      double m = 0;
      for (std::size_t k = 0; k < ep.K; ++k) m += fsu::oracle::average_precision(dets[k], gts[k], thr);
      m /= double(ep.K);
      if (thr == 0.5) at50 = m;
      avg += m / 10.0;
    }
    const DetectionScores s = episode_detection(ep, params, cfg);
    CHECK(std::abs(s.map_50 - at50) < 1e-9);
    CHECK(std::abs(s.average_map - avg) < 1e-9);

    // average mAP never exceeds the best single threshold
    double best = 0;
    for (double thr : tiou_thresholds()) {
      double m = 0;
      for (std::size_t k = 0; k < ep.K; ++k) m += fsu::oracle::average_precision(dets[k], gts[k], thr);
      best = std::max(best, m / double(ep.K));
    }
    CHECK(s.average_map <= best + 1e-12);
  }
}
