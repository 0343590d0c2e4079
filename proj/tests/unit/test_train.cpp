#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fsu/model/checkpoint.hpp"
#include "fsu/train/train.hpp"

using namespace fsu::train;
using fsu::data::SegmentFeatureSequence;
using fsu::numgrad::Tensor;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fsu_test_train_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Two classes whose segments sit near +e0 or +e1, plus a shared noisy tail.
std::vector<SegmentFeatureSequence> toy_videos(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<SegmentFeatureSequence> out;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t v = 0; v < per_class; ++v) {
      SegmentFeatureSequence s;
      s.video_id = "toy_" + std::to_string(c) + "_" + std::to_string(v);
      s.class_label = c;
      s.features = Tensor(6, 4);
      for (std::size_t t = 0; t < 6; ++t) {
        for (std::size_t k = 0; k < 4; ++k) s.features(t, k) = n(rng);
        s.features(t, t < 4 ? c : 3) += 1.0;
      }
      s.gt_intervals = {{0, 4}};
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::size_t> toy_labels(const std::vector<SegmentFeatureSequence>& v) {
  std::vector<std::size_t> out;
  for (const auto& s : v) out.push_back(static_cast<std::size_t>(s.class_label));
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.model.d = 8;
  cfg.model.kernel_width = 3;
  cfg.model.attn_hidden = 4;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("nesterov step examples") {
  Tensor p = Tensor::scalar(0.0);
  Tensor* ps[] = {&p};
  const Tensor g[] = {Tensor::scalar(1.0)};
  OptimizerState st;
  st.velocity = {Tensor::scalar(0.0)};
  st.lr = 0.1;
  st.momentum = 0.9;
  nesterov_step(ps, g, st);
  CHECK(st.velocity[0].item() == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(p.item() == doctest::Approx(-0.19).epsilon(1e-15));

  // zero gradient and zero velocity is a fixed point
  Tensor q = Tensor::row({0.3, -2.0});
  Tensor* qs[] = {&q};
  const Tensor zero[] = {Tensor(1, 2)};
  OptimizerState still;
  still.velocity = {Tensor(1, 2)};
  nesterov_step(qs, zero, still);
  CHECK(q == Tensor::row({0.3, -2.0}));

  // no momentum is plain gradient descent
  Tensor r = Tensor::row({1.0, 2.0});
  Tensor* rs[] = {&r};
  const Tensor gr[] = {Tensor::row({0.5, -1.0})};
  OptimizerState gd;
  gd.velocity = {Tensor(1, 2)};
  gd.lr = 0.2;
  gd.momentum = 0.0;
  for (int i = 0; i < 3; ++i) nesterov_step(rs, gr, gd);
  CHECK(r(0, 0) == doctest::Approx(1.0 - 3 * 0.2 * 0.5));
  CHECK(r(0, 1) == doctest::Approx(2.0 + 3 * 0.2 * 1.0));
}

TEST_CASE("nesterov step rejects mismatched shapes") {
  Tensor p(2, 2);
  Tensor* ps[] = {&p};
  OptimizerState st;
  st.velocity = {Tensor(2, 2)};
  const Tensor bad[] = {Tensor(2, 3)};
  CHECK_THROWS_AS(nesterov_step(ps, bad, st), fsu::numgrad::ShapeError);
  st.velocity = {Tensor(1, 1)};
  const Tensor good[] = {Tensor(2, 2)};
  CHECK_THROWS_AS(nesterov_step(ps, good, st), fsu::numgrad::ShapeError);
  const std::vector<Tensor> two = {Tensor(2, 2), Tensor(2, 2)};
  CHECK_THROWS_AS(nesterov_step(ps, two, st), fsu::Error);
}

TEST_CASE("model step keeps classifier rows unit norm") {
  fsu::model::ModelConfig mc;
  mc.d_in = 4;
  mc.d = 6;
  mc.n_base = 3;
  auto params = fsu::model::init_params(mc, 2);
  auto st = OptimizerState::zeros_like(params, 0.5, 0.9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int step = 0; step < 10; ++step) {
    std::vector<Tensor> grads;
    for (const Tensor* t : params.tensors()) {
      Tensor gt(t->rows(), t->cols());
      for (double& v : gt.data()) v = n(rng);
      grads.push_back(gt);
    }
    nesterov_step(params, grads, st);
    for (std::size_t r = 0; r < params.classifier.rows(); ++r) {
      double sq = 0;
      for (double v : params.classifier.row_span(r)) sq += v * v;
      CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("loss falls on a separable toy problem") {
  const auto videos = toy_videos(8, 11);
  const auto labels = toy_labels(videos);
  TrainConfig cfg = small_config();
  cfg.loss.gamma1 = 0.0;
  cfg.loss.gamma2 = 0.0;
  cfg.batch_size = 16;
  cfg.epochs = 50;
  const TrainResult res = train_on_sequences(videos, labels, 2, cfg);
  REQUIRE(res.log.size() == 50);
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    head += res.log[i].total;
    tail += res.log[45 + i].total;
  }
  CHECK(tail < head);
  CHECK(res.log.back().total < res.log.front().total);
  CHECK(training_accuracy(res.params, videos, labels, cfg.loss, cfg.pseudo) == 1.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto videos = toy_videos(6, 13);
  const auto labels = toy_labels(videos);
  const TrainConfig cfg = small_config();
  const TrainResult a = train_on_sequences(videos, labels, 2, cfg);
  const TrainResult b = train_on_sequences(videos, labels, 2, cfg);
  CHECK(a.params.transform == b.params.transform);
  CHECK(a.params.temporal_kernel == b.params.temporal_kernel);
  CHECK(a.params.classifier == b.params.classifier);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].total == b.log[i].total);

  TrainConfig other = cfg;
  other.seed = 6;
  CHECK_FALSE(train_on_sequences(videos, labels, 2, other).params.transform == a.params.transform);
}

TEST_CASE("loss weights are inert when their terms are switched off") {
  const auto videos = toy_videos(4, 17);
  const auto labels = toy_labels(videos);
  TrainConfig a = small_config();
  a.loss.flags = fsu::losses::AblationFlags::parse("soft");
  TrainConfig b = a;
  b.loss.gamma1 = 0.0;
  b.loss.gamma2 = 0.0;
  const auto ra = train_on_sequences(videos, labels, 2, a);
  const auto rb = train_on_sequences(videos, labels, 2, b);
  CHECK(ra.params.classifier == rb.params.classifier);
  CHECK(ra.params.attn_out == rb.params.attn_out);
  for (const auto& row : ra.log) {
    CHECK(row.contrast == 0.0);
    CHECK(row.bg == 0.0);
    CHECK(row.total == row.cls);
  }
}

TEST_CASE("one log row per step") {
  const auto videos = toy_videos(5, 19);  // 10 videos
  const auto labels = toy_labels(videos);
  TrainConfig cfg = small_config();
  cfg.batch_size = 4;  // 3 batches per epoch
  cfg.epochs = 2;
  std::size_t seen = 0;
  TrainOptions opts;
  opts.on_step = [&](const LogRow& r) { CHECK(r.step == seen++); };
  const auto res = train_on_sequences(videos, labels, 2, cfg, opts);
  CHECK(res.log.size() == 6);
  CHECK(seen == 6);
}

TEST_CASE("non-finite loss aborts with the step and last good parameters") {
  auto videos = toy_videos(4, 23);
  const auto labels = toy_labels(videos);
  videos[3].features(0, 0) = std::nan("");
  TrainConfig cfg = small_config();
  cfg.batch_size = 8;
  const auto dir = scratch_dir("nan");
  TrainOptions opts;
  opts.abort_checkpoint = dir / "last_good.fsck";
  try {
    train_on_sequences(videos, labels, 2, cfg, opts);
    FAIL("expected an abort");
  } catch (const fsu::Error& e) {
    CHECK(e.kind() == fsu::ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
  REQUIRE(std::filesystem::exists(opts.abort_checkpoint));
  const auto ck = fsu::model::load_checkpoint(opts.abort_checkpoint);
  CHECK(ck.params.classifier == fsu::model::init_params(
                                    [&] {
                                      auto mc = cfg.model;
                                      mc.d_in = 4;
                                      mc.n_base = 2;
                                      return mc;
                                    }(),
                                    cfg.seed)
                                    .classifier);
}

TEST_CASE("training input validation") {
  const auto videos = toy_videos(2, 29);
  auto labels = toy_labels(videos);
  TrainConfig cfg = small_config();
  CHECK_THROWS_AS(train_on_sequences({}, {}, 2, cfg), fsu::Error);
  labels[0] = 5;
  CHECK_THROWS_AS(train_on_sequences(videos, labels, 2, cfg), fsu::Error);
  labels.pop_back();
  CHECK_THROWS_AS(train_on_sequences(videos, labels, 2, cfg), fsu::Error);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), fsu::Error);
  cfg = small_config();
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), fsu::Error);
}

TEST_CASE("log csv layout") {
  const auto dir = scratch_dir("csv");
  const std::vector<LogRow> rows = {{0, 1.5, 1.25, 0.5, 0.25, 3}, {1, 0.1, 0.1, 0, 0, 0}};
  write_log_csv(rows, dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() ==
        "step,L_total,L_cls,L_contrast,L_bg,n_nbg\n"
        "0,1.5,1.25,0.5,0.25,3\n"
        "1,0.10000000000000001,0.10000000000000001,0,0,0\n");
}

TEST_CASE("class rows follow manifest declaration order") {
  fsu::data::DatasetManifest m;
  m.classes = {{7, "seven"}, {3, "three"}};
  std::vector<SegmentFeatureSequence> v(3);
  v[0].class_label = 3;
  v[1].class_label = 7;
  v[2].class_label = 3;
  CHECK(class_rows(m, v) == std::vector<std::size_t>{1, 0, 1});
  v[2].class_label = 4;
  CHECK_THROWS_AS(class_rows(m, v), fsu::Error);
}
