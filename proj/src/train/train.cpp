#include "fsu/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "fsu/error.hpp"
#include "fsu/model/checkpoint.hpp"
#include "fsu/numgrad/tensor.hpp"

namespace fsu::train {

using numgrad::Graph;
using numgrad::ShapeError;
using numgrad::Var;

OptimizerState OptimizerState::zeros_like(const model::ModelParams& params,
                                          double lr, double momentum) {
  OptimizerState s;
  s.lr = lr;
  s.momentum = momentum;
  for (const Tensor* t : params.tensors()) s.velocity.emplace_back(t->rows(), t->cols());
  return s;
}

void nesterov_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                   OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw usage_error("nesterov_step: " + std::to_string(params.size()) +
                      " parameters, " + std::to_string(grads.size()) + " gradients, " +
                      std::to_string(state.velocity.size()) + " velocities");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (grads[i].shape() != p.shape()) throw ShapeError("nesterov_step", p.shape(), grads[i].shape());
    if (state.velocity[i].shape() != p.shape()) {
      throw ShapeError("nesterov_step", p.shape(), state.velocity[i].shape());
    }
  }
  const double mu = state.momentum, lr = state.lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto v = state.velocity[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = mu * v[k] - lr * g[k];
      p[k] += mu * v[k] - lr * g[k];
    }
  }
}

void nesterov_step(model::ModelParams& params, std::span<const Tensor> grads,
                   OptimizerState& state) {
  const std::vector<Tensor*> ptrs = params.tensors();
  nesterov_step(std::span<Tensor* const>(ptrs), grads, state);
  model::renormalize_classifier(params);
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw usage_error("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw usage_error("momentum must lie in [0, 1)");
  if (batch_size == 0) throw usage_error("batch_size must be at least 1");
  if (epochs == 0) throw usage_error("epochs must be at least 1");
  if (!(pseudo.t_n > 0.0)) throw usage_error("t_n must be positive");
}

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

TrainResult train_on_sequences(std::span<const data::SegmentFeatureSequence> videos,
                               std::span<const std::size_t> labels,
                               std::size_t n_classes, const TrainConfig& cfg,
                               const TrainOptions& options) {
  cfg.validate();
  if (videos.empty()) throw data_error("training set is empty");
  if (labels.size() != videos.size()) {
    throw usage_error("train: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(videos.size()) + " videos");
  }
  const std::size_t d_in = videos.front().dim();
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].dim() != d_in) {
      throw data_error("video " + videos[i].video_id + " has feature width " +
                       std::to_string(videos[i].dim()) + ", expected " + std::to_string(d_in));
    }
    if (labels[i] >= n_classes) {
      throw data_error("video " + videos[i].video_id + " has class row " +
                       std::to_string(labels[i]) + " outside 0.." + std::to_string(n_classes - 1));
    }
  }

  model::ModelConfig mcfg = cfg.model;
  mcfg.d_in = d_in;
  mcfg.n_base = n_classes;

  TrainResult result;
  result.params = model::init_params(mcfg, cfg.seed);
  OptimizerState state = OptimizerState::zeros_like(result.params, cfg.lr, cfg.momentum);

  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFull);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<losses::VideoSample> batch;
      for (std::size_t j = start; j < stop; ++j) {
        batch.push_back({&videos[order[j]].features, labels[order[j]]});
      }

      Graph g;
      const model::ParamVars p = model::bind_params(g, result.params);
      const losses::LossTerms terms =
          losses::build_total_loss(g, p, n_classes, batch, cfg.loss, cfg.pseudo);

      LogRow row;
      row.step = step;
      row.total = g.value(terms.total).item();
      row.cls = g.value(terms.cls).item();
      row.contrast = g.value(terms.contrast).item();
      row.bg = g.value(terms.bg).item();
      row.n_nbg = terms.n_nbg;

      if (!finite(row.total)) {
        std::string where;
        if (!options.abort_checkpoint.empty()) {
          model::save_checkpoint({result.params, options.config_echo}, options.abort_checkpoint);
          where = "; last good parameters written to " + options.abort_checkpoint.string();
        }
        throw numeric_error("non-finite loss at step " + std::to_string(step) + where);
      }

      const auto grad_map = g.backward(terms.total);
      const Var leaves[] = {p.transform, p.temporal_kernel, p.classifier, p.attn_hidden,
                            p.attn_out};
      std::vector<Tensor> grads;
      for (Var v : leaves) grads.push_back(grad_map.at(v.id));
      for (const Tensor& gt : grads) {
        if (!gt.all_finite()) throw numeric_error("non-finite gradient at step " + std::to_string(step));
      }
      nesterov_step(result.params, grads, state);

      result.log.push_back(row);
      if (options.on_step) options.on_step(row);
      ++step;
    }
  }
  return result;
}

std::vector<std::size_t> class_rows(const data::DatasetManifest& manifest,
                                    std::span<const data::SegmentFeatureSequence> videos) {
  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < manifest.classes.size(); ++i) {
    row_of.emplace(manifest.classes[i].label, i);
  }
  std::vector<std::size_t> rows;
  rows.reserve(videos.size());
  for (const auto& v : videos) {
    auto it = row_of.find(v.class_label);
    if (it == row_of.end()) {
      throw data_error("video " + v.video_id + " has undeclared class " +
                       std::to_string(v.class_label));
    }
    rows.push_back(it->second);
  }
  return rows;
}

TrainResult train_base(const data::DatasetManifest& base, const TrainConfig& cfg,
                       const TrainOptions& options) {
  if (base.entries.empty()) throw data_error("base manifest has no videos");
  const auto videos = data::load_sequences(base);
  const auto rows = class_rows(base, videos);
  return train_on_sequences(videos, rows, base.classes.size(), cfg, options);
}

std::size_t predict_base(const model::ModelParams& params, const Tensor& raw,
                         const losses::LossConfig& loss,
                         const pseudo::PseudoConfig& pseudo) {
  const Tensor f = model::embed_segments(params, raw);
  Tensor weights;
  if (loss.flags.sw) {
    const Tensor logits = model::segment_logits(params, f, false);
    const std::size_t i_bg = pseudo::pseudo_label(logits, pseudo).i_bg;
    weights = losses::self_weight(f, i_bg, loss.tau_s, loss.c);
  } else {
    weights = model::baseline_attention(params, f);
  }
  const Tensor F = losses::aggregate_video_feature(f, weights);
  std::size_t best = 0;
  double best_score = -INFINITY;
  for (std::size_t k = 0; k < params.n_base(); ++k) {
    double s = 0;
    for (std::size_t c = 0; c < params.dim(); ++c) s += params.classifier(k, c) * F(0, c);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

double training_accuracy(const model::ModelParams& params,
                         std::span<const data::SegmentFeatureSequence> videos,
                         std::span<const std::size_t> labels,
                         const losses::LossConfig& loss,
                         const pseudo::PseudoConfig& pseudo) {
  if (videos.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (predict_base(params, videos[i].features, loss, pseudo) == labels[i]) ++correct;
  }
  return double(correct) / double(videos.size());
}

void write_log_csv(std::span<const LogRow> log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path.string());
  out << "step,L_total,L_cls,L_contrast,L_bg,n_nbg\n";
  char buf[256];
  for (const LogRow& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%zu\n", r.step, r.total,
                  r.cls, r.contrast, r.bg, r.n_nbg);
    out << buf;
  }
  if (!out) throw data_error("failed writing " + path.string());
}

}  // namespace fsu::train
