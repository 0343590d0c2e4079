#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "fsu/data/manifest.hpp"
#include "fsu/losses/losses.hpp"
#include "fsu/model/model.hpp"

namespace fsu::train {

using numgrad::Tensor;

// Nesterov momentum state, one velocity tensor per parameter tensor.
struct OptimizerState {
  std::vector<Tensor> velocity;
  double lr = 0.01;
  double momentum = 0.9;

  static OptimizerState zeros_like(const model::ModelParams& params,
                                   double lr = 0.01, double momentum = 0.9);
};

// v <- mu v - lr g;  p <- p + mu v - lr g  (with the updated v).
void nesterov_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                   OptimizerState& state);
// Same, followed by classifier row renormalization.
void nesterov_step(model::ModelParams& params, std::span<const Tensor> grads,
                   OptimizerState& state);

struct TrainConfig {
  model::ModelConfig model;
  losses::LossConfig loss;
  pseudo::PseudoConfig pseudo;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LogRow {
  std::size_t step = 0;
  double total = 0.0;
  double cls = 0.0;
  double contrast = 0.0;
  double bg = 0.0;
  std::size_t n_nbg = 0;
};

struct TrainOptions {
  // Written with the last finite parameters when a step yields a NaN loss.
  std::filesystem::path abort_checkpoint;
  std::string config_echo;
  std::function<void(const LogRow&)> on_step;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<LogRow> log;
};

// `labels` are classifier rows (0..n_classes-1), one per sequence.
TrainResult train_on_sequences(std::span<const data::SegmentFeatureSequence> videos,
                               std::span<const std::size_t> labels,
                               std::size_t n_classes, const TrainConfig& cfg,
                               const TrainOptions& options = {});

// Loads the manifest's features and maps its classes, in declaration order,
// onto classifier rows.
TrainResult train_base(const data::DatasetManifest& base, const TrainConfig& cfg,
                       const TrainOptions& options = {});

// Row index of each sequence's class in `classes`.
std::vector<std::size_t> class_rows(const data::DatasetManifest& manifest,
                                    std::span<const data::SegmentFeatureSequence> videos);

// Pooled base-class prediction for one video, weighted as in training.
std::size_t predict_base(const model::ModelParams& params, const Tensor& raw,
                         const losses::LossConfig& loss,
                         const pseudo::PseudoConfig& pseudo);

double training_accuracy(const model::ModelParams& params,
                         std::span<const data::SegmentFeatureSequence> videos,
                         std::span<const std::size_t> labels,
                         const losses::LossConfig& loss,
                         const pseudo::PseudoConfig& pseudo);

void write_log_csv(std::span<const LogRow> log, const std::filesystem::path& path);

}  // namespace fsu::train
