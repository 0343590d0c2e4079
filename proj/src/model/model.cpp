#include "fsu/model/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace fsu::model {
namespace {

Tensor gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t(rows, cols);
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

std::vector<Tensor*> ModelParams::tensors() {
  return {&transform, &temporal_kernel, &classifier, &attn_hidden, &attn_out};
}

std::vector<const Tensor*> ModelParams::tensors() const {
  return {&transform, &temporal_kernel, &classifier, &attn_hidden, &attn_out};
}

const std::vector<std::string>& ModelParams::tensor_names() {
  static const std::vector<std::string> names = {
      "transform", "temporal_kernel", "classifier", "attn_hidden", "attn_out"};
  return names;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.transform = gaussian(rng, cfg.d, cfg.d_in, 1.0 / std::sqrt(double(cfg.d_in)));
  p.temporal_kernel =
      gaussian(rng, cfg.d, cfg.kernel_width, 1.0 / std::sqrt(double(cfg.kernel_width)));
  p.classifier = gaussian(rng, cfg.n_base + 1, cfg.d, 1.0);
  p.attn_hidden = gaussian(rng, cfg.attn_hidden, cfg.d, 1.0 / std::sqrt(double(cfg.d)));
  p.attn_out = gaussian(rng, 1, cfg.attn_hidden, 1.0 / std::sqrt(double(cfg.attn_hidden)));
  renormalize_classifier(p);
  return p;
}

void renormalize_classifier(ModelParams& params) {
  Tensor& w = params.classifier;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row_span(r);
    const double norm =
        std::sqrt(std::inner_product(row.begin(), row.end(), row.begin(), 0.0));
    if (norm == 0.0) continue;
    for (double& v : row) v /= norm;
  }
}

ParamVars bind_params(Graph& g, const ModelParams& params) {
  return {g.param(params.transform), g.param(params.temporal_kernel),
          g.param(params.classifier), g.param(params.attn_hidden),
          g.param(params.attn_out)};
}

ParamVars bind_frozen(Graph& g, const ModelParams& params) {
  return {g.input(params.transform), g.input(params.temporal_kernel),
          g.input(params.classifier), g.input(params.attn_hidden),
          g.input(params.attn_out)};
}

Var embed(Graph& g, const ParamVars& p, Var raw) {
  const Var projected = g.matmul(raw, g.transpose(p.transform));
  const Var temporal = g.depthwise_conv1d(projected, p.temporal_kernel);
  return g.l2_normalize_rows(temporal);
}

Var base_classifier(Graph& g, const ParamVars& p, std::size_t n_base) {
  std::vector<std::size_t> rows(n_base);
  std::iota(rows.begin(), rows.end(), 0);
  return g.gather_rows(p.classifier, std::move(rows));
}

Var segment_logits(Graph& g, const ParamVars& p, Var f, std::size_t n_base,
                   bool include_bg_row) {
  const Var w = include_bg_row ? p.classifier : base_classifier(g, p, n_base);
  return g.matmul(f, g.transpose(w));
}

Var attention_weights(Graph& g, const ParamVars& p, Var f) {
  const Var hidden = g.relu(g.matmul(f, g.transpose(p.attn_hidden)));
  return g.sigmoid(g.matmul(hidden, g.transpose(p.attn_out)));
}

Tensor embed_segments(const ModelParams& params, const Tensor& raw) {
  Graph g;
  const ParamVars p = bind_frozen(g, params);
  return g.value(embed(g, p, g.input(raw)));
}

Tensor segment_logits(const ModelParams& params, const Tensor& f,
                      bool include_bg_row) {
  Graph g;
  const ParamVars p = bind_frozen(g, params);
  return g.value(segment_logits(g, p, g.input(f), params.n_base(), include_bg_row));
}

Tensor baseline_attention(const ModelParams& params, const Tensor& f) {
  Graph g;
  const ParamVars p = bind_frozen(g, params);
  return g.value(attention_weights(g, p, g.input(f)));
}

}  // namespace fsu::model
