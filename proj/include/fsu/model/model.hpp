#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsu/numgrad/graph.hpp"

namespace fsu::model {

using numgrad::Graph;
using numgrad::Tensor;
using numgrad::Var;

struct ModelConfig {
  std::size_t d_in = 32;
  std::size_t d = 64;
  std::size_t kernel_width = 8;
  std::size_t attn_hidden = 32;
  std::size_t n_base = 20;  // N; the classifier holds N + 1 rows
};

// Trainable head on top of pre-extracted segment features.
struct ModelParams {
  Tensor transform;        // d x d_in, per-segment linear map
  Tensor temporal_kernel;  // d x w, depthwise along the segment axis
  Tensor classifier;       // (N+1) x d, unit rows, last row is background
  Tensor attn_hidden;      // h x d
  Tensor attn_out;         // 1 x h

  std::size_t n_base() const { return classifier.rows() - 1; }
  std::size_t dim() const { return transform.rows(); }
  std::size_t input_dim() const { return transform.cols(); }

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  static const std::vector<std::string>& tensor_names();
};

// Gaussian init with std 1/sqrt(fan_in); classifier rows normalized.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

void renormalize_classifier(ModelParams& params);

// Graph handles for every parameter tensor.
struct ParamVars {
  Var transform;
  Var temporal_kernel;
  Var classifier;
  Var attn_hidden;
  Var attn_out;
};

// As trainable leaves, in ModelParams::tensors() order.
ParamVars bind_params(Graph& g, const ModelParams& params);
// As constants, for frozen evaluation.
ParamVars bind_frozen(Graph& g, const ModelParams& params);

// raw: T x d_in  ->  T x d, rows unit norm (or zero).
Var embed(Graph& g, const ParamVars& p, Var raw);
// f: T x d  ->  T x N (or T x (N+1) with the background row).
Var segment_logits(Graph& g, const ParamVars& p, Var f, std::size_t n_base,
                   bool include_bg_row);
// f: T x d  ->  T x 1 weights in (0,1): sigmoid(out . relu(hidden . f_i)).
Var attention_weights(Graph& g, const ParamVars& p, Var f);
// First N classifier rows.
Var base_classifier(Graph& g, const ParamVars& p, std::size_t n_base);

// Value-only conveniences over a throwaway graph.
Tensor embed_segments(const ModelParams& params, const Tensor& raw);
Tensor segment_logits(const ModelParams& params, const Tensor& f,
                      bool include_bg_row);
Tensor baseline_attention(const ModelParams& params, const Tensor& f);

}  // namespace fsu::model
