#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsu/model/model.hpp"
#include "fsu/pseudo/pseudo.hpp"

namespace fsu::losses {

using numgrad::Graph;
using numgrad::Tensor;
using numgrad::Var;

// Which training components are active. `soft` is the soft-classification
// objective every configuration builds on; the others switch on background
// pseudo-labeling (bg), self-weighting (sw) and contrastive learning (cl).
struct AblationFlags {
  bool soft = true;
  bool bg = true;
  bool sw = true;
  bool cl = true;

  std::string to_string() const;  // e.g. "soft,bg,sw,cl"
  static AblationFlags parse(const std::string& list);
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct LossConfig {
  double tau = 10.0;
  double tau_s = 8.0;
  double c = 0.5;
  double margin = 2.0;
  double beta = 1.0;
  double gamma1 = 0.05;  // contrastive weight
  double gamma2 = 0.05;  // background-class weight
  bool renormalize_video_feature = true;
  AblationFlags flags;

  void validate() const;
};

// Self-weighting: w_k = sigmoid(tau_s * (1 - c - f_bg . f_k)). Returns T x 1.
Var self_weight(Graph& g, Var f, std::size_t i_bg, double tau_s, double c);

// F = sum_i (w_i / sum_k w_k) f_i, returns 1 x d. Throws if all weights are 0.
Var aggregate_video_feature(Graph& g, Var f, Var weights);

// -log softmax_y(tau * W F) over every row of `classifier`. F is
// L2-normalized first when `normalize` is set.
Var soft_cls_loss(Graph& g, Var F, std::size_t y, Var classifier, double tau,
                  bool normalize);

// Mean over the rows of `nbg` of -log softmax(tau * W f)[last row].
Var bg_cls_loss(Graph& g, Var nbg, Var classifier, double tau);

// max over distinct NBG pairs of d + beta * max(0, margin - min over
// (FG/IBG, NBG) pairs of d), d the squared Euclidean distance. A term is
// dropped when it has no pairs; both dropped gives 0.
Var contrastive_loss(Graph& g, std::span<const Var> nbg_rows,
                     std::span<const Var> fgibg_rows, double margin, double beta);

// One base-class video in a batch.
struct VideoSample {
  const Tensor* features = nullptr;  // T x d_in
  std::size_t label = 0;             // 0..N-1
};

struct LossTerms {
  Var total;
  Var cls;
  Var contrast;
  Var bg;
  std::size_t n_nbg = 0;
  std::vector<pseudo::PseudoLabelRecord> records;
  std::vector<Var> video_features;  // 1 x d per video, before renormalization
};

// Full objective over a batch:
//   L = L_cls + gamma1 * L_contrast + gamma2 * L_bg
// with terms switched by cfg.flags. sw off uses the attention network for
// segment weights; bg off drops the background row and L_bg.
LossTerms build_total_loss(Graph& g, const model::ParamVars& p,
                           std::size_t n_base, std::span<const VideoSample> batch,
                           const LossConfig& cfg, const pseudo::PseudoConfig& pcfg);

// Value-level wrappers.
Tensor self_weight(const Tensor& f, std::size_t i_bg, double tau_s, double c);
double self_weight_of_cosine(double cosine, double tau_s, double c);
Tensor aggregate_video_feature(const Tensor& f, const Tensor& weights);
double soft_cls_loss(const Tensor& F, std::size_t y, const Tensor& classifier,
                     double tau, bool normalize);
double bg_cls_loss(const Tensor& nbg, const Tensor& classifier, double tau);
double contrastive_loss(const Tensor& nbg, const Tensor& fgibg, double margin,
                        double beta);

}  // namespace fsu::losses
