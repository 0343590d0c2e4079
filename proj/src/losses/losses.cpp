#include "fsu/losses/losses.hpp"

#include <cmath>
#include <sstream>

#include "fsu/error.hpp"

namespace fsu::losses {

std::string AblationFlags::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(soft, "soft");
  add(bg, "bg");
  add(sw, "sw");
  add(cl, "cl");
  return out;
}

AblationFlags AblationFlags::parse(const std::string& list) {
  AblationFlags f{false, false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (item == "soft") f.soft = true;
    else if (item == "bg") f.bg = true;
    else if (item == "sw") f.sw = true;
    else if (item == "cl") f.cl = true;
    else throw usage_error("unknown ablation flag '" + item + "' (soft|bg|sw|cl)");
  }
  // The soft-classification objective underlies every configuration.
  f.soft = true;
  return f;
}

void LossConfig::validate() const {
  if (!(tau > 0.0) || !(tau_s > 0.0)) throw usage_error("tau and tau_s must be > 0");
  if (!(margin >= 0.0 && margin <= 4.0)) throw usage_error("margin must lie in [0,4]");
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw usage_error("gammas must be >= 0");
  if (!(beta >= 0.0)) throw usage_error("beta must be >= 0");
  if (!flags.soft) throw usage_error("the soft classification objective cannot be disabled");
}

Var self_weight(Graph& g, Var f, std::size_t i_bg, double tau_s, double c) {
  const Var bg = g.gather_rows(f, {i_bg});
  const Var cosine = g.matmul(f, g.transpose(bg));
  return g.sigmoid(g.add_scalar(g.scale(cosine, -tau_s), tau_s * (1.0 - c)));
}

Var aggregate_video_feature(Graph& g, Var f, Var weights) {
  const Var total = g.sum(weights);
  if (g.value(total).item() == 0.0) {
    throw numeric_error("aggregate_video_feature: all segment weights are zero");
  }
  return g.div_scalar(g.matmul(g.transpose(weights), f), total);
}

Var soft_cls_loss(Graph& g, Var F, std::size_t y, Var classifier, double tau,
                  bool normalize) {
  const std::size_t classes = g.value(classifier).rows();
  if (y >= classes) {
    throw usage_error("soft_cls_loss: label " + std::to_string(y) +
                      " outside " + std::to_string(classes) + " classes");
  }
  const Var feat = normalize ? g.l2_normalize_rows(F) : F;
  const Var logits = g.scale(g.matmul(feat, g.transpose(classifier)), tau);
  return g.scale(g.element(g.log_softmax(logits, numgrad::Axis::kPerRow), 0, y), -1.0);
}

Var bg_cls_loss(Graph& g, Var nbg, Var classifier, double tau) {
  const std::size_t bg_row = g.value(classifier).rows() - 1;
  const Var logits = g.scale(g.matmul(nbg, g.transpose(classifier)), tau);
  const Var logp = g.log_softmax(logits, numgrad::Axis::kPerRow);
  // column bg_row of every row
  const Var col = g.gather_rows(g.transpose(logp), {bg_row});
  return g.scale(g.mean(col), -1.0);
}

Var contrastive_loss(Graph& g, std::span<const Var> nbg_rows,
                     std::span<const Var> fgibg_rows, double margin, double beta) {
  auto sq_dist = [&](Var a, Var b) { return g.sum(g.square(g.sub(a, b))); };

  std::vector<Var> terms;
  if (nbg_rows.size() >= 2) {
    std::vector<Var> pos;
    for (std::size_t j = 0; j < nbg_rows.size(); ++j)
      for (std::size_t k = 0; k < nbg_rows.size(); ++k)
        if (j != k) pos.push_back(sq_dist(nbg_rows[j], nbg_rows[k]));
    terms.push_back(g.max(g.concat_rows(pos)));
  }
  if (!nbg_rows.empty() && !fgibg_rows.empty()) {
    std::vector<Var> neg;
    for (Var a : fgibg_rows)
      for (Var b : nbg_rows) neg.push_back(sq_dist(a, b));
    const Var closest = g.min(g.concat_rows(neg));
    const Var hinge = g.relu(g.add_scalar(g.scale(closest, -1.0), margin));
    terms.push_back(g.scale(hinge, beta));
  }
  if (terms.empty()) return g.input(Tensor::scalar(0.0));
  return terms.size() == 1 ? terms[0] : g.add(terms[0], terms[1]);
}

LossTerms build_total_loss(Graph& g, const model::ParamVars& p,
                           std::size_t n_base, std::span<const VideoSample> batch,
                           const LossConfig& cfg, const pseudo::PseudoConfig& pcfg) {
  if (batch.empty()) throw usage_error("build_total_loss: empty batch");
  LossTerms out;

  const Var base_w = model::base_classifier(g, p, n_base);
  const Var cls_w = cfg.flags.bg ? p.classifier : base_w;
  const Tensor base_rows = g.value(base_w);

  std::vector<Var> cls_terms;
  std::vector<Var> nbg_rows;
  std::vector<Var> fgibg_rows;
  for (const VideoSample& s : batch) {
    const Var f = model::embed(g, p, g.input(*s.features));

    // Pseudo-labels come from current values and are not differentiated.
    Graph scratch;
    const Tensor logits = scratch.value(scratch.matmul(
        scratch.input(g.value(f)), scratch.transpose(scratch.input(base_rows))));
    pseudo::PseudoLabelRecord rec = pseudo::pseudo_label(logits, pcfg);

    const Var weights = cfg.flags.sw ? self_weight(g, f, rec.i_bg, cfg.tau_s, cfg.c)
                                     : model::attention_weights(g, p, f);
    const Var F = aggregate_video_feature(g, f, weights);
    out.video_features.push_back(F);
    cls_terms.push_back(
        soft_cls_loss(g, F, s.label, cls_w, cfg.tau, cfg.renormalize_video_feature));

    if (rec.is_nbg) nbg_rows.push_back(g.gather_rows(f, {rec.i_bg}));
    for (std::size_t i : rec.fg_ibg_indices) fgibg_rows.push_back(g.gather_rows(f, {i}));
    out.records.push_back(std::move(rec));
  }
  out.n_nbg = nbg_rows.size();

  out.cls = g.mean(g.concat_rows(cls_terms));
  Var total = out.cls;
  if (cfg.flags.cl) {
    out.contrast = contrastive_loss(g, nbg_rows, fgibg_rows, cfg.margin, cfg.beta);
    total = g.add(total, g.scale(out.contrast, cfg.gamma1));
  } else {
    out.contrast = g.input(Tensor::scalar(0.0));
  }
  if (cfg.flags.bg && !nbg_rows.empty()) {
    out.bg = bg_cls_loss(g, g.concat_rows(nbg_rows), p.classifier, cfg.tau);
    total = g.add(total, g.scale(out.bg, cfg.gamma2));
  } else {
    out.bg = g.input(Tensor::scalar(0.0));
  }
  out.total = total;
  return out;
}

Tensor self_weight(const Tensor& f, std::size_t i_bg, double tau_s, double c) {
  Graph g;
  return g.value(self_weight(g, g.input(f), i_bg, tau_s, c));
}

double self_weight_of_cosine(double cosine, double tau_s, double c) {
  Graph g;
  const Var cs = g.input(Tensor::scalar(cosine));
  return g.value(g.sigmoid(g.add_scalar(g.scale(cs, -tau_s), tau_s * (1.0 - c)))).item();
}

Tensor aggregate_video_feature(const Tensor& f, const Tensor& weights) {
  Graph g;
  return g.value(aggregate_video_feature(g, g.input(f), g.input(weights)));
}

double soft_cls_loss(const Tensor& F, std::size_t y, const Tensor& classifier,
                     double tau, bool normalize) {
  Graph g;
  return g.value(soft_cls_loss(g, g.input(F), y, g.input(classifier), tau, normalize))
      .item();
}

double bg_cls_loss(const Tensor& nbg, const Tensor& classifier, double tau) {
  if (nbg.rows() == 0) return 0.0;
  Graph g;
  return g.value(bg_cls_loss(g, g.input(nbg), g.input(classifier), tau)).item();
}

double contrastive_loss(const Tensor& nbg, const Tensor& fgibg, double margin,
                        double beta) {
  Graph g;
  std::vector<Var> a, b;
  const Var na = g.input(nbg), nb = g.input(fgibg);
  for (std::size_t r = 0; r < nbg.rows(); ++r) a.push_back(g.gather_rows(na, {r}));
  for (std::size_t r = 0; r < fgibg.rows(); ++r) b.push_back(g.gather_rows(nb, {r}));
  return g.value(contrastive_loss(g, a, b, margin, beta)).item();
}

}  // namespace fsu::losses
