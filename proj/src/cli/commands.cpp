#include "fsu/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "fsu/error.hpp"
#include "fsu/model/checkpoint.hpp"

namespace fsu::cli {

namespace fs = std::filesystem;

namespace {

// Keys that describe how a checkpoint was trained and therefore how its
// queries should be weighted, unless overridden explicitly.
const char* const kScoringKeys[] = {"ablate", "tau", "tau_s", "c", "t_n", "fg_ibg_count",
                                    "score_mode"};

std::string pct(const eval::Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * s.mean, 100.0 * s.ci);
  return buf;
}

fs::path require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw usage_error(std::string("missing --") + what);
  if (!fs::is_directory(p)) throw data_error(std::string(what) + " directory not found: " + p.string());
  return p;
}

fs::path require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw usage_error(std::string("missing --") + what);
  if (!fs::is_regular_file(p)) throw data_error(std::string(what) + " not found: " + p.string());
  return p;
}

data::DatasetManifest read_split(const fs::path& dir, const char* name) {
  return data::read_manifest(require_file(dir / name, "manifest"));
}

}  // namespace

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  apply_config(cfg, o);
  cfg.sync_seeds();
  cfg.validate();
  return cfg;
}

int cmd_gen_data(const Overrides& o, const Paths& paths, std::ostream& log) {
  const RunConfig cfg = resolve(o);
  if (paths.out.empty()) throw usage_error("missing --out");
  const auto ds = data::generate_synthetic_dataset(cfg.synthetic);
  data::write_dataset(ds, paths.out);
  std::size_t shared = 0;
  for (int v : ds.novel_fg_from_ibg) shared += v >= 0;
  log << "base: " << ds.base.classes.size() << " classes, " << ds.base.entries.size()
      << " videos\n"
      << "novel: " << ds.novel.classes.size() << " classes, " << ds.novel.entries.size()
      << " videos (" << shared << " with FG shared with base background)\n"
      << "written to " << paths.out.string() << "\n";
  return 0;
}

int cmd_train(const Overrides& o, const Paths& paths, std::ostream& log) {
  const RunConfig cfg = resolve(o);
  const fs::path dir = require_dir(paths.data, "data");
  if (paths.out.empty()) throw usage_error("missing --out");
  fs::create_directories(paths.out);
  const fs::path ckpt = paths.ckpt.empty() ? paths.out / kCheckpointName : paths.ckpt;

  const auto base = read_split(dir, data::kBaseManifestName);
  const auto videos = data::load_sequences(base);
  const auto rows = train::class_rows(base, videos);

  train::TrainOptions opts;
  opts.abort_checkpoint = paths.out / "last_good.fsck";
  opts.config_echo = echo_config(cfg);
  const auto result = train::train_on_sequences(videos, rows, base.classes.size(), cfg.train, opts);

  model::save_checkpoint({result.params, opts.config_echo}, ckpt);
  train::write_log_csv(result.log, paths.out / kTrainLogName);
  const double acc =
      train::training_accuracy(result.params, videos, rows, cfg.train.loss, cfg.train.pseudo);
  char buf[160];
  std::snprintf(buf, sizeof buf, "steps: %zu  final loss: %.6f  training accuracy: %.4f\n",
                result.log.size(), result.log.back().total, acc);
  log << "components: " << cfg.train.loss.flags.to_string() << "\n" << buf
      << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const Overrides& o, const Paths& paths, eval::Mode mode, std::ostream& log) {
  const fs::path dir = require_dir(paths.data, "data");
  const auto ck = model::load_checkpoint(require_file(paths.ckpt, "ckpt"));

  // checkpoint scoring settings, then whatever the caller set explicitly
  Overrides merged;
  const auto echoed = parse_config_text(ck.config_echo, "checkpoint config");
  for (const char* key : kScoringKeys) {
    if (auto it = echoed.find(key); it != echoed.end()) merged[key] = it->second;
  }
  for (const auto& [k, v] : o) merged[k] = v;
  const RunConfig cfg = resolve(merged);

  const auto novel = read_split(dir, data::kNovelManifestName);
  const auto videos = data::load_sequences(novel);
  if (ck.params.input_dim() != videos.front().dim()) {
    throw data_error("checkpoint expects feature width " + std::to_string(ck.params.input_dim()) +
                     ", data has " + std::to_string(videos.front().dim()));
  }
  const eval::Report report = eval::evaluate(videos, ck.params, cfg.evaluation(mode));

  log << cfg.K << "-way " << cfg.n << "-shot, " << cfg.episodes << " episodes, components "
      << cfg.train.loss.flags.to_string() << "\n";
  if (mode == eval::Mode::kClassification) {
    log << "accuracy: " << pct(report.accuracy) << "\n";
  } else {
    log << "mAP@0.5: " << pct(report.map_50) << "\n"
        << "average mAP@[0.5:0.05:0.95]: " << pct(report.average_map) << "\n";
  }
  if (!paths.out.empty()) {
    fs::create_directories(paths.out);
    const bool cls = mode == eval::Mode::kClassification;
    const fs::path csv = paths.out / (cls ? "episodes_cls.csv" : "episodes_det.csv");
    eval::write_report_csv(report, csv);
    log << "per-episode results: " << csv.string() << "\n";
    if (!cls) {
      // activation maps of the first episode's queries
      const auto ep = data::sample_episode(videos, cfg.K, cfg.n, cfg.q, data::episode_seed(cfg.seed, 0));
      const auto protos = eval::compute_prototypes(ck.params, ep);
      const fs::path tdir = paths.out / "tcam";
      fs::create_directories(tdir);
      for (const auto& q : ep.queries) {
        const auto r = eval::classify_query(ck.params, q.video.features, protos, cfg.scoring());
        eval::write_tcam_csv(eval::tcam(r.features, r.weights, protos),
                             tdir / ("episode0_" + q.video.video_id + ".csv"));
      }
      log << "activation maps: " << tdir.string() << "\n";
    }
  }
  return 0;
}

numgrad::GradCheckReport grad_check_fixture(const RunConfig& cfg, double h, double tol) {
  model::ModelConfig mc = cfg.train.model;
  mc.d_in = 8;
  mc.d = 8;
  mc.n_base = 3;
  mc.attn_hidden = std::min<std::size_t>(mc.attn_hidden, 8);
  const model::ModelParams params = model::init_params(mc, cfg.seed);

  std::mt19937_64 rng(cfg.seed + 1);
  std::normal_distribution<double> n;
  std::vector<numgrad::Tensor> videos(2, numgrad::Tensor(8, mc.d_in));
  for (auto& v : videos)
    for (double& x : v.data()) x = n(rng);
  const std::vector<losses::VideoSample> batch = {{&videos[0], 0}, {&videos[1], 2}};

  losses::LossConfig loss = cfg.train.loss;
  loss.flags = losses::AblationFlags{};
  pseudo::PseudoConfig pc = cfg.train.pseudo;
  pc.t_n = 1.5;  // every video has an NBG segment

  auto build = [&](numgrad::Graph& g, std::span<const numgrad::Var> v) {
    const model::ParamVars p{v[0], v[1], v[2], v[3], v[4]};
    return losses::build_total_loss(g, p, mc.n_base, batch, loss, pc).total;
  };
  std::vector<numgrad::Tensor> leaves;
  for (const auto* t : params.tensors()) leaves.push_back(*t);
  return numgrad::grad_check(build, leaves, h, tol);
}

int cmd_grad_check(const Overrides& o, std::ostream& log) {
  const RunConfig cfg = resolve(o);
  const auto r = grad_check_fixture(cfg);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "coordinates: %zu\nmax relative error: %.3e (tensor %s, index %zu)\n"
                "analytic %.10e  numeric %.10e\n%s (tolerance %.0e)\n",
                r.coordinates, r.max_rel_error,
                model::ModelParams::tensor_names()[r.worst_param].c_str(), r.worst_index,
                r.worst_analytic, r.worst_numeric, r.passed ? "PASS" : "FAIL", r.tolerance);
  log << buf;
  if (!r.passed) throw numeric_error("gradient check failed");
  return 0;
}

RoleLogits inspect_logits(const model::ModelParams& params,
                          std::span<const data::SegmentFeatureSequence> videos,
                          const pseudo::PseudoConfig& pcfg, const fs::path& csv_path) {
  std::ofstream out;
  if (!csv_path.empty()) {
    out.open(csv_path, std::ios::binary);
    if (!out) throw data_error("cannot write " + csv_path.string());
    out << "video_id,segment,max_logit,role,gt_role\n";
  }
  RoleLogits r;
  char buf[64];
  for (const auto& v : videos) {
    const auto f = model::embed_segments(params, v.features);
    const auto logits = model::segment_logits(params, f, false);
    const auto rec = pseudo::pseudo_label(logits, pcfg);
    std::vector<const char*> role(v.length(), "other");
    for (std::size_t i : rec.fg_ibg_indices) role[i] = "FGIBG";
    role[rec.i_bg] = rec.is_nbg ? "NBG" : "BG";
    for (std::size_t t = 0; t < v.length(); ++t) {
      const double m = rec.max_logits[t];
      const char gt = t < v.roles.size() ? v.roles[t] : '\0';
      if (gt == 'F') r.fg += m, ++r.n_fg;
      if (gt == 'I') r.ibg += m, ++r.n_ibg;
      if (gt == 'N') r.nbg += m, ++r.n_nbg;
      if (out.is_open()) {
        std::snprintf(buf, sizeof buf, "%.17g", m);
        out << v.video_id << ',' << t << ',' << buf << ',' << role[t] << ',';
        if (gt) out << gt;
        out << '\n';
      }
    }
  }
  if (r.n_fg) r.fg /= double(r.n_fg);
  if (r.n_ibg) r.ibg /= double(r.n_ibg);
  if (r.n_nbg) r.nbg /= double(r.n_nbg);
  return r;
}

int cmd_inspect(const Overrides& o, const Paths& paths, std::ostream& log) {
  const fs::path dir = require_dir(paths.data, "data");
  const auto ck = model::load_checkpoint(require_file(paths.ckpt, "ckpt"));
  Overrides merged;
  const auto echoed = parse_config_text(ck.config_echo, "checkpoint config");
  for (const char* key : kScoringKeys) {
    if (auto it = echoed.find(key); it != echoed.end()) merged[key] = it->second;
  }
  for (const auto& [k, v] : o) merged[k] = v;
  const RunConfig cfg = resolve(merged);

  const auto base = read_split(dir, data::kBaseManifestName);
  const auto videos = data::load_sequences(base);
  fs::path csv = paths.out;
  if (csv.empty()) throw usage_error("missing --out");
  if (fs::is_directory(csv)) csv /= "max_logits.csv";
  const RoleLogits r = inspect_logits(ck.params, videos, cfg.train.pseudo, csv);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "mean max logit  FG %.4f (%zu)  IBG %.4f (%zu)  NBG %.4f (%zu)\n", r.fg, r.n_fg,
                r.ibg, r.n_ibg, r.nbg, r.n_nbg);
  log << buf << "segments: " << csv.string() << "\n";
  return 0;
}

}  // namespace fsu::cli
