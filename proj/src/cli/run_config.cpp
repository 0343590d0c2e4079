#include "fsu/cli/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fsu/error.hpp"

namespace fsu::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// shortest form that reads back identically
std::string fmt_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw usage_error("config key '" + key + "': expected a real number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw usage_error("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw usage_error("config key '" + key + "': expected true or false, got '" + v + "'");
}

ConfigKey size_key(std::string name, std::string help, auto field) {
  return {name, std::move(help),
          [field](const RunConfig& c) { return std::to_string(field(c)); },
          [field, name](RunConfig& c, const std::string& v) {
            field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(parse_uint(name, v));
          }};
}

ConfigKey real_key(std::string name, std::string help, auto field) {
  return {name, std::move(help),
          [field](const RunConfig& c) { return fmt_real(field(c)); },
          [field, name](RunConfig& c, const std::string& v) { field(c) = parse_real(name, v); }};
}

ConfigKey bool_key(std::string name, std::string help, auto field) {
  return {name, std::move(help),
          [field](const RunConfig& c) {
            return std::string(field(c) ? "true" : "false");
          },
          [field, name](RunConfig& c, const std::string& v) { field(c) = parse_bool(name, v); }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  // dataset
  k.push_back(size_key("n_base_classes", "base classes in the synthetic set",
                       [](auto& c) -> auto& { return c.synthetic.n_base_classes; }));
  k.push_back(size_key("n_novel_classes", "novel classes in the synthetic set",
                       [](auto& c) -> auto& { return c.synthetic.n_novel_classes; }));
  k.push_back(size_key("videos_per_class", "videos generated per class",
                       [](auto& c) -> auto& { return c.synthetic.videos_per_class; }));
  k.push_back(size_key("T", "segments per generated video",
                       [](auto& c) -> auto& { return c.synthetic.T; }));
  k.push_back(size_key("d_in", "raw segment feature width",
                       [](auto& c) -> auto& { return c.synthetic.d_in; }));
  k.push_back(size_key("concepts_fg_per_class", "FG concepts per class",
                       [](auto& c) -> auto& { return c.synthetic.concepts.fg_per_class; }));
  k.push_back(size_key("concepts_ibg", "shared IBG concept pool size",
                       [](auto& c) -> auto& { return c.synthetic.concepts.ibg; }));
  k.push_back(size_key("concepts_nbg", "NBG concept pool size",
                       [](auto& c) -> auto& { return c.synthetic.concepts.nbg; }));
  k.push_back(real_key("overlap_fraction", "share of novel classes whose FG is a base IBG concept",
                       [](auto& c) -> auto& { return c.synthetic.overlap_fraction; }));
  k.push_back(real_key("noise_std", "segment noise standard deviation",
                       [](auto& c) -> auto& { return c.synthetic.noise_std; }));
  k.push_back(real_key("nbg_noise_scale", "noise multiplier for NBG segments",
                       [](auto& c) -> auto& { return c.synthetic.nbg_noise_scale; }));
  k.push_back(real_key("fg_fraction_min", "lower bound of the FG share of a video",
                       [](auto& c) -> auto& { return c.synthetic.fg_fraction_min; }));
  k.push_back(real_key("fg_fraction_max", "upper bound of the FG share of a video",
                       [](auto& c) -> auto& { return c.synthetic.fg_fraction_max; }));
  k.push_back(real_key("nbg_share", "share of background segments that are NBG",
                       [](auto& c) -> auto& { return c.synthetic.nbg_share; }));
  // model
  k.push_back(size_key("d", "embedding channels",
                       [](auto& c) -> auto& { return c.train.model.d; }));
  k.push_back(size_key("kernel_width", "depthwise temporal kernel width",
                       [](auto& c) -> auto& { return c.train.model.kernel_width; }));
  k.push_back(size_key("attn_hidden", "hidden width of the attention network",
                       [](auto& c) -> auto& { return c.train.model.attn_hidden; }));
  // losses
  k.push_back(real_key("tau", "classification softmax temperature",
                       [](auto& c) -> auto& { return c.train.loss.tau; }));
  k.push_back(real_key("tau_s", "self-weight peakedness",
                       [](auto& c) -> auto& { return c.train.loss.tau_s; }));
  k.push_back(real_key("c", "self-weight cosine center",
                       [](auto& c) -> auto& { return c.train.loss.c; }));
  k.push_back(real_key("margin", "contrastive margin on squared distance",
                       [](auto& c) -> auto& { return c.train.loss.margin; }));
  k.push_back(real_key("beta", "weight of the contrastive negative term",
                       [](auto& c) -> auto& { return c.train.loss.beta; }));
  k.push_back(real_key("gamma1", "weight of the contrastive loss",
                       [](auto& c) -> auto& { return c.train.loss.gamma1; }));
  k.push_back(real_key("gamma2", "weight of the background classification loss",
                       [](auto& c) -> auto& { return c.train.loss.gamma2; }));
  k.push_back(bool_key("renormalize_video_feature", "L2-normalize the pooled video feature",
                       [](auto& c) -> auto& { return c.train.loss.renormalize_video_feature; }));
  k.push_back({"ablate", "active components, comma separated subset of soft,bg,sw,cl",
               [](const RunConfig& c) { return c.train.loss.flags.to_string(); },
               [](RunConfig& c, const std::string& v) {
                 c.train.loss.flags = losses::AblationFlags::parse(v);
               }});
  // pseudo-labels
  k.push_back(real_key("t_n", "NBG threshold on the least-confident segment",
                       [](auto& c) -> auto& { return c.train.pseudo.t_n; }));
  k.push_back(size_key("fg_ibg_count", "FG+IBG segments per video, 0 = max(2, ceil(T/8))",
                       [](auto& c) -> auto& { return c.train.pseudo.fg_ibg_count; }));
  k.push_back({"score_mode", "segment confidence: logit or probability",
               [](const RunConfig& c) {
                 return std::string(c.train.pseudo.mode == pseudo::ScoreMode::kLogit ? "logit"
                                                                                     : "probability");
               },
               [](RunConfig& c, const std::string& v) {
                 if (v == "logit") {
                   c.train.pseudo.mode = pseudo::ScoreMode::kLogit;
                 } else if (v == "probability") {
                   c.train.pseudo.mode = pseudo::ScoreMode::kProbability;
                 } else {
                   throw usage_error("config key 'score_mode': expected logit or probability, got '" +
                                     v + "'");
                 }
               }});
  // optimizer
  k.push_back(real_key("lr", "learning rate",
                       [](auto& c) -> auto& { return c.train.lr; }));
  k.push_back(real_key("momentum", "Nesterov momentum coefficient",
                       [](auto& c) -> auto& { return c.train.momentum; }));
  k.push_back(size_key("batch_size", "videos per training step",
                       [](auto& c) -> auto& { return c.train.batch_size; }));
  k.push_back(size_key("epochs", "training epochs",
                       [](auto& c) -> auto& { return c.train.epochs; }));
  // evaluation
  k.push_back(size_key("K", "classes per episode", [](auto& c) -> auto& { return c.K; }));
  k.push_back(size_key("n", "support videos per class", [](auto& c) -> auto& { return c.n; }));
  k.push_back(size_key("q", "query videos per class", [](auto& c) -> auto& { return c.q; }));
  k.push_back(size_key("episodes", "evaluation episodes",
                       [](auto& c) -> auto& { return c.episodes; }));
  k.push_back(size_key("jobs", "evaluation threads", [](auto& c) -> auto& { return c.jobs; }));
  k.push_back(real_key("t_a", "action threshold for the multi-label prediction set",
                       [](auto& c) -> auto& { return c.t_a; }));
  k.push_back(size_key("seed", "seed for generation, training or episode sampling",
                       [](auto& c) -> auto& { return c.seed; }));
  return k;
}

}  // namespace

void RunConfig::sync_seeds() {
  synthetic.seed = seed;
  train.seed = seed;
}

void RunConfig::validate() const {
  synthetic.validate();
  train.validate();
  if (K < 1 || n < 1 || q < 1) throw usage_error("K, n and q must be at least 1");
  if (episodes < 1) throw usage_error("episodes must be at least 1");
  if (jobs < 1) throw usage_error("jobs must be at least 1");
  if (!(t_a >= 0.0 && t_a <= 1.0)) throw usage_error("t_a must lie in [0, 1]");
  if (train.model.d < 1 || train.model.kernel_width < 1 || train.model.attn_hidden < 1) {
    throw usage_error("d, kernel_width and attn_hidden must be at least 1");
  }
}

eval::EvalConfig RunConfig::scoring() const {
  eval::EvalConfig e;
  e.loss = train.loss;
  e.pseudo = train.pseudo;
  e.t_a = t_a;
  return e;
}

eval::EvaluateConfig RunConfig::evaluation(eval::Mode mode) const {
  eval::EvaluateConfig e;
  e.scoring = scoring();
  e.K = K;
  e.n = n;
  e.q = q;
  e.episodes = episodes;
  e.seed = seed;
  e.jobs = jobs;
  e.mode = mode;
  return e;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin) {
  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(k.name);
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw usage_error(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known.count(key)) throw usage_error(where + ": unknown config key '" + key + "'");
    if (value.empty()) throw usage_error(where + ": empty value for '" + key + "'");
    if (!out.emplace(key, value).second) throw usage_error(where + ": '" + key + "' set twice");
  }
  return out;
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values) {
  for (const auto& key : config_keys()) {
    if (auto it = values.find(key.name); it != values.end()) key.set(cfg, it->second);
  }
  for (const auto& [k, v] : values) {
    bool found = false;
    for (const auto& key : config_keys()) found = found || key.name == k;
    if (!found) throw usage_error("unknown config key '" + k + "'");
  }
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw usage_error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_config(cfg, parse_config_text(ss.str(), path.string()));
  return cfg;
}

std::string echo_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& key : config_keys()) out += key.name + " = " + key.get(cfg) + "\n";
  return out;
}

std::string config_help() {
  const RunConfig defaults;
  std::string out = "Config keys (file lines 'key = value'; flags override):\n";
  for (const auto& key : config_keys()) {
    std::string name = "  " + key.name;
    if (name.size() < 30) name.resize(30, ' ');
    out += name + key.help + " [default " + key.get(defaults) + "]\n";
  }
  return out;
}

}  // namespace fsu::cli
