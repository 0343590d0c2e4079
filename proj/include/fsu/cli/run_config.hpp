#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fsu/data/synthetic.hpp"
#include "fsu/eval/eval.hpp"
#include "fsu/train/train.hpp"

namespace fsu::cli {

// Every knob of every command. Each field has a default; a config file
// assigns any subset as `key = value` lines, and command-line flags are
// applied on top.
struct RunConfig {
  data::SyntheticConfig synthetic;
  train::TrainConfig train;  // model, loss (with ablation flags), pseudo, optimizer
  std::size_t K = 5;
  std::size_t n = 1;
  std::size_t q = 5;
  std::size_t episodes = 300;
  std::size_t jobs = 1;
  double t_a = 0.5;
  std::uint64_t seed = 7;  // the one seed a command draws from

  // Propagates `seed` into the per-stage seeds.
  void sync_seeds();
  void validate() const;

  eval::EvalConfig scoring() const;
  eval::EvaluateConfig evaluation(eval::Mode mode) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

// Parses `key = value` lines; '#' starts a comment. Unknown keys, repeated
// keys and malformed values are usage errors naming the line.
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin);
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values);
RunConfig load_config_file(const std::filesystem::path& path);

// One `key = value` line per key, in registry order; round-trips through
// parse_config_text.
std::string echo_config(const RunConfig& cfg);

// Help text listing every key with its default.
std::string config_help();

}  // namespace fsu::cli
