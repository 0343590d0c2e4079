#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsu/cli/commands.hpp"
#include "fsu/error.hpp"

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string out;
  std::string ckpt;
  std::vector<std::string> ablate;
  std::map<std::string, std::string> values;  // numeric flags by config key
};

void add_common(CLI::App* cmd, Flags& f, bool episodes) {
  cmd->add_option("--config", f.config, "key = value config file")->type_name("PATH");
  cmd->add_option_function<std::string>(
      "--seed", [&f](const std::string& v) { f.values["seed"] = v; }, "random seed")
      ->type_name("UINT");
  cmd->add_option("--out", f.out, "output directory or file")->type_name("PATH");
  if (episodes) {
    for (const char* key : {"K", "n", "q", "episodes", "jobs"}) {
      cmd->add_option_function<std::string>(
          std::string("--") + key, [&f, key](const std::string& v) { f.values[key] = v; },
          std::string("config key ") + key)
          ->type_name("UINT");
    }
  }
}

void add_model_flags(CLI::App* cmd, Flags& f, bool needs_ckpt) {
  cmd->add_option("--data", f.data, "dataset directory (from gen-data)")->type_name("PATH");
  if (needs_ckpt) cmd->add_option("--ckpt", f.ckpt, "checkpoint file")->type_name("PATH");
  cmd->add_option("--ablate", f.ablate,
                  "active component, repeatable: soft, bg, sw, cl (soft is always on)")
      ->allow_extra_args(false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot action recognition from untrimmed videos: synthetic data, "
               "base-class training and episodic evaluation.\n\n" +
               fsu::cli::config_help()};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  add_common(gen, f, false);

  auto* train = app.add_subcommand("train", "train on the base split");
  add_common(train, f, false);
  add_model_flags(train, f, true);

  auto* ecls = app.add_subcommand("eval-cls", "episodic K-way classification on the novel split");
  add_common(ecls, f, true);
  add_model_flags(ecls, f, true);

  auto* edet = app.add_subcommand("eval-det", "episodic detection (mAP) on the novel split");
  add_common(edet, f, true);
  add_model_flags(edet, f, true);

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the full objective");
  add_common(gc, f, false);

  auto* insp = app.add_subcommand("inspect", "per-segment max logits on the base split");
  add_common(insp, f, false);
  add_model_flags(insp, f, true);

  for (auto* sub : app.get_subcommands({})) sub->footer(fsu::cli::config_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(fsu::ErrorKind::kUsage);
  }

  try {
    fsu::cli::Overrides o;
    if (!f.config.empty()) {
      std::ifstream in(f.config, std::ios::binary);
      if (!in) throw fsu::usage_error("cannot open config file " + f.config);
      std::stringstream ss;
      ss << in.rdbuf();
      o = fsu::cli::parse_config_text(ss.str(), f.config);
    }
    for (const auto& [k, v] : f.values) o[k] = v;
    if (!f.ablate.empty()) {
      std::string list;
      for (const auto& a : f.ablate) list += (list.empty() ? "" : ",") + a;
      o["ablate"] = list;
    }
    const fsu::cli::Paths paths{f.data, f.out, f.ckpt};

    if (gen->parsed()) return fsu::cli::cmd_gen_data(o, paths, std::cout);
    if (train->parsed()) return fsu::cli::cmd_train(o, paths, std::cout);
    if (ecls->parsed()) return fsu::cli::cmd_eval(o, paths, fsu::eval::Mode::kClassification, std::cout);
    if (edet->parsed()) return fsu::cli::cmd_eval(o, paths, fsu::eval::Mode::kDetection, std::cout);
    if (gc->parsed()) return fsu::cli::cmd_grad_check(o, std::cout);
    if (insp->parsed()) return fsu::cli::cmd_inspect(o, paths, std::cout);
  } catch (const fsu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(fsu::ErrorKind::kData);
  }
  return static_cast<int>(fsu::ErrorKind::kUsage);
}
