#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include "fsu/cli/run_config.hpp"
#include "fsu/numgrad/grad_check.hpp"

namespace fsu::cli {

// Config values from the command line: the file's pairs with flag pairs
// written over them.
using Overrides = std::map<std::string, std::string>;

struct Paths {
  std::filesystem::path data;  // dataset directory
  std::filesystem::path out;
  std::filesystem::path ckpt;
};

// Each command returns 0 and throws fsu::Error on failure.
int cmd_gen_data(const Overrides& o, const Paths& paths, std::ostream& log);
int cmd_train(const Overrides& o, const Paths& paths, std::ostream& log);
int cmd_eval(const Overrides& o, const Paths& paths, eval::Mode mode, std::ostream& log);
int cmd_grad_check(const Overrides& o, std::ostream& log);
int cmd_inspect(const Overrides& o, const Paths& paths, std::ostream& log);

RunConfig resolve(const Overrides& o);

// Gradient check of the full objective on two random videos (T = 8, d = 8)
// with every component active and an NBG threshold high enough that both
// videos contribute background terms.
numgrad::GradCheckReport grad_check_fixture(const RunConfig& cfg, double h = 1e-5,
                                            double tol = 1e-4);

// Mean segment max-logit per generator role (F, I, N) over a split.
struct RoleLogits {
  double fg = 0.0;
  double ibg = 0.0;
  double nbg = 0.0;
  std::size_t n_fg = 0;
  std::size_t n_ibg = 0;
  std::size_t n_nbg = 0;
};

// Writes video_id,segment,max_logit,role,gt_role rows, role being the
// pseudo-label (BG, NBG, FGIBG or other). Empty path skips the file.
RoleLogits inspect_logits(const model::ModelParams& params,
                          std::span<const data::SegmentFeatureSequence> videos,
                          const pseudo::PseudoConfig& pcfg,
                          const std::filesystem::path& csv_path);

inline constexpr const char* kCheckpointName = "model.fsck";
inline constexpr const char* kTrainLogName = "train_log.csv";

}  // namespace fsu::cli
