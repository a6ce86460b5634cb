#pragma once

// Command-line front end: generate, train, eval and ablate.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hydg/dyngraph.hpp"
#include "hydg/trainer.hpp"

namespace hydg {

struct RunConfig {
  TrainConfig train;
  std::optional<std::filesystem::path> data;
  std::optional<SbmSpec> sbm;
  std::optional<std::size_t> split_t;
  std::filesystem::path out = ".";
  std::optional<std::filesystem::path> params;  // eval input; default out/params.bin
  std::size_t degree_buckets = 16;

  // Throws ParameterError naming the field. `needs_split` is false for generate.
  void validate(bool needs_split) const;
  DynamicGraph load_graph() const;
  std::filesystem::path params_path() const;
};

// "n,T,C,p_in,p_out,drift"
SbmSpec parse_sbm(const std::string& text);
// "s,m,l"
TemporalScales parse_scales(const std::string& text);

void cmd_generate(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
MetricsReport cmd_eval(const RunConfig& config, std::ostream& out);

struct AblationRow {
  Ablation ablation;
  double accuracy;
  double macro_auc;
};
std::vector<AblationRow> cmd_ablate(const RunConfig& config, std::ostream& out);

// Parses argv and dispatches. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hydg
