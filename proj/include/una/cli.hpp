#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "una/policy.hpp"
#include "una/trainer.hpp"

namespace una::cli {

// Exit-code contract shared by every subcommand.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Everything a training run needs beyond the dataset: the trainer
// configuration plus the policy shape and initialization, parsed from a flat
// key=value file. Unknown keys are rejected.
struct RunOptions {
  TrainConfig train;
  Policy::Kind policy_kind = Policy::Kind::Tabular;
  Vocab vocab{5, 1};
  bool random_init = false;
  double init_scale = 0.5;
  uint64_t init_seed = 1;
  // Table file backing the explicit reward for online and policy-gradient
  // runs; unused otherwise.
  std::string reward_table;
};

// The full key set with its default values, one key=value per line. Parsing
// this text yields a default-constructed RunOptions.
std::string default_config_text();

// Renders the effective options back into config-file form (same key order as
// default_config_text), so a manifest echo can reproduce the run.
std::string render_config(const RunOptions& opts);

RunOptions parse_run_options(const std::string& text);
RunOptions load_run_options(const std::string& path);

// Maximum worker threads for cmd_verify: the UNA_LAB_THREADS environment
// variable when set, hardware concurrency otherwise.
unsigned verify_threads();

// Subcommands. Each prints a one-line diagnostic to `err` on failure and
// returns an exit code from the contract above. Streams are injected so tests
// can capture them.
int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::optional<uint64_t> seed_override,
              std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& suite, uint64_t seed, std::ostream& out, std::ostream& err);
int cmd_report(const std::string& run_dir, std::ostream& out, std::ostream& err);
int cmd_ingest(const std::string& data_path, const std::optional<std::string>& config_path,
               std::ostream& out, std::ostream& err);

}  // namespace una::cli
