#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "una/cli.hpp"
#include "vendor/CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"una_lab: exactly enumerable alignment objectives, trainers, and proof checks"};
  app.require_subcommand(0, 1);

  auto* train = app.add_subcommand("train", "run a training job from a config and a dataset");
  std::string config_path;
  std::string data_path;
  std::string out_dir = "runs/latest";
  bool print_defaults = false;
  uint64_t train_seed = 0;
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--data", data_path, "line-delimited JSON feedback file");
  train->add_option("--out", out_dir, "output directory for manifest, metrics, checkpoint");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "override the config seed");
  train->add_flag("--print-defaults", print_defaults, "print the default config and exit");

  auto* verify = app.add_subcommand("verify", "run a property suite and print its pass/fail table");
  std::string suite = "all";
  uint64_t verify_seed = 17;
  verify->add_option("--suite", suite, "proofs | gradients | equivalence | oracle | all");
  verify->add_option("--seed", verify_seed, "suite seed");

  auto* report = app.add_subcommand("report", "summarize one run directory, or merge many");
  std::string run_dir;
  report->add_option("dir", run_dir, "run directory (or a directory of runs)");
  report->add_option("--out", run_dir, "same as the positional directory");

  auto* ingest = app.add_subcommand("ingest", "validate a feedback dataset and print its summary");
  std::string ingest_data;
  std::string ingest_config;
  ingest->add_option("--data", ingest_data, "line-delimited JSON feedback file")->required();
  ingest->add_option("--config", ingest_config, "config supplying score bounds and vocab");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return una::cli::kExitValidation;
  }

  if (train->parsed()) {
    if (print_defaults) {
      std::cout << una::cli::default_config_text();
      return una::cli::kExitSuccess;
    }
    if (config_path.empty() || data_path.empty()) {
      std::cerr << "error: train needs --config and --data\n";
      return una::cli::kExitValidation;
    }
    std::optional<uint64_t> seed_override;
    if (train_seed_opt->count() > 0) seed_override = train_seed;
    return una::cli::cmd_train(config_path, data_path, out_dir, seed_override, std::cout,
                               std::cerr);
  }
  if (verify->parsed()) {
    return una::cli::cmd_verify(suite, verify_seed, std::cout, std::cerr);
  }
  if (report->parsed()) {
    if (run_dir.empty()) {
      std::cerr << "error: report needs a run directory\n";
      return una::cli::kExitValidation;
    }
    return una::cli::cmd_report(run_dir, std::cout, std::cerr);
  }
  if (ingest->parsed()) {
    std::optional<std::string> cfg;
    if (!ingest_config.empty()) cfg = ingest_config;
    return una::cli::cmd_ingest(ingest_data, cfg, std::cout, std::cerr);
  }

  std::cout << app.help();
  return una::cli::kExitSuccess;
}
