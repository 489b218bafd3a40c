#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "wavesync/config.hpp"
#include "wavesync/errors.hpp"
#include "wavesync/matrix_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Boundary-control toolkit for synchronizing coupled wave systems"};
  app.require_subcommand(0, 0);

  std::string command;
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  app.add_option("command", command,
                 "one of: analyze | simulate | synthesize | verify | probe")
      ->required();
  app.add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--threads", threads, "worker threads (overrides config)");
  auto* seed_opt =
      app.add_option("--seed", seed, "RNG seed for randomized initial data");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    const std::string text = wavesync::read_text_file(config_path);
    wavesync::ExperimentConfig cfg = wavesync::config_from_json(text);
    if (!out_dir.empty()) cfg.output_directory = out_dir;
    if (threads > 0) cfg.threads = threads;
    if (seed_set) cfg.seed = seed;
    return wavesync::run_command(command, cfg, std::cout);
  } catch (const wavesync::Error& e) {
    std::cout << "configuration error: " << e.what() << "\n";
    return wavesync::kExitConfig;
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
    return wavesync::kExitConfig;
  }
}
