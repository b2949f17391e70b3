// leafray command line driver
#include "CLI11.hpp"
#include "leafray/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"leafray: complex ray transform and leafwise dbar experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 0;
  long long seed = -1;
  int levels = 3;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config file")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--threads", threads, "worker threads (default: hardware)");
    cmd->add_option("--seed", seed, "seed override");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run the per-leaf sweep");
  add_common(sweep);
  CLI::App* conv = app.add_subcommand("converge", "rerun under grid refinement");
  add_common(conv);
  conv->add_option("--levels", levels, "refinement levels (h, h/2, ...)");

  CLI11_PARSE(app, argc, argv);

  leafray::CliOverrides ov;
  ov.out_dir = out_dir;
  ov.threads = threads;
  ov.seed = seed;

  try {
    if (run->parsed()) return leafray::run_experiment(config_path, ov);
    if (sweep->parsed()) return leafray::leaf_sweep(config_path, ov);
    if (conv->parsed()) return leafray::export_convergence(config_path, levels, ov);
  } catch (const leafray::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == leafray::ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
