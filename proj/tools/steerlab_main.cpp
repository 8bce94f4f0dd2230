#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "steerlab/commands.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int workers = 0;
  int feature = -1;
};

int run_command(const std::string& command, const CliArgs& args) {
  using namespace steerlab;
  try {
    RunConfig cfg = load_run_config(args.config_path);
    apply_overrides(cfg, args.seed, args.workers, args.feature);
    const std::string out_dir = resolve_out_dir(cfg, args.out_dir, command);
    std::printf("steerlab %s: config %s\n", command.c_str(), cfg.hash.substr(0, 12).c_str());
    std::printf("output directory: %s\n", out_dir.c_str());

    if (command == "train") {
      cmd_train(cfg, out_dir);
    } else if (command == "screen") {
      cmd_screen(cfg, out_dir);
    } else if (command == "simulate") {
      cmd_simulate(cfg, out_dir);
    } else if (command == "dashboard") {
      cmd_dashboard(cfg, out_dir);
    } else if (command == "sweep") {
      cmd_sweep(cfg, out_dir);
    }
    std::printf("done\n");
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const PolicyError& e) {
    std::fprintf(stderr, "policy failure: %s\n", e.what());
    return kExitPolicy;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    if (!e.last_good_checkpoint.empty()) {
      std::fprintf(stderr, "last good checkpoint: %s\n", e.last_good_checkpoint.c_str());
    }
    return kExitTraining;
  } catch (const ArtifactError& e) {
    std::fprintf(stderr, "artifact error: %s\n", e.what());
    return kExitArtifact;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steerlab: prisoner's-dilemma agents with SAE residual-stream steering"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&args](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file (defaults when omitted)");
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--workers", args.workers, "worker threads (env STEERLAB_WORKERS, then hardware)");
    sub->add_option("--out", args.out_dir, "output directory (default: steerlab-runs/<run id>)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "play IPD games and fit the response curve");
  add_common(simulate);
  CLI::App* train = app.add_subcommand("train", "train the toy model and its SAE");
  add_common(train);
  CLI::App* screen = app.add_subcommand("screen", "screen SAE features by steering delta");
  add_common(screen);
  CLI::App* dashboard = app.add_subcommand("dashboard", "activation dashboard for one feature");
  add_common(dashboard);
  dashboard->add_option("--feature", args.feature, "feature id");
  CLI::App* sweep = app.add_subcommand("sweep", "defection probability vs steering strength");
  add_common(sweep);
  sweep->add_option("--feature", args.feature, "feature id");

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, sub] :
       {std::pair<std::string, CLI::App*>{"simulate", simulate}, {"train", train},
        {"screen", screen}, {"dashboard", dashboard}, {"sweep", sweep}}) {
    if (sub->parsed()) return run_command(name, args);
  }
  return 1;
}
