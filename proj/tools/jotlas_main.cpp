#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "jotlas/commands.hpp"
#include "jotlas/config.hpp"
#include "jotlas/errors.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

// Sink that swallows writes for --quiet.
class NullBuffer : public std::streambuf {
 protected:
  int overflow(int c) override { return c; }
};

jotlas::RunConfig assemble_config(const GlobalArgs& args) {
  jotlas::RunConfig config;
  if (!args.config_path.empty()) {
    config = jotlas::RunConfig::from_file(args.config_path);
  }
  for (const std::string& assignment : args.overrides) {
    config.set_assignment(assignment);
  }
  if (args.seed_given) {
    const std::string seed = std::to_string(args.seed);
    for (const char* key : {"mask.seed", "phantom.seed", "tuner.seed", "noise.seed", "csm.seed"}) {
      config.set(key, seed);
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jotlas: dynamic-MRI compressed-sensing reconstruction toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Config file (flat key = value lines)");
  app.add_option("--set", args.overrides, "Override a config entry, key=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", args.seed, "Override all module seeds");
  app.add_flag("--quiet", args.quiet, "Suppress normal output");

  const std::vector<std::string> commands = {"mask", "phantom", "simulate", "recon",
                                             "tune", "eval", "compare"};
  const std::vector<std::string> descriptions = {
      "Generate a sampling mask",
      "Generate a synthetic dynamic phantom",
      "Apply the forward model to an image (optional noise)",
      "Reconstruct an image from undersampled k-space",
      "Tune an unrolled parameter schedule with SPSA",
      "Evaluate PSNR/SSIM against a reference",
      "Run several solvers on identical inputs and tabulate",
  };
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
    sub->fallthrough();  // global options may follow the subcommand
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }
  args.seed_given = seed_opt->count() > 0;

  NullBuffer null_buffer;
  std::ostream null_stream(&null_buffer);
  std::ostream& out = args.quiet ? null_stream : std::cout;

  try {
    const jotlas::RunConfig config = assemble_config(args);
    for (const std::string& name : commands) {
      if (app.got_subcommand(name)) {
        jotlas::run_command(name, config, out);
        return 0;
      }
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const jotlas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const jotlas::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const jotlas::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
