// Command-line experiment runner: estimator validation, linear closed-form
// checks, bonus-accuracy sweeps, ablations, RL learning curves and action-
// noise sweeps. Each subcommand writes CSV outputs, a summary.json and the
// fully resolved config into its output directory.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfn/checkpoint.hpp"
#include "cfn/experiment.hpp"
#include "cfn/runners.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> seed_count;
  std::optional<std::string> out_dir;
  std::optional<std::int64_t> steps;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON experiment config file");
  cmd->add_option("--seed", flags.seed, "Base seed (replaces the config seed list)");
  cmd->add_option("--seeds", flags.seed_count, "Number of consecutive seeds from the base seed");
  cmd->add_option("--out", flags.out_dir, "Output directory");
  cmd->add_option("--steps", flags.steps, "Total environment steps");
}

cfn::ExperimentConfig resolve_config(const std::string& experiment, const CommonFlags& flags) {
  cfn::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = cfn::config_from_json(cfn::load_text_file(flags.config_path));
    if (config.experiment != experiment)
      throw std::invalid_argument("config file is for experiment '" + config.experiment +
                                  "', expected '" + experiment + "'");
  } else {
    config = cfn::default_config(experiment);
  }
  if (flags.seed || flags.seed_count) {
    const std::uint64_t base = flags.seed.value_or(config.seeds.front());
    const int count = flags.seed_count.value_or(flags.seed ? 1 : static_cast<int>(config.seeds.size()));
    config.seeds.clear();
    for (int i = 0; i < count; ++i) config.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.steps) config.total_steps = *flags.steps;
  cfn::validate_config(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coin-flip pseudocount experiments"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"validate-estimator", "Monte-Carlo checks of the inverse-count estimator"},
      {"linear-check", "Closed-form linear solution checks"},
      {"bonus-accuracy", "Bonus prediction accuracy against ground-truth counts"},
      {"ablation", "Prior/prioritization ablation grid"},
      {"rl", "Sparse-reward gridworld learning curves"},
      {"noise-sweep", "Returns under increasing action noise"},
  };

  std::vector<CommonFlags> flags(experiments.size());
  std::string chosen;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(experiments[i].first, experiments[i].second);
    add_common_flags(cmd, flags[i]);
    cmd->callback([&chosen, name = experiments[i].first] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::size_t index = 0;
  for (std::size_t i = 0; i < experiments.size(); ++i)
    if (experiments[i].first == chosen) index = i;

  try {
    const cfn::ExperimentConfig config = resolve_config(chosen, flags[index]);
    cfn::run_experiment(config);
    std::printf("done: %s -> %s\n", chosen.c_str(), config.out_dir.c_str());
    return 0;
  } catch (const cfn::TrainingDivergedError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
