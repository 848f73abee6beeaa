#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfn/agent.hpp"

namespace cfn {

/// Declarative description of one experiment invocation. A config plus the
/// code version fully determines every output byte; the resolved config is
/// echoed to the output directory.
struct ExperimentConfig {
  std::string experiment;  // validate-estimator | linear-check | bonus-accuracy |
                           // ablation | rl | noise-sweep
  std::vector<std::uint64_t> seeds;
  std::int64_t total_steps = 0;
  std::string out_dir = "out";

  GridworldConfig env;
  CfnConfig cfn;
  RndConfig rnd;
  AgentConfig agent;
  int bonus_batch_size = 256;
  int bonus_buffer_capacity = 100000;

  // validate-estimator
  std::int64_t trials = 100000;
  std::vector<std::int64_t> n_list = {1, 2, 5, 25, 100};
  std::vector<int> d_list = {1, 20};

  // noise-sweep
  std::vector<double> eta_list = {0.0, 0.1, 0.3, 0.5};

  // rl: when nonempty, one learning-curve family per intrinsic scale
  std::vector<double> lambda_list;

  // bonus-accuracy
  int mse_interval = 1000;
  std::string eval_policy = "random";  // random | agent

  bool log_trajectories = false;
};

/// Baseline config for an experiment kind (gridworld sizes, step budgets
/// and seed counts differ per kind).
ExperimentConfig default_config(const std::string& experiment);

/// Parses a config from JSON text layered over the kind's defaults.
/// Unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);

/// Serializes every field (the echo written next to experiment outputs).
std::string config_to_json(const ExperimentConfig& config);

/// Sanity-checks cross-field constraints; throws std::invalid_argument.
void validate_config(const ExperimentConfig& config);

}  // namespace cfn
