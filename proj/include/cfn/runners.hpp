#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfn/experiment.hpp"
#include "cfn/types.hpp"

namespace cfn {

/// Runs `count` independent jobs on a small worker pool (one job at a time
/// per worker, no shared state between jobs). Rethrows the first job
/// exception after all workers finish.
void parallel_runs(std::size_t count, const std::function<void(std::size_t)>& job);

/// Aborts the run with a diagnostic when a metric is not finite.
double checked_metric(double value, const std::string& what);

/// Per-seed result of one bonus-accuracy rollout.
struct BonusAccuracyResult {
  std::uint64_t seed = 0;
  double spearman = 0.0;
  double final_mse_unique = 0.0;
  double final_mse_weighted = 0.0;
  int unique_states = 0;
  // time series at mse_interval boundaries
  std::vector<std::int64_t> series_steps;
  std::vector<double> series_mse_unique;
  std::vector<double> series_mse_weighted;
  // per visited cell: x, y, count, true bonus, predicted bonus
  std::vector<std::array<double, 5>> per_state;
  // bonus histogram inputs for the zero-flip two-regime report
  std::vector<double> trained_state_bonuses;
  std::vector<double> novel_state_bonuses;
};

BonusAccuracyResult bonus_accuracy_single(const ExperimentConfig& config, std::uint64_t seed);

/// Experiment entry points; each writes config.json, CSV outputs and
/// summary.json into config.out_dir.
void run_validate_estimator(const ExperimentConfig& config);
void run_linear_check(const ExperimentConfig& config);
void run_bonus_accuracy(const ExperimentConfig& config);
void run_ablation(const ExperimentConfig& config);
void run_rl(const ExperimentConfig& config);
void run_noise_sweep(const ExperimentConfig& config);

/// Dispatch on config.experiment.
void run_experiment(const ExperimentConfig& config);

}  // namespace cfn
