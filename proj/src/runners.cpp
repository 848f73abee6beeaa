#include "cfn/runners.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cfn/agent.hpp"
#include "cfn/checkpoint.hpp"
#include "cfn/csv.hpp"
#include "cfn/estimator.hpp"
#include "cfn/linear.hpp"
#include "cfn/stats.hpp"

namespace cfn {

using nlohmann::json;

void parallel_runs(std::size_t count, const std::function<void(std::size_t)>& job) {
  if (count == 0) return;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CFN_WORKERS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 0) workers = static_cast<std::size_t>(parsed);
  }
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double checked_metric(double value, const std::string& what) {
  if (!std::isfinite(value))
    throw TrainingDivergedError("non-finite metric: " + what);
  return value;
}

namespace {

void prepare_out_dir(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  save_text_file(config.out_dir + "/config.json", config_to_json(config));
}

void write_summary(const ExperimentConfig& config, const json& summary) {
  save_text_file(config.out_dir + "/summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// validate-estimator

// One inverse-count estimate: average n coin-flip vectors of length d.
double simulate_estimate(int d, std::int64_t n, Rng& rng) {
  Vector z = Vector::Zero(d);
  for (std::int64_t i = 0; i < n; ++i) z += sample_coin_flips(d, rng);
  z /= static_cast<double>(n);
  return inverse_count_from_mean(z);
}

// Same estimator fed with standard-normal labels instead of coin flips.
double simulate_estimate_gaussian(int d, std::int64_t n, Rng& rng) {
  Vector z = Vector::Zero(d);
  for (std::int64_t i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z[j] += rng.normal();
  z /= static_cast<double>(n);
  return inverse_count_from_mean(z);
}

struct BlockedVariance {
  double variance = 0.0;   // pooled over all trials
  double stderr_ = 0.0;    // scatter of per-block variances
};

// Splits trials into blocks and uses the spread of per-block sample
// variances as the standard error of the pooled estimate.
template <typename Simulate>
BlockedVariance blocked_variance(std::int64_t trials, int blocks, Simulate&& simulate) {
  RunningStats pooled;
  RunningStats block_vars;
  const std::int64_t per_block = std::max<std::int64_t>(trials / blocks, 1);
  for (int b = 0; b < blocks; ++b) {
    RunningStats block;
    for (std::int64_t i = 0; i < per_block; ++i) {
      const double est = simulate();
      pooled.update(est);
      block.update(est);
    }
    block_vars.update(block.variance());
  }
  BlockedVariance out;
  out.variance = pooled.variance();
  out.stderr_ = standard_error(block_vars.variance(), block_vars.count);
  return out;
}

}  // namespace

void run_validate_estimator(const ExperimentConfig& config) {
  prepare_out_dir(config);
  const std::int64_t trials = config.trials;
  Rng root(config.seeds.front());

  CsvWriter report({"check", "n", "d", "trials", "observed", "expected", "stderr", "tolerance",
                    "verdict"});
  int failures = 0;
  int inconclusive = 0;
  auto verdict = [&](bool pass, bool conclusive) -> std::string {
    if (!conclusive) {
      ++inconclusive;
      return "inconclusive";
    }
    if (!pass) ++failures;
    return pass ? "pass" : "fail";
  };

  // Unbiasedness: Monte-Carlo mean of the estimate vs 1/n per (n, d).
  std::uint64_t stream = 0;
  for (std::int64_t n : config.n_list) {
    for (int d : config.d_list) {
      Rng rng = root.split(stream++);
      RunningStats stats;
      for (std::int64_t t = 0; t < trials; ++t) stats.update(simulate_estimate(d, n, rng));
      const double expected = 1.0 / static_cast<double>(n);
      const double se = standard_error(stats.variance(), stats.count);
      const bool pass = std::abs(stats.mean - expected) <= 3.0 * se;
      const bool conclusive = 3.0 * se <= 0.05 * expected || (n == 1 && stats.variance() == 0.0);
      report.add_row({"unbiasedness", format_int(n), format_int(d), format_int(trials),
                      format_double(stats.mean), format_double(expected), format_double(se),
                      format_double(3.0 * se), verdict(pass, conclusive)});
    }
  }

  // Variance law at d=1: Var[z_n^2] vs 2/n^2 - 2/n^3 (exactly 0 at n=1).
  for (std::int64_t n : config.n_list) {
    Rng rng = root.split(stream++);
    const BlockedVariance bv =
        blocked_variance(trials, 50, [&] { return simulate_estimate(1, n, rng); });
    const double expected = estimator_variance(n, 1.0);
    bool pass;
    if (n == 1)
      pass = bv.variance == 0.0;
    else
      pass = std::abs(bv.variance - expected) <= 0.05 * expected;
    const bool conclusive = n == 1 || trials >= 10000;
    report.add_row({"variance_law", format_int(n), "1", format_int(trials),
                    format_double(bv.variance), format_double(expected),
                    format_double(bv.stderr_), format_double(0.05 * expected),
                    verdict(pass, conclusive)});
  }

  // 1/d scaling and coin-flip optimality at the canonical n values.
  for (std::int64_t n : {std::int64_t{2}, std::int64_t{5}, std::int64_t{10}}) {
    Rng rng_d1 = root.split(stream++);
    Rng rng_d20 = root.split(stream++);
    const BlockedVariance var1 =
        blocked_variance(trials, 50, [&] { return simulate_estimate(1, n, rng_d1); });
    const BlockedVariance var20 =
        blocked_variance(trials, 50, [&] { return simulate_estimate(20, n, rng_d20); });
    const double expected = var1.variance / 20.0;
    const bool pass = std::abs(var20.variance - expected) <= 0.10 * expected;
    report.add_row({"d_scaling", format_int(n), "20", format_int(trials),
                    format_double(var20.variance), format_double(expected),
                    format_double(var20.stderr_), format_double(0.10 * expected),
                    verdict(pass, trials >= 10000)});

    Rng rng_gauss = root.split(stream++);
    const BlockedVariance var_gauss =
        blocked_variance(trials, 50, [&] { return simulate_estimate_gaussian(1, n, rng_gauss); });
    const double se_diff =
        std::sqrt(var_gauss.stderr_ * var_gauss.stderr_ + var1.stderr_ * var1.stderr_);
    const double diff = var_gauss.variance - var1.variance;
    const bool pass_opt = diff > 3.0 * se_diff;
    report.add_row({"coin_flip_optimality", format_int(n), "1", format_int(trials),
                    format_double(diff), format_double(estimator_variance(n, 3.0) -
                                                       estimator_variance(n, 1.0)),
                    format_double(se_diff), format_double(3.0 * se_diff),
                    verdict(pass_opt, trials >= 10000)});
  }

  report.write(config.out_dir + "/estimator_report.csv");
  json summary;
  summary["rows"] = report.row_count();
  summary["failures"] = failures;
  summary["inconclusive"] = inconclusive;
  summary["all_pass"] = failures == 0;
  write_summary(config, summary);
}

// ---------------------------------------------------------------------------
// linear-check

void run_linear_check(const ExperimentConfig& config) {
  prepare_out_dir(config);
  Rng root(config.seeds.front());
  CsvWriter report({"check", "detail", "observed", "expected", "error", "verdict"});
  int failures = 0;
  auto row = [&](const std::string& check, const std::string& detail, double observed,
                 double expected, double tol) {
    const double err = std::abs(observed - expected);
    const bool pass = err <= tol;
    if (!pass) ++failures;
    report.add_row({check, detail, format_double(observed), format_double(expected),
                    format_double(err), pass ? "pass" : "fail"});
  };

  // Tabular recovery: one-hot rows recover exact inverse counts.
  {
    const std::vector<int> counts = {4, 1, 2, 8, 3, 25};
    const int p = static_cast<int>(counts.size());
    std::int64_t n = 0;
    for (int c : counts) n += c;
    Matrix states = Matrix::Zero(n, p);
    std::int64_t r = 0;
    for (int k = 0; k < p; ++k)
      for (int i = 0; i < counts[static_cast<std::size_t>(k)]; ++i) states(r++, k) = 1.0;
    for (int k = 0; k < p; ++k) {
      Vector query = Vector::Zero(p);
      query[k] = 1.0;
      const double estimate = expected_inverse_count(query, states);
      row("tabular_recovery", "count=" + std::to_string(counts[static_cast<std::size_t>(k)]),
          estimate, 1.0 / counts[static_cast<std::size_t>(k)], 1e-12);
      if (counts[static_cast<std::size_t>(k)] == 25)
        row("bonus_axis", "N=25", bonus_from_inverse_count(estimate), 0.2, 1e-12);
    }
  }

  // Least-squares weights vs a normal-equations oracle on a full-rank system.
  {
    Rng rng = root.split(1);
    const int n = 8, p = 3, d = 5;
    Matrix states(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) states(i, j) = rng.normal();
    Matrix labels(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) labels(i, j) = rng.rademacher();
    const LinearCfnSolution fit = fit_linear(states, labels);
    const Matrix oracle =
        (states.transpose() * states).inverse() * states.transpose() * labels;
    row("normal_equations", "8x3_full_rank", (fit.weights - oracle).cwiseAbs().maxCoeff(), 0.0,
        1e-8);
  }

  // Monte-Carlo consistency: averaged fitted estimates vs the closed form.
  {
    Rng rng = root.split(2);
    const int n = 6, p = 2, d = 20;
    Matrix states(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) states(i, j) = rng.normal();
    Vector query = states.row(2).transpose();
    const double closed_form = expected_inverse_count(query, states);
    RunningStats mc;
    const int redraws = 10000;
    for (int t = 0; t < redraws; ++t) {
      Matrix labels(n, d);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) labels(i, j) = rng.rademacher();
      const LinearCfnSolution fit = fit_linear(states, labels);
      mc.update((query.transpose() * fit.weights).squaredNorm() / d);
    }
    const double se = standard_error(mc.variance(), mc.count);
    row("monte_carlo_consistency", "6x2_d20", mc.mean, closed_form, 3.0 * se);
  }

  // Basis invariance: an orthogonal change of feature basis leaves the
  // expected inverse count unchanged.
  {
    Rng rng = root.split(3);
    const int n = 9, p = 4;
    Matrix states(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) states(i, j) = rng.normal();
    Matrix gauss(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) gauss(i, j) = rng.normal();
    const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
    Vector query(p);
    for (int j = 0; j < p; ++j) query[j] = rng.normal();
    const double base = expected_inverse_count(query, states);
    const double rotated =
        expected_inverse_count((query.transpose() * q).transpose(), states * q);
    row("basis_invariance", "4_features", rotated, base, 1e-8);
  }

  report.write(config.out_dir + "/linear_report.csv");
  json summary;
  summary["rows"] = report.row_count();
  summary["failures"] = failures;
  summary["all_pass"] = failures == 0;
  write_summary(config, summary);
}

// ---------------------------------------------------------------------------
// bonus accuracy

namespace {

std::vector<double> predicted_bonuses(const CfnModel* cfn_model, const RndModel* rnd_model,
                                      const Matrix& states) {
  std::vector<double> out(static_cast<std::size_t>(states.rows()));
  if (cfn_model) {
    Matrix y = forward_batch(cfn_model->trainable, states);
    if (cfn_model->config.prior_enabled) {
      const Matrix praw = forward_batch(cfn_model->prior, states);
      for (Eigen::Index i = 0; i < y.rows(); ++i)
        y.row(i) += normalize_prior_output(*cfn_model, praw.row(i).transpose()).transpose();
    }
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      out[static_cast<std::size_t>(i)] =
          bonus_from_inverse_count(inverse_count_from_mean(y.row(i).transpose()));
  } else {
    const Matrix delta =
        forward_batch(rnd_model->predictor, states) - forward_batch(rnd_model->target, states);
    for (Eigen::Index i = 0; i < delta.rows(); ++i)
      out[static_cast<std::size_t>(i)] = delta.row(i).squaredNorm();
  }
  return out;
}

struct CellEval {
  std::vector<int> xs, ys;
  std::vector<std::int64_t> counts;
  std::vector<double> true_bonuses;
  std::vector<double> predicted;
};

CellEval evaluate_cells(const GridworldEnv& env, const GroundTruthCounter& counter,
                        const CfnModel* cfn_model, const RndModel* rnd_model,
                        bool include_unvisited) {
  CellEval eval;
  const GridworldConfig& gc = env.config();
  for (int y = 0; y < gc.height; ++y)
    for (int x = 0; x < gc.width; ++x)
      if (include_unvisited || counter.count(x, y) > 0) {
        eval.xs.push_back(x);
        eval.ys.push_back(y);
        eval.counts.push_back(counter.count(x, y));
        eval.true_bonuses.push_back(counter.true_bonus(x, y));
      }
  if (eval.xs.empty()) return eval;
  Matrix states(static_cast<Eigen::Index>(eval.xs.size()), env.observation_dim());
  for (std::size_t i = 0; i < eval.xs.size(); ++i)
    states.row(static_cast<Eigen::Index>(i)) =
        env.encode(GridState{eval.xs[i], eval.ys[i], 0}).transpose();
  eval.predicted = predicted_bonuses(cfn_model, rnd_model, states);
  return eval;
}

struct MsePair {
  double unique = 0.0;
  double weighted = 0.0;
};

MsePair bonus_mse(const CellEval& eval) {
  MsePair out;
  double weight_total = 0.0;
  std::size_t visited = 0;
  for (std::size_t i = 0; i < eval.xs.size(); ++i) {
    if (eval.counts[i] == 0) continue;
    const double err = eval.predicted[i] - eval.true_bonuses[i];
    out.unique += err * err;
    out.weighted += static_cast<double>(eval.counts[i]) * err * err;
    weight_total += static_cast<double>(eval.counts[i]);
    ++visited;
  }
  if (visited > 0) out.unique /= static_cast<double>(visited);
  if (weight_total > 0) out.weighted /= weight_total;
  return out;
}

}  // namespace

BonusAccuracyResult bonus_accuracy_single(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.agent.bonus_source == BonusSource::none)
    throw std::invalid_argument("bonus-accuracy: bonus_source must be cfn or rnd");

  BonusAccuracyResult result;
  result.seed = seed;

  GridworldEnv env(config.env);
  GroundTruthCounter counter(config.env.width, config.env.height);

  std::unique_ptr<CfnModel> cfn_model;
  std::unique_ptr<CoinFlipBuffer> buffer;
  std::unique_ptr<RndModel> rnd_model;
  std::unique_ptr<StateReplay> rnd_replay;
  std::unique_ptr<RlDriver> driver;

  const bool agent_policy = config.eval_policy == "agent";
  Rng root(seed);
  Rng rng_env = root.split(1);
  Rng rng_policy = root.split(2);
  Rng init_rng = root.split(4);
  Rng rng_flips = root.split(5);
  Rng rng_batch = root.split(6);

  if (agent_policy) {
    RlDriver::Config dc;
    dc.env = config.env;
    dc.agent = config.agent;
    dc.cfn = config.cfn;
    dc.rnd = config.rnd;
    dc.bonus_batch_size = config.bonus_batch_size;
    dc.bonus_buffer_capacity = config.bonus_buffer_capacity;
    dc.seed = seed;
    driver = std::make_unique<RlDriver>(dc);
  } else if (config.agent.bonus_source == BonusSource::cfn) {
    CfnConfig cc = config.cfn;
    cc.net.input_dim = env.observation_dim();
    cfn_model = std::make_unique<CfnModel>(make_cfn_model(cc, init_rng));
    buffer = std::make_unique<CoinFlipBuffer>(config.bonus_buffer_capacity, cc.priority_alpha);
  } else {
    RndConfig rc = config.rnd;
    rc.net.input_dim = env.observation_dim();
    rnd_model = std::make_unique<RndModel>(make_rnd_model(rc, init_rng));
    rnd_replay = std::make_unique<StateReplay>(
        static_cast<std::size_t>(config.bonus_buffer_capacity));
  }

  const GroundTruthCounter& eval_counter = agent_policy ? driver->counter() : counter;
  auto eval_models = [&]() {
    const CfnModel* cm = agent_policy ? driver->cfn_model() : cfn_model.get();
    const RndModel* rm = agent_policy ? driver->rnd_model() : rnd_model.get();
    return std::make_pair(cm, rm);
  };

  Vector obs;
  if (!agent_policy) obs = env.reset();

  for (std::int64_t step = 1; step <= config.total_steps; ++step) {
    if (agent_policy) {
      driver->step();
    } else {
      if (env.done()) obs = env.reset();
      const GridState s = env.state();
      counter.record(s.x, s.y);
      double loss = 0.0;
      if (cfn_model) {
        observe(*cfn_model, *buffer, obs, rng_flips);
        loss = cfn_train_step(*cfn_model, *buffer, config.bonus_batch_size, rng_batch);
      } else {
        rnd_observe(*rnd_model, obs);
        rnd_replay->push(obs);
        loss = rnd_train_step(*rnd_model,
                              rnd_replay->sample_batch(config.bonus_batch_size, rng_batch),
                              config.rnd.learning_rate);
      }
      checked_metric(loss, "bonus training loss");
      const Action action = static_cast<Action>(rng_policy.uniform_int(kNumActions));
      obs = env.step(action, rng_env).observation;
    }

    if (step % config.mse_interval == 0 || step == config.total_steps) {
      const auto [cm, rm] = eval_models();
      const GridworldEnv& eval_env = agent_policy ? driver->env() : env;
      const CellEval eval = evaluate_cells(eval_env, eval_counter, cm, rm, false);
      const MsePair mse = bonus_mse(eval);
      result.series_steps.push_back(step);
      result.series_mse_unique.push_back(checked_metric(mse.unique, "mse_unique"));
      result.series_mse_weighted.push_back(checked_metric(mse.weighted, "mse_weighted"));
    }
  }

  if (eval_counter.total() == 0) return result;  // nothing observed, nothing to evaluate

  const auto [cm, rm] = eval_models();
  const GridworldEnv& eval_env = agent_policy ? driver->env() : env;
  const CellEval eval = evaluate_cells(eval_env, eval_counter, cm, rm, true);
  std::vector<double> visited_true, visited_pred;
  for (std::size_t i = 0; i < eval.xs.size(); ++i) {
    if (eval.counts[i] > 0) {
      result.per_state.push_back({static_cast<double>(eval.xs[i]),
                                  static_cast<double>(eval.ys[i]),
                                  static_cast<double>(eval.counts[i]), eval.true_bonuses[i],
                                  eval.predicted[i]});
      visited_true.push_back(eval.true_bonuses[i]);
      visited_pred.push_back(checked_metric(eval.predicted[i], "predicted bonus"));
      result.trained_state_bonuses.push_back(eval.predicted[i]);
    } else {
      result.novel_state_bonuses.push_back(eval.predicted[i]);
    }
  }
  result.unique_states = static_cast<int>(visited_true.size());
  result.spearman =
      visited_true.size() >= 2 ? spearman(visited_true, visited_pred) : 0.0;
  if (!result.series_mse_unique.empty()) {
    result.final_mse_unique = result.series_mse_unique.back();
    result.final_mse_weighted = result.series_mse_weighted.back();
  }
  return result;
}

void run_bonus_accuracy(const ExperimentConfig& config) {
  prepare_out_dir(config);
  std::vector<BonusAccuracyResult> results(config.seeds.size());
  parallel_runs(config.seeds.size(), [&](std::size_t i) {
    results[i] = bonus_accuracy_single(config, config.seeds[i]);
  });

  CsvWriter per_state({"seed", "x", "y", "count", "true_bonus", "predicted_bonus"});
  CsvWriter series({"seed", "step", "mse_unique", "mse_weighted"});
  json per_seed = json::array();
  for (const BonusAccuracyResult& r : results) {
    for (const auto& cell : r.per_state)
      per_state.add_row({format_int(static_cast<std::int64_t>(r.seed)),
                         format_int(static_cast<std::int64_t>(cell[0])),
                         format_int(static_cast<std::int64_t>(cell[1])),
                         format_int(static_cast<std::int64_t>(cell[2])), format_double(cell[3]),
                         format_double(cell[4])});
    for (std::size_t k = 0; k < r.series_steps.size(); ++k)
      series.add_row({format_int(static_cast<std::int64_t>(r.seed)),
                      format_int(r.series_steps[k]), format_double(r.series_mse_unique[k]),
                      format_double(r.series_mse_weighted[k])});
    per_seed.push_back({{"seed", r.seed},
                        {"spearman", r.spearman},
                        {"final_mse_unique", r.final_mse_unique},
                        {"final_mse_weighted", r.final_mse_weighted},
                        {"unique_states", r.unique_states}});
  }
  per_state.write(config.out_dir + "/per_state.csv");
  series.write(config.out_dir + "/mse_series.csv");

  CsvWriter metrics({"run_id", "seed", "step", "metric", "value"});
  for (const BonusAccuracyResult& r : results) {
    const std::string run_id = "seed" + format_int(static_cast<std::int64_t>(r.seed));
    const std::string step = format_int(config.total_steps);
    metrics.add_row({run_id, format_int(static_cast<std::int64_t>(r.seed)), step, "spearman",
                     format_double(r.spearman)});
    metrics.add_row({run_id, format_int(static_cast<std::int64_t>(r.seed)), step,
                     "final_mse_unique", format_double(r.final_mse_unique)});
    metrics.add_row({run_id, format_int(static_cast<std::int64_t>(r.seed)), step,
                     "final_mse_weighted", format_double(r.final_mse_weighted)});
  }
  metrics.write(config.out_dir + "/metrics.csv");

  std::vector<double> spearmans;
  for (const auto& r : results) spearmans.push_back(r.spearman);
  const MeanAndError agg = mean_and_error(spearmans);
  json summary;
  summary["per_seed"] = per_seed;
  summary["spearman_mean"] = agg.mean;
  summary["spearman_stderr"] = agg.stderr_;
  write_summary(config, summary);
}

// ---------------------------------------------------------------------------
// ablation

void run_ablation(const ExperimentConfig& config) {
  validate_config(config);
  prepare_out_dir(config);

  struct Cell {
    std::string name;
    bool prior;
    bool prioritization;
    bool zero_flips;
  };
  std::vector<Cell> cells = {{"full", true, true, false},
                             {"prior_only", true, false, false},
                             {"prioritization_only", false, true, false},
                             {"neither", false, false, false}};
  if (config.cfn.zero_flip_mode) cells.push_back({"zero_flip", true, true, true});

  const std::size_t n_cells = cells.size();
  const std::size_t n_seeds = config.seeds.size();
  std::vector<BonusAccuracyResult> results(n_cells * n_seeds);
  parallel_runs(n_cells * n_seeds, [&](std::size_t i) {
    const Cell& cell = cells[i / n_seeds];
    ExperimentConfig run_config = config;
    run_config.cfn.prior_enabled = cell.prior;
    run_config.cfn.prioritization_enabled = cell.prioritization;
    run_config.cfn.zero_flip_mode = cell.zero_flips;
    run_config.agent.bonus_source = BonusSource::cfn;
    results[i] = bonus_accuracy_single(run_config, config.seeds[i % n_seeds]);
  });

  CsvWriter report({"cell", "seed", "final_mse_unique", "final_mse_weighted", "spearman"});
  CsvWriter aggregate({"cell", "mean_mse_unique", "stderr", "rank"});
  CsvWriter metrics({"run_id", "seed", "step", "metric", "value"});
  std::vector<std::pair<std::string, MeanAndError>> cell_stats;
  for (std::size_t c = 0; c < n_cells; ++c) {
    std::vector<double> mses;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const BonusAccuracyResult& r = results[c * n_seeds + s];
      report.add_row({cells[c].name, format_int(static_cast<std::int64_t>(r.seed)),
                      format_double(r.final_mse_unique), format_double(r.final_mse_weighted),
                      format_double(r.spearman)});
      metrics.add_row({cells[c].name + "_seed" + format_int(static_cast<std::int64_t>(r.seed)),
                       format_int(static_cast<std::int64_t>(r.seed)),
                       format_int(config.total_steps), "final_mse_unique",
                       format_double(r.final_mse_unique)});
      mses.push_back(r.final_mse_unique);
    }
    cell_stats.emplace_back(cells[c].name, mean_and_error(mses));
  }
  metrics.write(config.out_dir + "/metrics.csv");

  // Rank the four standard cells; a zero-flip cell is reported but not ranked.
  std::vector<std::size_t> order(std::min<std::size_t>(cell_stats.size(), 4));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cell_stats[a].second.mean < cell_stats[b].second.mean;
  });
  std::vector<int> rank(cell_stats.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i) + 1;
  for (std::size_t c = 0; c < cell_stats.size(); ++c)
    aggregate.add_row({cell_stats[c].first, format_double(cell_stats[c].second.mean),
                       format_double(cell_stats[c].second.stderr_), format_int(rank[c])});

  report.write(config.out_dir + "/ablation_report.csv");
  aggregate.write(config.out_dir + "/aggregate.csv");

  // Two-regime histogram for the zero-flip cell.
  if (config.cfn.zero_flip_mode) {
    CsvWriter histogram({"seed", "regime", "bonus"});
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const BonusAccuracyResult& r = results[(n_cells - 1) * n_seeds + s];
      for (double b : r.trained_state_bonuses)
        histogram.add_row({format_int(static_cast<std::int64_t>(r.seed)), "visited",
                           format_double(b)});
      for (double b : r.novel_state_bonuses)
        histogram.add_row({format_int(static_cast<std::int64_t>(r.seed)), "novel",
                           format_double(b)});
    }
    histogram.write(config.out_dir + "/zero_flip_histogram.csv");
  }

  json summary;
  json ordering = json::array();
  for (std::size_t i : order) ordering.push_back(cell_stats[i].first);
  summary["ordering_by_mse"] = ordering;
  const MeanAndError& full = cell_stats[0].second;
  const MeanAndError& neither = cell_stats[3].second;
  summary["full_mean_mse"] = full.mean;
  summary["full_stderr"] = full.stderr_;
  summary["neither_mean_mse"] = neither.mean;
  summary["neither_stderr"] = neither.stderr_;
  summary["full_is_lowest"] = order.front() == 0;
  summary["full_vs_neither_separated"] =
      full.mean + full.stderr_ < neither.mean - neither.stderr_;
  write_summary(config, summary);
}

// ---------------------------------------------------------------------------
// rl

namespace {

RlDriver::Config driver_config(const ExperimentConfig& config, std::uint64_t seed) {
  RlDriver::Config dc;
  dc.env = config.env;
  dc.agent = config.agent;
  dc.cfn = config.cfn;
  dc.rnd = config.rnd;
  dc.bonus_batch_size = config.bonus_batch_size;
  dc.bonus_buffer_capacity = config.bonus_buffer_capacity;
  dc.seed = seed;
  return dc;
}

struct RlRunOutput {
  std::vector<EpisodeRow> episodes;
  std::vector<StepMetrics> trajectory;  // only when requested
  double final50_mean_return = 0.0;
  double mean_return_all = 0.0;
};

RlRunOutput rl_single(const ExperimentConfig& config, std::uint64_t seed, bool log_trajectory) {
  RlDriver driver(driver_config(config, seed));
  RlRunOutput out;
  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    const StepMetrics m = driver.step();
    checked_metric(m.bonus_raw, "bonus");
    if (log_trajectory) out.trajectory.push_back(m);
  }
  out.episodes = driver.episodes();
  RunningStats all_returns;
  for (const EpisodeRow& e : out.episodes) all_returns.update(e.return_);
  out.mean_return_all = all_returns.count > 0 ? all_returns.mean : 0.0;
  const std::size_t n = out.episodes.size();
  const std::size_t window = std::min<std::size_t>(n, 50);
  if (window > 0) {
    double sum = 0.0;
    for (std::size_t i = n - window; i < n; ++i) sum += out.episodes[i].return_;
    out.final50_mean_return = sum / static_cast<double>(window);
  }
  return out;
}

}  // namespace

void run_rl(const ExperimentConfig& config) {
  prepare_out_dir(config);
  std::vector<double> lambdas = config.lambda_list;
  if (lambdas.empty()) lambdas.push_back(config.agent.intrinsic_scale);

  const std::size_t n_seeds = config.seeds.size();
  std::vector<RlRunOutput> outputs(lambdas.size() * n_seeds);
  parallel_runs(outputs.size(), [&](std::size_t i) {
    ExperimentConfig run_config = config;
    run_config.agent.intrinsic_scale = lambdas[i / n_seeds];
    const bool log_traj = config.log_trajectories && i == 0;
    outputs[i] = rl_single(run_config, config.seeds[i % n_seeds], log_traj);
  });

  CsvWriter curve({"lambda", "seed", "episode", "steps", "return", "mean_bonus",
                   "unique_states", "reached_goal"});
  CsvWriter metrics({"run_id", "seed", "episode", "metric", "value"});
  json per_run = json::array();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double lambda = lambdas[i / n_seeds];
    const std::uint64_t seed = config.seeds[i % n_seeds];
    const std::string run_id = "lambda" + format_double(lambda) + "_seed" +
                               format_int(static_cast<std::int64_t>(seed));
    for (const EpisodeRow& e : outputs[i].episodes)
      curve.add_row({format_double(lambda), format_int(static_cast<std::int64_t>(seed)),
                     format_int(e.episode), format_int(e.steps), format_double(e.return_),
                     format_double(e.mean_bonus), format_int(e.unique_states),
                     format_int(e.reached_goal ? 1 : 0)});
    const std::size_t final_episode =
        outputs[i].episodes.empty() ? 0 : outputs[i].episodes.size() - 1;
    metrics.add_row({run_id, format_int(static_cast<std::int64_t>(seed)),
                     format_int(static_cast<std::int64_t>(final_episode)),
                     "final50_mean_return", format_double(outputs[i].final50_mean_return)});
    metrics.add_row({run_id, format_int(static_cast<std::int64_t>(seed)),
                     format_int(static_cast<std::int64_t>(final_episode)), "mean_return_all",
                     format_double(outputs[i].mean_return_all)});
    per_run.push_back({{"lambda", lambda},
                       {"seed", seed},
                       {"episodes", outputs[i].episodes.size()},
                       {"final50_mean_return", outputs[i].final50_mean_return},
                       {"mean_return_all", outputs[i].mean_return_all}});
  }
  curve.write(config.out_dir + "/learning_curve.csv");
  metrics.write(config.out_dir + "/metrics.csv");

  // Across-seed aggregation per episode index (up to the shortest run).
  CsvWriter aggregate({"lambda", "episode", "mean_return", "stderr"});
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    std::size_t min_episodes = SIZE_MAX;
    for (std::size_t s = 0; s < n_seeds; ++s)
      min_episodes = std::min(min_episodes, outputs[l * n_seeds + s].episodes.size());
    if (min_episodes == SIZE_MAX) min_episodes = 0;
    for (std::size_t e = 0; e < min_episodes; ++e) {
      std::vector<double> returns;
      for (std::size_t s = 0; s < n_seeds; ++s)
        returns.push_back(outputs[l * n_seeds + s].episodes[e].return_);
      const MeanAndError m = mean_and_error(returns);
      aggregate.add_row({format_double(lambdas[l]), format_int(static_cast<std::int64_t>(e)),
                         format_double(m.mean), format_double(m.stderr_)});
    }
  }
  aggregate.write(config.out_dir + "/aggregate.csv");

  if (config.log_trajectories && !outputs.empty()) {
    CsvWriter trajectory({"episode", "t", "x", "y", "action", "reward"});
    for (const StepMetrics& m : outputs[0].trajectory)
      trajectory.add_row({format_int(m.episode), format_int(m.t), format_int(m.x),
                          format_int(m.y), format_int(m.action), format_double(m.extrinsic)});
    trajectory.write(config.out_dir + "/trajectory.csv");
  }

  json summary;
  summary["per_run"] = per_run;
  write_summary(config, summary);
}

// ---------------------------------------------------------------------------
// noise sweep

void run_noise_sweep(const ExperimentConfig& config) {
  validate_config(config);
  prepare_out_dir(config);

  const std::vector<BonusSource> methods = {BonusSource::cfn, BonusSource::rnd};
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t n_eta = config.eta_list.size();
  std::vector<RlRunOutput> outputs(methods.size() * n_eta * n_seeds);

  parallel_runs(outputs.size(), [&](std::size_t i) {
    const std::size_t method_idx = i / (n_eta * n_seeds);
    const std::size_t eta_idx = (i / n_seeds) % n_eta;
    ExperimentConfig run_config = config;
    run_config.agent.bonus_source = methods[method_idx];
    run_config.env.action_noise = config.eta_list[eta_idx];
    outputs[i] = rl_single(run_config, config.seeds[i % n_seeds], false);
  });

  auto method_name = [&](std::size_t m) { return m == 0 ? std::string("cfn") : std::string("rnd"); };

  CsvWriter bar({"method", "eta", "seed", "mean_return", "episodes"});
  CsvWriter aggregate({"method", "eta", "mean_return", "stderr"});
  std::vector<std::vector<MeanAndError>> stats(methods.size(),
                                               std::vector<MeanAndError>(n_eta));
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t e = 0; e < n_eta; ++e) {
      std::vector<double> means;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const RlRunOutput& r = outputs[m * n_eta * n_seeds + e * n_seeds + s];
        bar.add_row({method_name(m), format_double(config.eta_list[e]),
                     format_int(static_cast<std::int64_t>(config.seeds[s])),
                     format_double(r.mean_return_all),
                     format_int(static_cast<std::int64_t>(r.episodes.size()))});
        means.push_back(r.mean_return_all);
      }
      stats[m][e] = mean_and_error(means);
      aggregate.add_row({method_name(m), format_double(config.eta_list[e]),
                         format_double(stats[m][e].mean), format_double(stats[m][e].stderr_)});
    }
  }
  bar.write(config.out_dir + "/bar_data.csv");
  aggregate.write(config.out_dir + "/aggregate.csv");

  CsvWriter metrics({"run_id", "seed", "step", "metric", "value"});
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t e = 0; e < n_eta; ++e)
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const RlRunOutput& r = outputs[m * n_eta * n_seeds + e * n_seeds + s];
        metrics.add_row({method_name(m) + "_eta" + format_double(config.eta_list[e]),
                         format_int(static_cast<std::int64_t>(config.seeds[s])),
                         format_int(config.total_steps), "mean_return_all",
                         format_double(r.mean_return_all)});
      }
  metrics.write(config.out_dir + "/metrics.csv");

  // CFN minus RND with a 95% normal confidence interval per eta.
  CsvWriter diff({"eta", "cfn_minus_rnd", "ci_low", "ci_high"});
  json diffs = json::array();
  for (std::size_t e = 0; e < n_eta; ++e) {
    const double d = stats[0][e].mean - stats[1][e].mean;
    const double se = std::sqrt(stats[0][e].stderr_ * stats[0][e].stderr_ +
                                stats[1][e].stderr_ * stats[1][e].stderr_);
    diff.add_row({format_double(config.eta_list[e]), format_double(d),
                  format_double(d - 1.96 * se), format_double(d + 1.96 * se)});
    diffs.push_back({{"eta", config.eta_list[e]},
                     {"cfn_minus_rnd", d},
                     {"ci_low", d - 1.96 * se},
                     {"ci_high", d + 1.96 * se}});
  }
  diff.write(config.out_dir + "/cfn_minus_rnd.csv");

  json summary;
  summary["diff_by_eta"] = diffs;
  write_summary(config, summary);
}

void run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  if (config.experiment == "validate-estimator") return run_validate_estimator(config);
  if (config.experiment == "linear-check") return run_linear_check(config);
  if (config.experiment == "bonus-accuracy") return run_bonus_accuracy(config);
  if (config.experiment == "ablation") return run_ablation(config);
  if (config.experiment == "rl") return run_rl(config);
  if (config.experiment == "noise-sweep") return run_noise_sweep(config);
  throw std::invalid_argument("unknown experiment kind '" + config.experiment + "'");
}

}  // namespace cfn
