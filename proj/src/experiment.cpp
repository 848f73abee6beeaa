#include "cfn/experiment.hpp"

#include <set>
#include <stdexcept>

#include <json.hpp>

namespace cfn {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

Encoding encoding_from_string(const std::string& s) {
  if (s == "one_hot") return Encoding::one_hot;
  if (s == "coordinates") return Encoding::coordinates;
  throw std::invalid_argument("config: unknown encoding '" + s + "'");
}

std::string encoding_to_string(Encoding e) {
  return e == Encoding::one_hot ? "one_hot" : "coordinates";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("config: unknown activation '" + s + "'");
}

std::string activation_to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

BonusSource bonus_source_from_string(const std::string& s) {
  if (s == "none") return BonusSource::none;
  if (s == "cfn") return BonusSource::cfn;
  if (s == "rnd") return BonusSource::rnd;
  throw std::invalid_argument("config: unknown bonus_source '" + s + "'");
}

std::string bonus_source_to_string(BonusSource b) {
  switch (b) {
    case BonusSource::none: return "none";
    case BonusSource::cfn: return "cfn";
    case BonusSource::rnd: return "rnd";
  }
  return "none";
}

QBackend q_backend_from_string(const std::string& s) {
  if (s == "tabular") return QBackend::tabular;
  if (s == "mlp") return QBackend::mlp;
  throw std::invalid_argument("config: unknown q_backend '" + s + "'");
}

std::string q_backend_to_string(QBackend q) {
  return q == QBackend::tabular ? "tabular" : "mlp";
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_env(const json& j, GridworldConfig& env) {
  reject_unknown_keys(j, {"width", "height", "max_steps_base", "action_noise", "encoding"},
                      "env");
  maybe(j, "width", env.width);
  maybe(j, "height", env.height);
  maybe(j, "max_steps_base", env.max_steps_base);
  maybe(j, "action_noise", env.action_noise);
  if (j.contains("encoding")) env.encoding = encoding_from_string(j.at("encoding"));
}

void parse_cfn(const json& j, CfnConfig& cfn) {
  reject_unknown_keys(j,
                      {"flip_count", "hidden_layers", "activation", "learning_rate",
                       "priority_alpha", "prior_enabled", "prioritization_enabled",
                       "zero_flip_mode", "subtract_prior_mean"},
                      "cfn");
  maybe(j, "flip_count", cfn.flip_count);
  maybe(j, "hidden_layers", cfn.net.hidden_layers);
  if (j.contains("activation")) cfn.net.activation = activation_from_string(j.at("activation"));
  maybe(j, "learning_rate", cfn.learning_rate);
  maybe(j, "priority_alpha", cfn.priority_alpha);
  maybe(j, "prior_enabled", cfn.prior_enabled);
  maybe(j, "prioritization_enabled", cfn.prioritization_enabled);
  maybe(j, "zero_flip_mode", cfn.zero_flip_mode);
  maybe(j, "subtract_prior_mean", cfn.subtract_prior_mean);
  cfn.net.output_dim = cfn.flip_count;
}

void parse_rnd(const json& j, RndConfig& rnd) {
  reject_unknown_keys(j, {"hidden_layers", "activation", "output_dim", "learning_rate",
                          "normalize_bonus"},
                      "rnd");
  maybe(j, "hidden_layers", rnd.net.hidden_layers);
  if (j.contains("activation")) rnd.net.activation = activation_from_string(j.at("activation"));
  maybe(j, "output_dim", rnd.net.output_dim);
  maybe(j, "learning_rate", rnd.learning_rate);
  maybe(j, "normalize_bonus", rnd.normalize_bonus);
}

void parse_agent(const json& j, AgentConfig& agent) {
  reject_unknown_keys(j,
                      {"discount", "intrinsic_scale", "learning_rate", "epsilon", "q_backend",
                       "bonus_source", "reward_normalization", "q_hidden", "q_learning_rate",
                       "q_replay_capacity", "q_batch_size", "q_target_sync_period"},
                      "agent");
  maybe(j, "discount", agent.discount);
  maybe(j, "intrinsic_scale", agent.intrinsic_scale);
  maybe(j, "learning_rate", agent.learning_rate);
  maybe(j, "epsilon", agent.epsilon);
  if (j.contains("q_backend")) agent.q_backend = q_backend_from_string(j.at("q_backend"));
  if (j.contains("bonus_source"))
    agent.bonus_source = bonus_source_from_string(j.at("bonus_source"));
  maybe(j, "reward_normalization", agent.reward_normalization);
  maybe(j, "q_hidden", agent.q_hidden);
  maybe(j, "q_learning_rate", agent.q_learning_rate);
  maybe(j, "q_replay_capacity", agent.q_replay_capacity);
  maybe(j, "q_batch_size", agent.q_batch_size);
  maybe(j, "q_target_sync_period", agent.q_target_sync_period);
}

}  // namespace

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.cfn.net.hidden_layers = {64, 64};
  c.cfn.net.activation = Activation::relu;
  c.cfn.net.output_dim = c.cfn.flip_count;
  c.rnd.net.hidden_layers = {64, 64};
  c.rnd.net.activation = Activation::relu;
  c.rnd.net.output_dim = 20;

  if (experiment == "validate-estimator" || experiment == "linear-check") {
    c.seeds = {7};
  } else if (experiment == "bonus-accuracy") {
    c.env.width = 42;
    c.env.height = 42;
    c.total_steps = 100000;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    c.agent.bonus_source = BonusSource::cfn;
  } else if (experiment == "ablation") {
    c.env.width = 42;
    c.env.height = 42;
    c.total_steps = 100000;
    c.seeds = {0, 1, 2, 3, 4};
    c.agent.bonus_source = BonusSource::cfn;
  } else if (experiment == "rl") {
    c.env.width = 10;
    c.env.height = 10;
    c.total_steps = 200000;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  } else if (experiment == "noise-sweep") {
    c.env.width = 10;
    c.env.height = 10;
    c.total_steps = 100000;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  } else {
    throw std::invalid_argument("unknown experiment kind '" + experiment + "'");
  }
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.contains("experiment"))
    throw std::invalid_argument("config: missing required key 'experiment'");
  ExperimentConfig c = default_config(j.at("experiment").get<std::string>());

  reject_unknown_keys(j,
                      {"experiment", "seeds", "total_steps", "out_dir", "env", "cfn", "rnd",
                       "agent", "bonus_batch_size", "bonus_buffer_capacity", "trials", "n_list",
                       "d_list", "eta_list", "lambda_list", "mse_interval", "eval_policy",
                       "log_trajectories"},
                      "top level");
  maybe(j, "seeds", c.seeds);
  maybe(j, "total_steps", c.total_steps);
  maybe(j, "out_dir", c.out_dir);
  if (j.contains("env")) parse_env(j.at("env"), c.env);
  if (j.contains("cfn")) parse_cfn(j.at("cfn"), c.cfn);
  if (j.contains("rnd")) parse_rnd(j.at("rnd"), c.rnd);
  if (j.contains("agent")) parse_agent(j.at("agent"), c.agent);
  maybe(j, "bonus_batch_size", c.bonus_batch_size);
  maybe(j, "bonus_buffer_capacity", c.bonus_buffer_capacity);
  maybe(j, "trials", c.trials);
  maybe(j, "n_list", c.n_list);
  maybe(j, "d_list", c.d_list);
  maybe(j, "eta_list", c.eta_list);
  maybe(j, "lambda_list", c.lambda_list);
  maybe(j, "mse_interval", c.mse_interval);
  maybe(j, "eval_policy", c.eval_policy);
  maybe(j, "log_trajectories", c.log_trajectories);
  validate_config(c);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["seeds"] = c.seeds;
  j["total_steps"] = c.total_steps;
  j["out_dir"] = c.out_dir;
  j["env"] = json{{"width", c.env.width},
                  {"height", c.env.height},
                  {"max_steps_base", c.env.max_steps_base},
                  {"action_noise", c.env.action_noise},
                  {"encoding", encoding_to_string(c.env.encoding)}};
  j["cfn"] = json{{"flip_count", c.cfn.flip_count},
                  {"hidden_layers", c.cfn.net.hidden_layers},
                  {"activation", activation_to_string(c.cfn.net.activation)},
                  {"learning_rate", c.cfn.learning_rate},
                  {"priority_alpha", c.cfn.priority_alpha},
                  {"prior_enabled", c.cfn.prior_enabled},
                  {"prioritization_enabled", c.cfn.prioritization_enabled},
                  {"zero_flip_mode", c.cfn.zero_flip_mode},
                  {"subtract_prior_mean", c.cfn.subtract_prior_mean}};
  j["rnd"] = json{{"hidden_layers", c.rnd.net.hidden_layers},
                  {"activation", activation_to_string(c.rnd.net.activation)},
                  {"output_dim", c.rnd.net.output_dim},
                  {"learning_rate", c.rnd.learning_rate},
                  {"normalize_bonus", c.rnd.normalize_bonus}};
  j["agent"] = json{{"discount", c.agent.discount},
                    {"intrinsic_scale", c.agent.intrinsic_scale},
                    {"learning_rate", c.agent.learning_rate},
                    {"epsilon", c.agent.epsilon},
                    {"q_backend", q_backend_to_string(c.agent.q_backend)},
                    {"bonus_source", bonus_source_to_string(c.agent.bonus_source)},
                    {"reward_normalization", c.agent.reward_normalization},
                    {"q_hidden", c.agent.q_hidden},
                    {"q_learning_rate", c.agent.q_learning_rate},
                    {"q_replay_capacity", c.agent.q_replay_capacity},
                    {"q_batch_size", c.agent.q_batch_size},
                    {"q_target_sync_period", c.agent.q_target_sync_period}};
  j["bonus_batch_size"] = c.bonus_batch_size;
  j["bonus_buffer_capacity"] = c.bonus_buffer_capacity;
  j["trials"] = c.trials;
  j["n_list"] = c.n_list;
  j["d_list"] = c.d_list;
  j["eta_list"] = c.eta_list;
  j["lambda_list"] = c.lambda_list;
  j["mse_interval"] = c.mse_interval;
  j["eval_policy"] = c.eval_policy;
  j["log_trajectories"] = c.log_trajectories;
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (c.out_dir.empty()) throw std::invalid_argument("config: out_dir must be nonempty");
  if (c.experiment == "ablation" && c.seeds.size() < 5)
    throw std::invalid_argument("config: ablation requires at least 5 seeds per cell");
  if (c.experiment == "noise-sweep")
    for (double eta : c.eta_list)
      if (eta < 0.0 || eta > 0.9)
        throw std::invalid_argument("config: eta values must lie in [0, 0.9]");
  if (c.experiment == "validate-estimator" && c.trials < 1)
    throw std::invalid_argument("config: validate-estimator needs trials >= 1");
  if (c.eval_policy != "random" && c.eval_policy != "agent")
    throw std::invalid_argument("config: eval_policy must be 'random' or 'agent'");
  if (c.bonus_batch_size < 1) throw std::invalid_argument("config: bonus_batch_size must be >= 1");
  if (c.bonus_buffer_capacity < 1)
    throw std::invalid_argument("config: bonus_buffer_capacity must be >= 1");
  if (c.mse_interval < 1) throw std::invalid_argument("config: mse_interval must be >= 1");
}

}  // namespace cfn
