#include "cfn/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cfn {

using nlohmann::json;

namespace {

json spec_to_json(const MlpSpec& spec) {
  return json{{"input_dim", spec.input_dim},
              {"hidden_layers", spec.hidden_layers},
              {"output_dim", spec.output_dim},
              {"activation", spec.activation == Activation::relu ? "relu" : "tanh"}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
  spec.output_dim = j.at("output_dim").get<int>();
  const std::string act = j.at("activation").get<std::string>();
  if (act == "relu")
    spec.activation = Activation::relu;
  else if (act == "tanh")
    spec.activation = Activation::tanh;
  else
    throw std::invalid_argument("checkpoint: unknown activation '" + act + "'");
  return spec;
}

json params_to_json(const MlpParams& params) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(param_count(params)));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Matrix& w = params.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) values.push_back(w(i, j));
    const Vector& b = params.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) values.push_back(b[i]);
  }
  return json{{"format_version", 1}, {"spec", spec_to_json(params.spec)}, {"values", values}};
}

MlpParams params_from_json(const json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::invalid_argument("checkpoint: unsupported format version");
  MlpParams params;
  params.spec = spec_from_json(j.at("spec"));
  const std::vector<double> values = j.at("values").get<std::vector<double>>();

  std::vector<int> sizes;
  sizes.push_back(params.spec.input_dim);
  for (int h : params.spec.hidden_layers) sizes.push_back(h);
  sizes.push_back(params.spec.output_dim);

  std::size_t cursor = 0;
  auto take = [&]() {
    if (cursor >= values.size()) throw std::invalid_argument("checkpoint: truncated value list");
    return values[cursor++];
  };
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Matrix w(sizes[l], sizes[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index jj = 0; jj < w.cols(); ++jj) w(i, jj) = take();
    Vector b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = take();
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  if (cursor != values.size())
    throw std::invalid_argument("checkpoint: value list does not match the shape header");
  return params;
}

json vector_to_json(const Vector& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i];
  return json(out);
}

Vector vector_from_json(const json& j) {
  const std::vector<double> values = j.get<std::vector<double>>();
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace

std::string mlp_to_json(const MlpParams& params) { return params_to_json(params).dump(); }

MlpParams mlp_from_json(const std::string& text) { return params_from_json(json::parse(text)); }

std::string cfn_model_to_json(const CfnModel& model) {
  json j;
  j["format_version"] = 1;
  j["flip_count"] = model.config.flip_count;
  j["learning_rate"] = model.config.learning_rate;
  j["priority_alpha"] = model.config.priority_alpha;
  j["prior_enabled"] = model.config.prior_enabled;
  j["prioritization_enabled"] = model.config.prioritization_enabled;
  j["zero_flip_mode"] = model.config.zero_flip_mode;
  j["subtract_prior_mean"] = model.config.subtract_prior_mean;
  j["trainable"] = params_to_json(model.trainable);
  j["prior"] = params_to_json(model.prior);
  j["normalizer"] = json{{"count", model.prior_stats.count},
                         {"mean", vector_to_json(model.prior_stats.mean)},
                         {"m2", vector_to_json(model.prior_stats.m2)}};
  return j.dump();
}

CfnModel cfn_model_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format_version").get<int>() != 1)
    throw std::invalid_argument("checkpoint: unsupported format version");
  CfnModel model;
  model.trainable = params_from_json(j.at("trainable"));
  model.prior = params_from_json(j.at("prior"));
  model.config.flip_count = j.at("flip_count").get<int>();
  model.config.net = model.trainable.spec;
  model.config.learning_rate = j.at("learning_rate").get<double>();
  model.config.priority_alpha = j.at("priority_alpha").get<double>();
  model.config.prior_enabled = j.at("prior_enabled").get<bool>();
  model.config.prioritization_enabled = j.at("prioritization_enabled").get<bool>();
  model.config.zero_flip_mode = j.at("zero_flip_mode").get<bool>();
  model.config.subtract_prior_mean = j.at("subtract_prior_mean").get<bool>();
  model.optimizer = make_adam_state(model.trainable);
  const json& norm = j.at("normalizer");
  model.prior_stats.count = norm.at("count").get<std::int64_t>();
  model.prior_stats.mean = vector_from_json(norm.at("mean"));
  model.prior_stats.m2 = vector_from_json(norm.at("m2"));
  return model;
}

void save_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

std::string load_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cfn
