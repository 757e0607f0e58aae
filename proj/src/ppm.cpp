#include "ttpp/ppm.hpp"

#include "ttpp/errors.hpp"

namespace ttpp {

PredictionBlockParams PredictionBlockParams::create(ParameterSet& params, const std::string& prefix,
                                                    std::size_t input_dim, std::size_t d_model, Rng& rng) {
  if (d_model < 2 || d_model % 2 != 0) {
    throw ConfigError("prediction block needs an even d_model, got " + std::to_string(d_model));
  }
  const std::size_t hidden = d_model / 2;
  PredictionBlockParams b;
  b.input_dim = input_dim;
  b.d_model = d_model;
  b.fc1_weight = params.add(prefix + ".fc1.weight", glorot_uniform(input_dim, hidden, rng));
  b.fc1_bias = params.add(prefix + ".fc1.bias", Tensor::zeros(1, hidden));
  b.fc2_weight = params.add(prefix + ".fc2.weight", glorot_uniform(hidden, d_model, rng));
  b.fc2_bias = params.add(prefix + ".fc2.bias", Tensor::zeros(1, d_model));
  b.ln_gain = params.add(prefix + ".ln.gain", Tensor::filled(1, d_model, 1.0));
  b.ln_bias = params.add(prefix + ".ln.bias", Tensor::zeros(1, d_model));
  return b;
}

std::size_t PredictionBlockParams::count(std::size_t input_dim, std::size_t d_model) {
  const std::size_t hidden = d_model / 2;
  return input_dim * hidden + hidden + hidden * d_model + d_model + 2 * d_model;
}

PPMParams PPMParams::create(ParameterSet& params, const std::string& prefix, std::size_t d_model,
                            std::size_t classes, const Var& classifier, Rng& rng) {
  const std::size_t in = 2 * d_model + classes;
  PPMParams p;
  p.initial = PredictionBlockParams::create(params, prefix + ".initial", in, d_model, rng);
  p.progressive = PredictionBlockParams::create(params, prefix + ".progressive", in, d_model, rng);
  p.classifier = classifier;
  return p;
}

std::size_t PPMParams::count(std::size_t d_model, std::size_t classes) {
  return 2 * PredictionBlockParams::count(2 * d_model + classes, d_model);
}

Rollout Rollout::from(const RolloutVars& vars) {
  return Rollout{vars.stacked_features().value(), vars.stacked_probs().value()};
}

Var classify(const Var& feature, const Var& classifier) { return softmax(matmul(feature, classifier)); }

Var prediction_block(const Var& input, const PredictionBlockParams& params, Mode mode, Rng& rng, double dropout_rate) {
  if (input.rows() != 1 || input.cols() != params.input_dim) {
    throw DimensionError("prediction block expects 1x" + std::to_string(params.input_dim) + " input, got " +
                         shape_string(input.shape()));
  }
  Var hidden = relu(linear(input, params.fc1_weight, params.fc1_bias));
  Var out = linear(hidden, params.fc2_weight, params.fc2_bias);
  out = layer_norm(out, params.ln_gain, params.ln_bias);
  return dropout(out, dropout_rate, mode, rng);
}

namespace {

RolloutVars rollout_impl(const Var& aggregated, const Var& current, const PPMParams& params, std::size_t horizon,
                         Mode mode, Rng& rng, double dropout_rate, bool feed_features) {
  if (horizon < 1) throw ContractError("rollout horizon must be at least 1");
  RolloutVars out;
  Var p_now = classify(current, params.classifier);
  Var f = prediction_block(concat_cols({aggregated, current, p_now}), params.initial, mode, rng, dropout_rate);
  Var p = classify(f, params.classifier);
  out.features.push_back(f);
  out.probs.push_back(p);
  const Var blank = feed_features ? Var() : Var::constant(Tensor::zeros(1, aggregated.cols()));
  for (std::size_t i = 2; i <= horizon; ++i) {
    Var input = concat_cols({aggregated, feed_features ? f : blank, p});
    f = prediction_block(input, params.progressive, mode, rng, dropout_rate);
    p = classify(f, params.classifier);
    out.features.push_back(f);
    out.probs.push_back(p);
  }
  return out;
}

}  // namespace

RolloutVars rollout(const Var& aggregated, const Var& current, const PPMParams& params, std::size_t horizon,
                    Mode mode, Rng& rng, double dropout_rate) {
  return rollout_impl(aggregated, current, params, horizon, mode, rng, dropout_rate, true);
}

RolloutVars rollout_without_features(const Var& aggregated, const Var& current, const PPMParams& params,
                                     std::size_t horizon, Mode mode, Rng& rng, double dropout_rate) {
  return rollout_impl(aggregated, current, params, horizon, mode, rng, dropout_rate, false);
}

}  // namespace ttpp
