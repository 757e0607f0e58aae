#include "ttpp/baselines.hpp"

#include "ttpp/errors.hpp"

namespace ttpp {

Conv1DStack Conv1DStack::create(ParameterSet& params, const std::string& prefix, std::size_t d_model, Rng& rng) {
  Conv1DStack s;
  s.d_model = d_model;
  for (std::size_t k = 0; k < kLayers; ++k) {
    const std::string idx = std::to_string(k);
    s.weights[k] = params.add(prefix + ".conv" + idx + ".weight", glorot_uniform(kKernel * d_model, d_model, rng));
    s.biases[k] = params.add(prefix + ".conv" + idx + ".bias", Tensor::zeros(1, d_model));
  }
  return s;
}

std::size_t Conv1DStack::count(std::size_t d_model) { return kLayers * (kKernel * d_model * d_model + d_model); }

std::size_t conv1d_output_length(std::size_t input_length) {
  // (L + 2·pad − kernel) / stride + 1 with pad = 1.
  return (input_length + 2 - Conv1DStack::kKernel) / Conv1DStack::kStride + 1;
}

Var conv1d_layer(const Var& input, const Var& weight, const Var& bias) {
  const std::size_t length = input.rows();
  const std::size_t d = input.cols();
  if (weight.rows() != Conv1DStack::kKernel * d) {
    throw DimensionError("conv1d weight " + shape_string(weight.shape()) + " does not match input " +
                         shape_string(input.shape()));
  }
  const Var pad = Var::constant(Tensor::zeros(1, d));
  Var padded = concat_rows({pad, input, pad});
  const std::size_t out_len = conv1d_output_length(length);
  std::vector<Var> windows;
  windows.reserve(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const std::size_t start = j * Conv1DStack::kStride;
    std::vector<Var> taps;
    for (std::size_t k = 0; k < Conv1DStack::kKernel; ++k) taps.push_back(slice_rows(padded, start + k, 1));
    windows.push_back(concat_cols(taps));
  }
  return linear(concat_rows(windows), weight, bias);
}

Var conv1d_aggregate(const Var& sequence, const Conv1DStack& stack, bool shortcut) {
  std::size_t len = sequence.rows();
  for (std::size_t k = 0; k < Conv1DStack::kLayers; ++k) len = conv1d_output_length(len);
  if (len != 1) {
    throw ConfigError("conv1d aggregator cannot reduce " + std::to_string(sequence.rows()) +
                      " chunks to one (ends at length " + std::to_string(len) + ")");
  }
  Var x = sequence;
  for (std::size_t k = 0; k < Conv1DStack::kLayers; ++k) {
    x = conv1d_layer(x, stack.weights[k], stack.biases[k]);
    if (k + 1 < Conv1DStack::kLayers) x = relu(x);
  }
  if (shortcut) x = add(x, slice_rows(sequence, sequence.rows() - 1, 1));
  return x;
}

LSTMParams LSTMParams::create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                              std::size_t hidden, Rng& rng) {
  LSTMParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.w_input = params.add(prefix + ".w_input", glorot_uniform(input_dim, 4 * hidden, rng));
  p.w_hidden = params.add(prefix + ".w_hidden", glorot_uniform(hidden, 4 * hidden, rng));
  p.bias = params.add(prefix + ".bias", Tensor::zeros(1, 4 * hidden));
  return p;
}

std::size_t LSTMParams::count(std::size_t input_dim, std::size_t hidden) {
  return 4 * hidden * (input_dim + hidden + 1);
}

LSTMState lstm_cell(const Var& input, const LSTMState& state, const LSTMParams& params) {
  if (input.cols() != params.input_dim) {
    throw DimensionError("lstm input " + shape_string(input.shape()) + " does not match input_dim " +
                         std::to_string(params.input_dim));
  }
  const std::size_t h = params.hidden;
  Var gates = add_row(add(matmul(input, params.w_input), matmul(state.hidden, params.w_hidden)), params.bias);
  Var in_gate = sigmoid(slice_cols(gates, 0, h));
  Var forget_gate = sigmoid(slice_cols(gates, h, h));
  Var candidate = tanh(slice_cols(gates, 2 * h, h));
  Var out_gate = sigmoid(slice_cols(gates, 3 * h, h));
  Var cell = add(mul(forget_gate, state.cell), mul(in_gate, candidate));
  return LSTMState{mul(out_gate, tanh(cell)), cell};
}

Var lstm_encode(const Var& sequence, const LSTMParams& params, bool shortcut) {
  const Var zero = Var::constant(Tensor::zeros(1, params.hidden));
  LSTMState state{zero, zero};
  for (std::size_t t = 0; t < sequence.rows(); ++t) state = lstm_cell(slice_rows(sequence, t, 1), state, params);
  if (!shortcut) return state.hidden;
  if (params.hidden != sequence.cols()) {
    throw DimensionError("lstm shortcut needs hidden size equal to feature width");
  }
  return add(state.hidden, slice_rows(sequence, sequence.rows() - 1, 1));
}

RolloutVars lstm_decode(const Var& aggregated, const Var& current, const Var& classifier, const LSTMParams& params,
                        std::size_t horizon) {
  if (horizon < 1) throw ContractError("rollout horizon must be at least 1");
  if (aggregated.cols() != params.hidden) {
    throw DimensionError("decoder hidden size " + std::to_string(params.hidden) + " does not match S_t width " +
                         std::to_string(aggregated.cols()));
  }
  RolloutVars out;
  LSTMState state{aggregated, Var::constant(Tensor::zeros(1, params.hidden))};
  Var feature = current;
  Var probs = classify(current, classifier);
  for (std::size_t i = 0; i < horizon; ++i) {
    state = lstm_cell(concat_cols({feature, probs}), state, params);
    feature = state.hidden;
    probs = classify(feature, classifier);
    out.features.push_back(feature);
    out.probs.push_back(probs);
  }
  return out;
}

SSPParams SSPParams::create(ParameterSet& params, const std::string& prefix, std::size_t d_model,
                            std::size_t classes, std::size_t horizon, const Var& classifier, Rng& rng) {
  SSPParams p;
  p.horizon = horizon;
  p.block = PredictionBlockParams::create(params, prefix + ".block", 2 * d_model + classes + horizon, d_model, rng);
  p.classifier = classifier;
  return p;
}

std::size_t SSPParams::count(std::size_t d_model, std::size_t classes, std::size_t horizon) {
  return PredictionBlockParams::count(2 * d_model + classes + horizon, d_model);
}

std::pair<Var, Var> ssp_predict(const Var& aggregated, const Var& current, const Var& current_probs,
                                const SSPParams& params, std::size_t tau, Mode mode, Rng& rng, double dropout) {
  if (tau < 1 || tau > params.horizon) {
    throw ContractError("ssp horizon index " + std::to_string(tau) + " outside [1, " +
                        std::to_string(params.horizon) + "]");
  }
  Tensor onehot = Tensor::zeros(1, params.horizon);
  onehot(0, tau - 1) = 1.0;
  Var input = concat_cols({aggregated, current, current_probs, Var::constant(std::move(onehot))});
  Var feature = prediction_block(input, params.block, mode, rng, dropout);
  return {feature, classify(feature, params.classifier)};
}

RolloutVars ssp_rollout(const Var& aggregated, const Var& current, const SSPParams& params, Mode mode, Rng& rng,
                        double dropout) {
  RolloutVars out;
  Var current_probs = classify(current, params.classifier);
  for (std::size_t tau = 1; tau <= params.horizon; ++tau) {
    auto [feature, probs] = ssp_predict(aggregated, current, current_probs, params, tau, mode, rng, dropout);
    out.features.push_back(feature);
    out.probs.push_back(probs);
  }
  return out;
}

}  // namespace ttpp
