#pragma once

#include <array>
#include <string>
#include <utility>

#include "ttpp/autograd.hpp"
#include "ttpp/parameter.hpp"
#include "ttpp/ppm.hpp"

namespace ttpp {

// --- Temporal convolution aggregator ----------------------------------------

/// Three kernel-3, stride-2 temporal convolutions, d → d channels, each with
/// one zero row of padding on both sides (8 → 4 → 2 → 1).
///
/// weights[k] is 3d × d in im2col layout: rows [j·d, (j+1)·d) hold tap j,
/// tap 0 being the earliest chunk of the window.
struct Conv1DStack {
  static constexpr std::size_t kLayers = 3;
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kStride = 2;

  std::size_t d_model = 0;
  std::array<Var, kLayers> weights;
  std::array<Var, kLayers> biases;

  static Conv1DStack create(ParameterSet& params, const std::string& prefix, std::size_t d_model, Rng& rng);
  static std::size_t count(std::size_t d_model);
};

/// Output length of one padded kernel-3 stride-2 layer.
std::size_t conv1d_output_length(std::size_t input_length);

/// One padded strided convolution layer (no activation).
Var conv1d_layer(const Var& input, const Var& weight, const Var& bias);

/// Runs the stack with ReLU between layers; adds f_T when `shortcut` is set.
Var conv1d_aggregate(const Var& sequence, const Conv1DStack& stack, bool shortcut = true);

// --- LSTM --------------------------------------------------------------------

/// Gate order in the packed matrices is (input, forget, cell, output).
struct LSTMParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Var w_input;   // input_dim × 4h
  Var w_hidden;  // h × 4h
  Var bias;      // 1 × 4h

  static LSTMParams create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden, Rng& rng);
  static std::size_t count(std::size_t input_dim, std::size_t hidden);
};

struct LSTMState {
  Var hidden;
  Var cell;
};

LSTMState lstm_cell(const Var& input, const LSTMState& state, const LSTMParams& params);

/// Zero initial state; returns the final hidden state (+ f_T with `shortcut`).
Var lstm_encode(const Var& sequence, const LSTMParams& params, bool shortcut = true);

/// Hidden state starts at S_t with a zero cell. Each step consumes the previous
/// predicted feature ⊕ probability (f_t ⊕ p_t first) and emits its hidden
/// state as the predicted feature.
RolloutVars lstm_decode(const Var& aggregated, const Var& current, const Var& classifier, const LSTMParams& params,
                        std::size_t horizon);

// --- Single-shot prediction ------------------------------------------------

/// One prediction block over S_t ⊕ f_t ⊕ p_t ⊕ onehot(τ, l).
struct SSPParams {
  std::size_t horizon = 0;
  PredictionBlockParams block;
  Var classifier;

  static SSPParams create(ParameterSet& params, const std::string& prefix, std::size_t d_model, std::size_t classes,
                          std::size_t horizon, const Var& classifier, Rng& rng);
  static std::size_t count(std::size_t d_model, std::size_t classes, std::size_t horizon);
};

/// Predicts (feature, probability) at horizon `tau` (1-based) with no chaining.
std::pair<Var, Var> ssp_predict(const Var& aggregated, const Var& current, const Var& current_probs,
                                const SSPParams& params, std::size_t tau, Mode mode, Rng& rng, double dropout);

RolloutVars ssp_rollout(const Var& aggregated, const Var& current, const SSPParams& params, Mode mode, Rng& rng,
                        double dropout);

}  // namespace ttpp
