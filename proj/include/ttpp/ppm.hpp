#pragma once

#include <string>
#include <vector>

#include "ttpp/autograd.hpp"
#include "ttpp/parameter.hpp"

namespace ttpp {

/// fc1 (in → d/2) → ReLU → fc2 (d/2 → d) → LayerNorm → Dropout.
struct PredictionBlockParams {
  std::size_t input_dim = 0;
  std::size_t d_model = 0;
  Var fc1_weight, fc1_bias;
  Var fc2_weight, fc2_bias;
  Var ln_gain, ln_bias;

  static PredictionBlockParams create(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                                      std::size_t d_model, Rng& rng);
  static std::size_t count(std::size_t input_dim, std::size_t d_model);
};

/// Initial block, one shared progressive block, and the classifier W_c.
/// The classifier handle is shared with whichever model owns it.
struct PPMParams {
  PredictionBlockParams initial;
  PredictionBlockParams progressive;
  Var classifier;  // d_model × C, no bias

  static PPMParams create(ParameterSet& params, const std::string& prefix, std::size_t d_model, std::size_t classes,
                          const Var& classifier, Rng& rng);
  /// Both blocks; the classifier is counted by its owner.
  static std::size_t count(std::size_t d_model, std::size_t classes);
};

/// Predicted features and class distributions, one row per future step.
struct RolloutVars {
  std::vector<Var> features;  // each 1 × d_model
  std::vector<Var> probs;     // each 1 × C

  std::size_t steps() const { return features.size(); }
  Var stacked_features() const { return concat_rows(features); }
  Var stacked_probs() const { return concat_rows(probs); }
};

struct Rollout {
  Tensor features;  // l × d_model
  Tensor probs;     // l × C

  static Rollout from(const RolloutVars& vars);
};

/// softmax(f W_c).
Var classify(const Var& feature, const Var& classifier);

Var prediction_block(const Var& input, const PredictionBlockParams& params, Mode mode, Rng& rng, double dropout);

/// Progressive rollout. Step 1 reads (S_t, f_t, p_t) through the initial
/// block; every later step reads (S_t, f'_{i-1}, p'_{i-1}) through the shared
/// progressive block. Inputs are concatenated in that order.
RolloutVars rollout(const Var& aggregated, const Var& current, const PPMParams& params, std::size_t horizon,
                    Mode mode, Rng& rng, double dropout);

/// Ablation: steps i >= 2 see zeros in place of the previous predicted feature.
RolloutVars rollout_without_features(const Var& aggregated, const Var& current, const PPMParams& params,
                                     std::size_t horizon, Mode mode, Rng& rng, double dropout);

}  // namespace ttpp
