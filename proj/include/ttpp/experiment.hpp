#pragma once

#include <span>
#include <vector>

#include "ttpp/config.hpp"
#include "ttpp/metrics.hpp"
#include "ttpp/model.hpp"
#include "ttpp/training.hpp"

namespace ttpp {

struct TrainedModel {
  Model model;
  History history;
};

/// Builds the configured model and trains it with one generator seeded by
/// train.seed, which drives both initialization and training.
TrainedModel train_run(const RunConfig& config, std::span<const FeatureSequence> train_sequences);

HorizonReport evaluate_model(const Model& model, std::span<const FeatureSequence> sequences, Metric metric);

/// The nine aggregator × predictor cells followed by the TTM-PPM no-feature
/// ablation, all sharing everything else in `base`.
std::vector<ModelConfig> grid_configs(const ModelConfig& base);

}  // namespace ttpp
